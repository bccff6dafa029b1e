#include "logicdiag/sslsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "logicdiag/error.hpp"
#include "logicdiag/rng.hpp"

namespace logicdiag::sim {

namespace {

// Stream salts so labeled sampling, unlabeled sampling, revision and
// initialisation never share random numbers.
constexpr std::uint64_t kLabeledSalt = 0x6c61626c;
constexpr std::uint64_t kUnlabeledSalt = 0x756e6c62;
constexpr std::uint64_t kReviseSalt = 0x72657673;
constexpr std::uint64_t kInitSalt = 0x696e6974;
constexpr std::uint64_t kHierarchySalt = 0x68696572;

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ValidationError("config key " + key + " expects a boolean, got \"" + v + "\"");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    T out{};
    in >> out;
    if (!in || !in.eof()) {
        throw ValidationError("config key " + key + " expects a number, got \"" + v + "\"");
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::set<std::set<std::string>> leaf_grouping(const LabelHierarchy& h) {
    std::set<std::set<std::string>> groups;
    for (const auto& node : h.nodes()) {
        if (h.is_leaf(node.id) || !h.is_leaf(h.children_of(node.id).front())) continue;
        std::set<std::string> g;
        for (ConceptId c : h.children_of(node.id)) g.insert(h.name(c));
        groups.insert(std::move(g));
    }
    return groups;
}

void add_noise(std::vector<double>& x, double sigma, RngStream& rng) {
    if (sigma <= 0.0) return;
    for (double& v : x) v += sigma * rng.normal();
}

std::vector<double> gather_rows(const SynthDataset& d, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size() * d.dim);
    for (auto i : idx) out.insert(out.end(), d.row(i), d.row(i) + d.dim);
    return out;
}

}  // namespace

void SimConfig::validate() const {
    if (num_superclasses < 2 || leaves_per_superclass < 2) {
        throw ValidationError("synthetic task needs >= 2 superclasses with >= 2 leaves each");
    }
    if (dim < 1) throw ValidationError("dim must be >= 1");
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) {
        throw ValidationError("labeled_fraction must be in (0,1]");
    }
    const auto leaves = static_cast<std::size_t>(num_superclasses * leaves_per_superclass);
    if (num_points < leaves) throw ValidationError("num_points must cover every leaf");
    if (static_cast<std::size_t>(std::llround(labeled_fraction * double(num_points))) < leaves) {
        throw ValidationError("labeled fraction too small: " + std::to_string(num_points) + " x " +
                              std::to_string(labeled_fraction) + " labeled points cannot cover " +
                              std::to_string(leaves) + " leaves");
    }
    if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
    if (!(strong_noise > weak_noise && weak_noise >= 0.0)) {
        throw ValidationError("augmentation noise must satisfy strong > weak >= 0");
    }
    if (q < 1) throw ValidationError("q must be >= 1");
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must be in (0,1]");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (labeled_batch == 0 || unlabeled_batch == 0) throw ValidationError("batch sizes must be positive");
    if (diagnosis && !hierarchical_head) {
        throw ValidationError("diagnosis needs the hierarchical head (hierarchical_head = 1)");
    }
}

SimConfig parse_sim_config(const std::string& text) {
    SimConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(lineno) + " is not key=value: \"" + line + "\"");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string v = trim(line.substr(eq + 1));
        if (key == "num_superclasses") cfg.num_superclasses = parse_number<int>(key, v);
        else if (key == "leaves_per_superclass") cfg.leaves_per_superclass = parse_number<int>(key, v);
        else if (key == "dim") cfg.dim = parse_number<int>(key, v);
        else if (key == "num_points") cfg.num_points = parse_number<std::size_t>(key, v);
        else if (key == "num_test") cfg.num_test = parse_number<std::size_t>(key, v);
        else if (key == "labeled_fraction") cfg.labeled_fraction = parse_number<double>(key, v);
        else if (key == "superclass_spread") cfg.superclass_spread = parse_number<double>(key, v);
        else if (key == "leaf_spread") cfg.leaf_spread = parse_number<double>(key, v);
        else if (key == "point_noise") cfg.point_noise = parse_number<double>(key, v);
        else if (key == "lambda") cfg.lambda = parse_number<double>(key, v);
        else if (key == "tau") cfg.tau = parse_number<double>(key, v);
        else if (key == "q") cfg.q = parse_number<int>(key, v);
        else if (key == "strategy") cfg.strategy = parse_strategy(v);
        else if (key == "hierarchical_head") cfg.hierarchical_head = parse_bool(key, v);
        else if (key == "diagnosis") cfg.diagnosis = parse_bool(key, v);
        else if (key == "fuzzy_likelihood") cfg.fuzzy_likelihood = parse_bool(key, v);
        else if (key == "families") {
            cfg.families = {v.find('C') != std::string::npos, v.find('D') != std::string::npos,
                            v.find('E') != std::string::npos};
        } else if (key == "weak_noise") cfg.weak_noise = parse_number<double>(key, v);
        else if (key == "strong_noise") cfg.strong_noise = parse_number<double>(key, v);
        else if (key == "learning_rate") cfg.learning_rate = parse_number<double>(key, v);
        else if (key == "warmup") cfg.warmup = parse_number<std::size_t>(key, v);
        else if (key == "rampup") cfg.rampup = parse_number<std::size_t>(key, v);
        else if (key == "iterations") cfg.iterations = parse_number<std::size_t>(key, v);
        else if (key == "labeled_batch") cfg.labeled_batch = parse_number<std::size_t>(key, v);
        else if (key == "unlabeled_batch") cfg.unlabeled_batch = parse_number<std::size_t>(key, v);
        else if (key == "binarize_threshold") cfg.binarize_threshold = parse_number<double>(key, v);
        else if (key == "max_cardinality") cfg.max_cardinality = parse_number<std::size_t>(key, v);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "threads") cfg.threads = parse_number<unsigned>(key, v);
        else if (key == "hierarchy") {
            if (v == "official") cfg.hierarchy = HierarchySource::Official;
            else if (v == "random") cfg.hierarchy = HierarchySource::Random;
            else throw ValidationError("hierarchy must be official or random, got \"" + v + "\"");
        } else {
            throw ValidationError("unknown config key \"" + key + "\" on line " + std::to_string(lineno));
        }
    }
    cfg.validate();
    return cfg;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sim_config(buf.str());
}

nlohmann::json to_json(const SimConfig& c) {
    std::string families;
    if (c.families.composition) families += 'C';
    if (c.families.decomposition) families += 'D';
    if (c.families.exclusion) families += 'E';
    return {{"num_superclasses", c.num_superclasses},
            {"leaves_per_superclass", c.leaves_per_superclass},
            {"dim", c.dim},
            {"num_points", c.num_points},
            {"num_test", c.num_test},
            {"labeled_fraction", c.labeled_fraction},
            {"superclass_spread", c.superclass_spread},
            {"leaf_spread", c.leaf_spread},
            {"point_noise", c.point_noise},
            {"lambda", c.lambda},
            {"tau", c.tau},
            {"q", c.q},
            {"strategy", to_string(c.strategy)},
            {"hierarchical_head", c.hierarchical_head},
            {"diagnosis", c.diagnosis},
            {"fuzzy_likelihood", c.fuzzy_likelihood},
            {"families", families},
            {"weak_noise", c.weak_noise},
            {"strong_noise", c.strong_noise},
            {"learning_rate", c.learning_rate},
            {"iterations", c.iterations},
            {"warmup", c.warmup},
            {"rampup", c.rampup},
            {"labeled_batch", c.labeled_batch},
            {"unlabeled_batch", c.unlabeled_batch},
            {"binarize_threshold", c.binarize_threshold},
            {"max_cardinality", c.max_cardinality},
            {"seed", c.seed},
            {"hierarchy", c.hierarchy == HierarchySource::Official ? "official" : "random"}};
}

LabelHierarchy official_hierarchy(const SimConfig& cfg) {
    std::vector<std::string> names{"Root"};
    std::vector<std::optional<ConceptId>> parents{std::nullopt};
    for (int s = 0; s < cfg.num_superclasses; ++s) {
        const auto super_id = static_cast<ConceptId>(names.size());
        names.push_back("super" + std::to_string(s));
        parents.emplace_back(0);
        for (int j = 0; j < cfg.leaves_per_superclass; ++j) {
            names.push_back("leaf" + std::to_string(s) + "_" + std::to_string(j));
            parents.emplace_back(super_id);
        }
    }
    return LabelHierarchy::from_parents(std::move(names), std::move(parents));
}

LabelHierarchy random_hierarchy(const LabelHierarchy& official, std::uint64_t seed) {
    RngStream rng(seed, kHierarchySalt);
    const auto reference = leaf_grouping(official);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        auto h = shuffle_leaf_grouping(official, rng.engine());
        if (leaf_grouping(h) != reference) return h;
    }
    throw ValidationError("could not draw a leaf grouping different from the official hierarchy");
}

std::size_t SynthDataset::num_labeled() const {
    return static_cast<std::size_t>(std::count(labeled_mask.begin(), labeled_mask.end(), 1));
}

SynthDataset gen_synthetic(const SimConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SynthDataset d{.dim = static_cast<std::size_t>(cfg.dim), .hierarchy = official_hierarchy(cfg)};
    d.seed = seed;
    RngStream rng(seed, 0);

    const auto classes = d.hierarchy.num_leaves();
    const auto& h = d.hierarchy;
    const auto supers = static_cast<std::size_t>(cfg.num_superclasses);
    // With enough dimensions every superclass and leaf gets its own axis, so
    // each concept is linearly separable; otherwise centres are random.
    const bool axes = d.dim >= supers + classes;
    std::vector<std::vector<double>> super_means(supers, std::vector<double>(d.dim, 0.0));
    for (std::size_t s = 0; s < supers; ++s) {
        for (std::size_t k = 0; k < d.dim; ++k) {
            super_means[s][k] = axes ? (k == s ? cfg.superclass_spread : 0.0) : cfg.superclass_spread * rng.normal();
        }
    }
    d.leaf_means.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        const ConceptId super = h.parent(h.leaf_ids()[c]);
        const auto s = static_cast<std::size_t>((super - 1) / (cfg.leaves_per_superclass + 1));
        d.leaf_means[c].resize(d.dim);
        for (std::size_t k = 0; k < d.dim; ++k) {
            const double offset = axes ? (k == supers + c ? cfg.leaf_spread : 0.0) : cfg.leaf_spread * rng.normal();
            d.leaf_means[c][k] = super_means[s][k] + offset;
        }
    }

    d.point_noise = cfg.point_noise;
    auto points = sample_from(d, cfg.num_points, splitmix64(seed ^ 0x706f696e));
    d.features = std::move(points.features);
    d.leaf_labels = std::move(points.leaf_labels);

    // Labeled split: one example per leaf first, then random fill.
    const auto target = static_cast<std::size_t>(std::llround(cfg.labeled_fraction * double(cfg.num_points)));
    d.labeled_mask.assign(cfg.num_points, 0);
    std::vector<std::size_t> order(cfg.num_points);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<bool> covered(classes, false);
    std::size_t labeled = 0;
    for (auto i : order) {
        const auto c = static_cast<std::size_t>(d.leaf_labels[i]);
        if (!covered[c]) {
            covered[c] = true;
            d.labeled_mask[i] = 1;
            ++labeled;
        }
    }
    if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
        throw ValidationError("generated data misses a leaf class; increase num_points");
    }
    for (auto i : order) {
        if (labeled >= target) break;
        if (!d.labeled_mask[i]) {
            d.labeled_mask[i] = 1;
            ++labeled;
        }
    }
    return d;
}

SynthDataset sample_from(const SynthDataset& like, std::size_t n, std::uint64_t seed) {
    SynthDataset d{.dim = like.dim, .hierarchy = like.hierarchy};
    d.leaf_means = like.leaf_means;
    d.point_noise = like.point_noise;
    d.seed = seed;
    RngStream rng(seed, 1);
    const auto classes = like.leaf_means.size();
    d.features.resize(n * d.dim);
    d.leaf_labels.resize(n);
    d.labeled_mask.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(rng.below(classes));
        d.leaf_labels[i] = static_cast<int>(c);
        for (std::size_t k = 0; k < d.dim; ++k) {
            d.features[i * d.dim + k] = like.leaf_means[c][k] + like.point_noise * rng.normal();
        }
    }
    return d;
}

void ToyModel::logits(const double* x, double* out) const {
    const double* bias = weights.data() + dim * outputs;
    for (std::size_t o = 0; o < outputs; ++o) out[o] = bias[o];
    for (std::size_t k = 0; k < dim; ++k) {
        const double xk = x[k];
        const double* w = weights.data() + k * outputs;
        for (std::size_t o = 0; o < outputs; ++o) out[o] += xk * w[o];
    }
}

std::vector<double> ToyModel::predict(const std::vector<double>& features) const {
    const std::size_t n = features.size() / dim;
    std::vector<double> out(n * outputs);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data() + i * outputs;
        logits(features.data() + i * dim, row);
        for (std::size_t o = 0; o < outputs; ++o) row[o] = sigmoid(row[o]);
    }
    return out;
}

LossValue losses(const ToyModel& model, const LossBatch& batch, double lambda) {
    const std::size_t d = model.dim;
    const std::size_t m = model.outputs;
    if (batch.active.size() != m) throw ValidationError("active mask does not match model outputs");
    std::size_t active = 0;
    for (auto a : batch.active) active += a ? 1 : 0;

    LossValue v;
    v.gradient.assign((d + 1) * m, 0.0);
    std::vector<double> z(m);

    // Accumulates one term's mean BCE and adds scale * dBCE/dW to the gradient.
    auto term = [&](const std::vector<double>& xs, const std::vector<double>& ts, const std::vector<std::uint8_t>* mask,
                    double scale) {
        const std::size_t rows = xs.size() / std::max<std::size_t>(d, 1);
        if (ts.size() != rows * m) throw ValidationError("target matrix does not match batch rows");
        std::size_t used = 0;
        for (std::size_t i = 0; i < rows; ++i) used += (!mask || (*mask)[i]) ? 1 : 0;
        if (used == 0 || active == 0) return 0.0;
        const double denom = double(used) * double(active);
        double loss = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (mask && !(*mask)[i]) continue;
            const double* x = xs.data() + i * d;
            model.logits(x, z.data());
            for (std::size_t o = 0; o < m; ++o) {
                if (!batch.active[o]) continue;
                const double t = ts[i * m + o];
                loss += softplus(z[o]) - t * z[o];
                const double g = scale * (sigmoid(z[o]) - t) / denom;
                for (std::size_t k = 0; k < d; ++k) v.gradient[k * m + o] += g * x[k];
                v.gradient[d * m + o] += g;
            }
        }
        return loss / denom;
    };

    v.supervised = term(batch.labeled_x, batch.labeled_t, nullptr, 1.0);
    v.unsupervised = term(batch.unlabeled_x, batch.unlabeled_t, &batch.unlabeled_mask, lambda);
    v.total = v.supervised + lambda * v.unsupervised;
    return v;
}

Confusion confusion_matrix(const std::vector<int>& truth, const std::vector<int>& pred, std::size_t classes) {
    if (truth.size() != pred.size()) throw ValidationError("truth and prediction lengths differ");
    Confusion conf(classes * classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = static_cast<std::size_t>(truth[i]);
        const auto p = static_cast<std::size_t>(pred[i]);
        if (t >= classes || p >= classes) throw ValidationError("class index out of range");
        ++conf[t * classes + p];
    }
    return conf;
}

Confusion project_confusion(const Confusion& leaf_conf, const LabelHierarchy& h, int level) {
    const auto classes = h.num_leaves();
    const auto groups = h.concepts_at_level(level);
    std::vector<std::size_t> group_of(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        const ConceptId a = h.ancestor_at_level(h.leaf_ids()[c], level);
        group_of[c] = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), a) - groups.begin());
    }
    const auto g = groups.size();
    Confusion out(g * g, 0);
    for (std::size_t t = 0; t < classes; ++t) {
        for (std::size_t p = 0; p < classes; ++p) out[group_of[t] * g + group_of[p]] += leaf_conf[t * classes + p];
    }
    return out;
}

std::vector<double> class_iou(const Confusion& conf, std::size_t classes) {
    std::vector<double> iou(classes, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t tp = conf[c * classes + c], fp = 0, fn = 0;
        for (std::size_t k = 0; k < classes; ++k) {
            if (k == c) continue;
            fn += conf[c * classes + k];
            fp += conf[k * classes + c];
        }
        const std::size_t denom = tp + fp + fn;
        if (denom > 0) iou[c] = 100.0 * double(tp) / double(denom);
    }
    return iou;
}

double mean_defined(const std::vector<double>& values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (!std::isnan(v)) {
            sum += v;
            ++n;
        }
    }
    return n ? sum / double(n) : std::numeric_limits<double>::quiet_NaN();
}

double accuracy(const Confusion& conf, std::size_t classes) {
    std::size_t total = 0, hit = 0;
    for (std::size_t t = 0; t < classes; ++t) {
        for (std::size_t p = 0; p < classes; ++p) {
            total += conf[t * classes + p];
            if (t == p) hit += conf[t * classes + p];
        }
    }
    return total ? 100.0 * double(hit) / double(total) : 0.0;
}

std::vector<int> predict_leaf_classes(const ToyModel& model, const SynthDataset& data,
                                      const std::vector<ConceptId>& class_to_output) {
    std::vector<int> pred(data.size());
    std::vector<double> z(model.outputs);
    for (std::size_t i = 0; i < data.size(); ++i) {
        model.logits(data.row(i), z.data());
        std::size_t best = 0;
        for (std::size_t c = 1; c < class_to_output.size(); ++c) {
            if (z[static_cast<std::size_t>(class_to_output[c])] > z[static_cast<std::size_t>(class_to_output[best])]) {
                best = c;
            }
        }
        pred[i] = static_cast<int>(best);
    }
    return pred;
}

Metrics evaluate(const ToyModel& model, const SynthDataset& data, const std::vector<ConceptId>& class_to_output) {
    const auto& h = data.hierarchy;
    const auto classes = h.num_leaves();
    const auto pred = predict_leaf_classes(model, data, class_to_output);
    const auto conf = confusion_matrix(data.leaf_labels, pred, classes);

    Metrics m;
    m.leaf_iou = class_iou(conf, classes);
    for (int level = 1; level <= h.num_levels(); ++level) {
        const auto projected = level == 1 ? conf : project_confusion(conf, h, level);
        const auto g = level == 1 ? classes : h.concepts_at_level(level).size();
        m.miou.push_back(mean_defined(class_iou(projected, g)));
        m.accuracy.push_back(accuracy(projected, g));
    }
    return m;
}

TrainReport train(const SimConfig& cfg) {
    cfg.validate();
    TrainReport report;
    report.config = cfg;

    const SynthDataset data = gen_synthetic(cfg, cfg.seed);
    const SynthDataset test = sample_from(data, cfg.num_test, splitmix64(cfg.seed ^ 0x74657374));
    const LabelHierarchy& official = data.hierarchy;
    const LabelHierarchy train_h =
        cfg.hierarchy == HierarchySource::Official ? official : random_hierarchy(official, cfg.seed);

    const std::size_t outputs = train_h.size();
    const std::size_t classes = official.num_leaves();
    std::vector<ConceptId> class_to_output(classes);
    std::vector<int> output_to_class(outputs, -1);
    for (std::size_t c = 0; c < classes; ++c) {
        class_to_output[c] = train_h.id_of(official.name(official.leaf_ids()[c]));
        output_to_class[static_cast<std::size_t>(class_to_output[c])] = static_cast<int>(c);
    }
    // Full-path multi-hot target for a class under the training hierarchy.
    std::vector<std::vector<double>> class_targets(classes, std::vector<double>(outputs, 0.0));
    for (std::size_t c = 0; c < classes; ++c) {
        if (cfg.hierarchical_head) {
            for (ConceptId o : train_h.path_to(class_to_output[c])) class_targets[c][static_cast<std::size_t>(o)] = 1.0;
        } else {
            class_targets[c][static_cast<std::size_t>(class_to_output[c])] = 1.0;
        }
    }
    std::vector<std::uint8_t> active(outputs, 1);
    if (!cfg.hierarchical_head) {
        for (std::size_t o = 0; o < outputs; ++o) active[o] = output_to_class[o] >= 0 ? 1 : 0;
    }

    std::vector<std::size_t> labeled, unlabeled;
    for (std::size_t i = 0; i < data.size(); ++i) (data.labeled_mask[i] ? labeled : unlabeled).push_back(i);

    ToyModel model(data.dim, outputs);
    {
        RngStream init(cfg.seed ^ kInitSalt, 0);
        for (double& w : model.weights) w = 0.01 * init.normal();
    }

    RevisionConfig rcfg;
    rcfg.binarize_threshold = cfg.binarize_threshold;
    rcfg.strategy = cfg.fuzzy_likelihood ? cfg.strategy : Strategy::Uniform;
    rcfg.fuzzy.q = cfg.q;
    rcfg.families = cfg.families;
    rcfg.max_cardinality = cfg.max_cardinality;
    rcfg.tau = cfg.tau;
    rcfg.threads = cfg.threads;
    const RevisionEngine engine(train_h, rcfg);

    report.initial = evaluate(model, test, class_to_output);

    LossBatch batch;
    batch.active = active;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        // Labeled term on weak views.
        RngStream lrng(cfg.seed ^ kLabeledSalt, it);
        std::vector<std::size_t> lidx(cfg.labeled_batch);
        for (auto& i : lidx) i = labeled[lrng.below(labeled.size())];
        batch.labeled_x = gather_rows(data, lidx);
        add_noise(batch.labeled_x, cfg.weak_noise, lrng);
        batch.labeled_t.clear();
        for (auto i : lidx) {
            const auto& t = class_targets[static_cast<std::size_t>(data.leaf_labels[i])];
            batch.labeled_t.insert(batch.labeled_t.end(), t.begin(), t.end());
        }

        // Pseudo labels from weak views, consistency target on strong views.
        RngStream urng(cfg.seed ^ kUnlabeledSalt, it);
        const std::size_t bu = unlabeled.empty() || it < cfg.warmup ? 0 : cfg.unlabeled_batch;
        std::vector<std::size_t> uidx(bu);
        for (auto& i : uidx) i = unlabeled[urng.below(unlabeled.size())];
        auto weak = gather_rows(data, uidx);
        auto strong = weak;
        add_noise(weak, cfg.weak_noise, urng);
        add_noise(strong, cfg.strong_noise, urng);
        const auto probs = model.predict(weak);

        batch.unlabeled_x = std::move(strong);
        batch.unlabeled_t.assign(bu * outputs, 0.0);
        batch.unlabeled_mask.assign(bu, 0);

        if (bu > 0 && cfg.diagnosis) {
            const ProbBatch pb(bu, outputs, std::span<const double>(probs));
            const auto revised = engine.revise(pb, splitmix64(cfg.seed ^ kReviseSalt ^ splitmix64(it)), cfg.threads);
            report.revised_rows += revised.stats.revised;
            for (std::size_t r = 0; r < bu; ++r) {
                const auto leaf = revised.leaf_labels[r];
                if (leaf < 0) continue;
                batch.unlabeled_mask[r] = 1;
                for (std::size_t o = 0; o < outputs; ++o) batch.unlabeled_t[r * outputs + o] = revised.revised[r * outputs + o];
            }
        } else if (bu > 0) {
            std::vector<double> leaf_probs(bu * classes);
            for (std::size_t r = 0; r < bu; ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < classes; ++c) {
                    const double p = probs[r * outputs + static_cast<std::size_t>(class_to_output[c])];
                    leaf_probs[r * classes + c] = p;
                    sum += p;
                }
                for (std::size_t c = 0; c < classes; ++c) leaf_probs[r * classes + c] /= sum;
            }
            const auto chosen = confidence_threshold_baseline(leaf_probs, bu, classes, cfg.tau);
            for (std::size_t r = 0; r < bu; ++r) {
                if (chosen[r] < 0) continue;
                batch.unlabeled_mask[r] = 1;
                const auto& t = class_targets[static_cast<std::size_t>(chosen[r])];
                std::copy(t.begin(), t.end(), batch.unlabeled_t.begin() + static_cast<std::ptrdiff_t>(r * outputs));
            }
        }

        auto& tally = report.pseudo;
        for (std::size_t r = 0; r < bu; ++r) {
            const auto& truth = class_targets[static_cast<std::size_t>(data.leaf_labels[uidx[r]])];
            bool pre_any = false, pre_match = true, post_match = true;
            for (std::size_t o = 0; o < outputs; ++o) {
                if (!active[o]) continue;
                const bool t = truth[o] > 0.5;
                const bool before = probs[r * outputs + o] >= cfg.binarize_threshold;
                const bool after = batch.unlabeled_t[r * outputs + o] > 0.5;
                pre_any = pre_any || before;
                pre_match = pre_match && before == t;
                post_match = post_match && after == t;
                tally.truth_positives += t ? 1 : 0;
                tally.pre_positives += before ? 1 : 0;
                tally.pre_true_positives += before && t ? 1 : 0;
                tally.post_positives += after ? 1 : 0;
                tally.post_true_positives += after && t ? 1 : 0;
            }
            if (pre_any) {
                ++tally.pre_rows;
                tally.pre_exact += pre_match ? 1 : 0;
            }
            if (batch.unlabeled_mask[r]) {
                ++tally.post_rows;
                tally.post_exact += post_match ? 1 : 0;
            } else {
                ++report.ignored_rows;
            }
        }

        double lambda = cfg.lambda;
        if (it < cfg.warmup + cfg.rampup && cfg.rampup > 0 && it >= cfg.warmup) {
            lambda *= double(it - cfg.warmup + 1) / double(cfg.rampup);
        }
        const LossValue loss = losses(model, batch, lambda);
        if (!std::isfinite(loss.total)) {
            throw DivergenceError("training diverged at iteration " + std::to_string(it) +
                                  ": supervised=" + std::to_string(loss.supervised) +
                                  " unsupervised=" + std::to_string(loss.unsupervised));
        }
        report.loss_supervised.push_back(loss.supervised);
        report.loss_unsupervised.push_back(loss.unsupervised);
        report.loss_total.push_back(loss.total);
        for (std::size_t i = 0; i < model.weights.size(); ++i) model.weights[i] -= cfg.learning_rate * loss.gradient[i];
    }

    report.final = evaluate(model, test, class_to_output);
    report.model = std::move(model);
    return report;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
    auto nan_to_null = [](const std::vector<double>& xs) {
        nlohmann::json a = nlohmann::json::array();
        for (double x : xs) a.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
        return a;
    };
    return {{"leaf_iou", nan_to_null(m.leaf_iou)}, {"miou", nan_to_null(m.miou)}, {"accuracy", m.accuracy}};
}

}  // namespace

nlohmann::json to_json(const TrainReport& r, const LabelHierarchy& h) {
    nlohmann::json j;
    j["config"] = to_json(r.config);
    j["loss_supervised"] = r.loss_supervised;
    j["loss_unsupervised"] = r.loss_unsupervised;
    j["loss_total"] = r.loss_total;
    j["initial_metrics"] = metrics_json(r.initial);
    j["final_metrics"] = metrics_json(r.final);
    nlohmann::json names = nlohmann::json::array();
    for (ConceptId leaf : h.leaf_ids()) names.push_back(h.name(leaf));
    j["leaf_names"] = std::move(names);
    const auto& t = r.pseudo;
    j["pseudo_labels"] = {{"pre_rows", t.pre_rows},
                          {"pre_exact", t.pre_exact},
                          {"post_rows", t.post_rows},
                          {"post_exact", t.post_exact},
                          {"pre_precision", t.pre_precision()},
                          {"post_precision", t.post_precision()},
                          {"pre_concept_precision", t.pre_concept_precision()},
                          {"post_concept_precision", t.post_concept_precision()},
                          {"pre_concept_recall", t.pre_concept_recall()},
                          {"post_concept_recall", t.post_concept_recall()}};
    j["revised_rows"] = r.revised_rows;
    j["ignored_rows"] = r.ignored_rows;
    return j;
}

}  // namespace logicdiag::sim
