#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "logicdiag/diagnosis.hpp"
#include "logicdiag/error.hpp"
#include "logicdiag/hierarchy.hpp"
#include "logicdiag/pipeline.hpp"
#include "logicdiag/rules.hpp"
#include "logicdiag/sslsim.hpp"
#include "logicdiag/tensor_io.hpp"

namespace logicdiag::cli {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RuleFamilies parse_families(const std::string& text) {
    RuleFamilies f{false, false, false};
    for (char c : text) {
        switch (c) {
            case 'C': case 'c': f.composition = true; break;
            case 'D': case 'd': f.decomposition = true; break;
            case 'E': case 'e': f.exclusion = true; break;
            default: throw UsageError("--families takes letters from C, D, E; got \"" + text + "\"");
        }
    }
    return f;
}

ConflictGrouping parse_grouping(const std::string& text) {
    if (text == "family") return ConflictGrouping::PerFamily;
    if (text == "rule") return ConflictGrouping::PerGroundRule;
    throw UsageError("--grouping must be family or rule, got \"" + text + "\"");
}

// Flag value when given, else LOGICDIAG_SEED, else the fallback.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value, std::uint64_t fallback) {
    if (opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("LOGICDIAG_SEED"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (errno != 0 || *end != '\0' || env[0] == '-') {
            throw UsageError(std::string("LOGICDIAG_SEED must be a non-negative integer, got \"") + env + "\"");
        }
        return v;
    }
    return fallback;
}

std::string join_names(const LabelHierarchy& h, const std::vector<ConceptId>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ',';
        s += h.name(ids[i]);
    }
    return s;
}

std::vector<std::string> names_of(const LabelHierarchy& h, const std::vector<ConceptId>& ids) {
    std::vector<std::string> out;
    for (ConceptId o : ids) out.push_back(h.name(o));
    return out;
}

struct RevisionFlags {
    std::string hierarchy;
    std::string strategy = "sampling";
    std::uint64_t seed = 0;
    int q = 5;
    double threshold = 0.5;
    std::size_t max_card = 0;
    unsigned threads = 0;
    std::string families = "CDE";
    std::string grouping = "family";
    CLI::Option* seed_opt = nullptr;

    void add_to(CLI::App* app) {
        app->add_option("--hierarchy", hierarchy, "Hierarchy JSON file")->required();
        app->add_option("--strategy", strategy, "uniform, predictive, greedy or sampling")->capture_default_str();
        seed_opt = app->add_option("--seed", seed, "Global seed (default: LOGICDIAG_SEED, else 0)");
        app->add_option("--q", q, "Quantifier exponent")->capture_default_str();
        app->add_option("--threshold", threshold, "Binarization threshold")->capture_default_str();
        app->add_option("--max-card", max_card, "Diagnosis cardinality bound (0 = depth + 2)")->capture_default_str();
        app->add_option("--threads", threads, "Worker threads (0 = available parallelism)")->capture_default_str();
        app->add_option("--families", families, "Enabled rule families, subset of CDE")->capture_default_str();
        app->add_option("--grouping", grouping, "Conflict averaging: family or rule")->capture_default_str();
    }

    RevisionConfig config() const {
        RevisionConfig cfg;
        cfg.strategy = parse_strategy(strategy);
        cfg.seed = resolve_seed(seed_opt, seed, 0);
        cfg.fuzzy.q = q;
        cfg.fuzzy.grouping = parse_grouping(grouping);
        cfg.binarize_threshold = threshold;
        cfg.max_cardinality = max_card;
        cfg.threads = threads;
        cfg.families = parse_families(families);
        cfg.validate();
        return cfg;
    }
};

void print_stats(std::ostream& out, const RevisionStats& s) {
    out << "rows\t" << s.rows << "\n"
        << "consistent\t" << s.consistent << "\n"
        << "revised\t" << s.revised << "\n"
        << "bound_exceeded\t" << s.bound_exceeded << "\n"
        << "ignored\t" << s.ignored << "\n"
        << "uniform_fallbacks\t" << s.uniform_fallbacks << "\n";
    for (std::size_t k = 0; k < s.cardinality_histogram.size(); ++k) {
        if (s.cardinality_histogram[k]) out << "flips=" << k << "\t" << s.cardinality_histogram[k] << "\n";
    }
}

int cmd_validate(const std::string& path, bool as_json, std::ostream& out) {
    const auto h = load_hierarchy_file(path);
    if (as_json) {
        json concepts = json::array();
        for (const auto& n : h.nodes()) {
            const auto p = h.parent_or_none(n.id);
            concepts.push_back({{"id", n.id}, {"name", n.name}, {"level", h.level_of(n.id)},
                                {"parent", p ? json(*p) : json(nullptr)}});
        }
        out << json{{"nodes", h.size()}, {"levels", h.num_levels()}, {"concepts", concepts}}.dump(2) << "\n";
        return kOk;
    }
    out << "nodes\t" << h.size() << "\n";
    out << "levels\t" << h.num_levels() << "\n";
    out << "id\tname\tlevel\tparent_id\n";
    for (const auto& n : h.nodes()) {
        const auto p = h.parent_or_none(n.id);
        out << n.id << "\t" << n.name << "\t" << h.level_of(n.id) << "\t" << (p ? std::to_string(*p) : "-") << "\n";
    }
    return kOk;
}

int cmd_compile(const std::string& path, const std::string& families, bool as_json, std::ostream& out) {
    const auto h = load_hierarchy_file(path);
    const auto k = compile_rules(h, parse_families(families));
    if (as_json) {
        json rules = json::array();
        for (const auto& r : k.rules()) {
            rules.push_back({{"kind", std::string(to_string(r.kind))},
                             {"anchor", h.name(r.anchor)},
                             {"consequents", names_of(h, r.consequents)}});
        }
        out << json{{"rules", rules}}.dump(2) << "\n";
        return kOk;
    }
    for (const auto& r : k.rules()) {
        out << to_string(r.kind) << "\t" << h.name(r.anchor) << "\t" << join_names(h, r.consequents) << "\n";
    }
    return kOk;
}

int cmd_diagnose(const std::string& path, const std::string& assignment, std::size_t max_card,
                 const std::string& families, bool as_json, std::ostream& out) {
    const auto h = load_hierarchy_file(path);
    const auto k = compile_rules(h, parse_families(families));
    const auto a = Assignment::parse(h, assignment);
    const std::size_t bound = max_card ? max_card : default_max_cardinality(h);
    const auto outcome = enumerate_minimal_diagnoses(k, a, bound);

    const char* verdict = outcome.status == DiagnosisStatus::Consistent  ? "consistent"
                          : outcome.status == DiagnosisStatus::Diagnosed ? "inconsistent"
                                                                         : "inconsistent-bound-exceeded";
    if (as_json) {
        json ds = json::array();
        for (const auto& d : outcome.diagnoses) ds.push_back(names_of(h, d.flip_set));
        json violated = json::array();
        for (const auto& r : violated_rules(k, a)) {
            violated.push_back({{"kind", std::string(to_string(r.kind))}, {"anchor", h.name(r.anchor)}});
        }
        out << json{{"verdict", verdict}, {"max_cardinality", bound}, {"violated", violated}, {"diagnoses", ds}}.dump(2)
            << "\n";
        return kOk;
    }
    out << "verdict\t" << verdict;
    if (outcome.status == DiagnosisStatus::Diagnosed) out << "\t" << outcome.diagnoses.size() << " minimal diagnoses";
    if (outcome.status == DiagnosisStatus::BoundExceeded) out << "\tno diagnosis with at most " << bound << " flips";
    out << "\n";
    for (const auto& d : outcome.diagnoses) out << join_names(h, d.flip_set) << "\n";
    return kOk;
}

int cmd_revise(const RevisionFlags& flags, const std::string& probs_path, const std::string& labels_path,
               const std::string& stats_path, bool as_json, std::ostream& out) {
    const auto h = load_hierarchy_file(flags.hierarchy);
    const auto cfg = flags.config();
    const auto probs = read_probs(probs_path, h.size());
    const RevisionEngine engine(h, cfg);
    const auto result = engine.revise(probs.batch);
    if (!labels_path.empty()) write_labels(labels_path, result.leaf_labels, probs.leading_dims);
    if (!stats_path.empty()) write_stats(stats_path, result.stats, h);
    if (as_json) {
        out << stats_to_json(result.stats, h).dump(2) << "\n";
    } else {
        print_stats(out, result.stats);
    }
    return kOk;
}

int cmd_bench(const RevisionFlags& flags, const std::string& probs_path, std::size_t rows, int repeat, bool as_json,
              std::ostream& out) {
    const auto h = load_hierarchy_file(flags.hierarchy);
    const auto cfg = flags.config();
    ProbBatch batch;
    if (!probs_path.empty()) {
        batch = read_probs(probs_path, h.size()).batch;
    } else {
        std::vector<float> values(rows * h.size());
        RngStream rng(cfg.seed, 0);
        for (float& v : values) v = static_cast<float>(rng.uniform());
        batch = ProbBatch(rows, h.size(), std::span<const float>(values));
    }
    const RevisionEngine engine(h, cfg);
    double best = 0.0;
    for (int i = 0; i < repeat; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto result = engine.revise(batch);
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (i == 0 || s < best) best = s;
    }
    const unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    const double rate = best > 0 ? double(batch.rows()) / best : 0.0;
    if (as_json) {
        out << json{{"rows", batch.rows()}, {"concepts", h.size()}, {"threads", threads}, {"seconds", best},
                    {"rows_per_second", rate}}
                   .dump(2)
            << "\n";
    } else {
        out << "rows\t" << batch.rows() << "\n"
            << "concepts\t" << h.size() << "\n"
            << "threads\t" << threads << "\n"
            << "seconds\t" << best << "\n"
            << "rows_per_second\t" << static_cast<std::uint64_t>(rate) << "\n";
    }
    return kOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, const CLI::Option* seed_opt,
                 std::uint64_t seed, const CLI::Option* threads_opt, unsigned threads, bool as_json,
                 std::ostream& out) {
    auto cfg = config_path.empty() ? sim::SimConfig{} : sim::load_sim_config(config_path);
    cfg.seed = resolve_seed(seed_opt, seed, cfg.seed);
    if (threads_opt->count() > 0) cfg.threads = threads;
    cfg.validate();
    const auto report = sim::train(cfg);
    const auto h = sim::official_hierarchy(cfg);
    const auto j = sim::to_json(report, h);
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw DataError("cannot open " + out_path + " for writing");
        f << j.dump(2) << "\n";
    }
    if (as_json) {
        out << j.dump(2) << "\n";
        return kOk;
    }
    out << "iterations\t" << cfg.iterations << "\n";
    for (std::size_t l = 0; l < report.final.miou.size(); ++l) {
        out << "miou" << l + 1 << "\t" << report.initial.miou[l] << "\t->\t" << report.final.miou[l] << "\n";
    }
    out << "pseudo_precision\t" << report.pseudo.pre_precision() << "\t->\t" << report.pseudo.post_precision() << "\n";
    out << "ignored_rows\t" << report.ignored_rows << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchy-aware pseudo-label diagnosis and revision", "logicdiag"};
    app.set_version_flag("--version", LOGICDIAG_VERSION);
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "Machine-readable JSON output");

    std::string hierarchy_path;
    auto* validate = app.add_subcommand("validate-hierarchy", "Parse a hierarchy and print its id table");
    validate->add_option("--hierarchy", hierarchy_path, "Hierarchy JSON file")->required();
    validate->add_flag("--json", as_json, "Machine-readable JSON output");

    std::string families = "CDE";
    auto* compile = app.add_subcommand("compile-rules", "Print the ground rules of a hierarchy");
    compile->add_option("--hierarchy", hierarchy_path, "Hierarchy JSON file")->required();
    compile->add_option("--families", families, "Enabled rule families, subset of CDE")->capture_default_str();
    compile->add_flag("--json", as_json, "Machine-readable JSON output");

    std::string assignment;
    std::size_t max_card = 0;
    auto* diagnose = app.add_subcommand("diagnose", "Enumerate the minimal diagnoses of one assignment");
    diagnose->add_option("--hierarchy", hierarchy_path, "Hierarchy JSON file")->required();
    diagnose->add_option("--assignment", assignment, "Bitstring in id order, or comma-separated true concept names")
        ->required();
    diagnose->add_option("--max-card", max_card, "Cardinality bound (0 = depth + 2)")->capture_default_str();
    diagnose->add_option("--families", families, "Enabled rule families, subset of CDE")->capture_default_str();
    diagnose->add_flag("--json", as_json, "Machine-readable JSON output");

    RevisionFlags rflags;
    std::string probs_path, labels_path, stats_path;
    auto* revise = app.add_subcommand("revise", "Revise a batch of pseudo labels");
    rflags.add_to(revise);
    revise->add_option("--probs", probs_path, "Float32 LDT1 tensor, last axis = concepts")->required();
    revise->add_option("--out-labels", labels_path, "Int32 LDT1 tensor of leaf ids (-1 = ignore)");
    revise->add_option("--out-stats", stats_path, "Revision statistics as JSON");
    revise->add_flag("--json", as_json, "Machine-readable JSON output");

    RevisionFlags bflags;
    std::size_t bench_rows = 512 * 512;
    int repeat = 3;
    std::string bench_probs;
    auto* bench = app.add_subcommand("bench", "Measure revision throughput");
    bflags.add_to(bench);
    bench->add_option("--probs", bench_probs, "Float32 LDT1 tensor (default: uniform random rows)");
    bench->add_option("--rows", bench_rows, "Random rows when --probs is absent")->capture_default_str();
    bench->add_option("--repeat", repeat, "Timed repetitions; the fastest is reported")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bench->add_flag("--json", as_json, "Machine-readable JSON output");

    std::string config_path, report_path;
    std::uint64_t sim_seed = 0;
    unsigned sim_threads = 1;
    auto* simulate = app.add_subcommand("simulate", "Train the toy semi-supervised model");
    simulate->add_option("--config", config_path, "key=value config file (default: built-in defaults)");
    simulate->add_option("--out", report_path, "Write the training report as JSON");
    auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Overrides the config seed");
    auto* sim_threads_opt = simulate->add_option("--threads", sim_threads, "Revision worker threads");
    simulate->add_flag("--json", as_json, "Machine-readable JSON output");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(hierarchy_path, as_json, out);
        if (compile->parsed()) return cmd_compile(hierarchy_path, families, as_json, out);
        if (diagnose->parsed()) return cmd_diagnose(hierarchy_path, assignment, max_card, families, as_json, out);
        if (revise->parsed()) return cmd_revise(rflags, probs_path, labels_path, stats_path, as_json, out);
        if (bench->parsed()) return cmd_bench(bflags, bench_probs, bench_rows, repeat, as_json, out);
        if (simulate->parsed()) {
            return cmd_simulate(config_path, report_path, sim_seed_opt, sim_seed, sim_threads_opt, sim_threads,
                                as_json, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ContractViolation& e) {
        err << "internal error: " << e.what() << "\n";
        return kContractViolation;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kContractViolation;
    }
    err << app.help();
    return kUsage;
}

}  // namespace logicdiag::cli
