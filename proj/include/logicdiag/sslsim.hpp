#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "logicdiag/error.hpp"

#include "logicdiag/diagnosis.hpp"
#include "logicdiag/hierarchy.hpp"
#include "logicdiag/pipeline.hpp"

namespace logicdiag::sim {

enum class HierarchySource { Official, Random };

struct SimConfig {
    // Synthetic task.
    int num_superclasses = 2;
    int leaves_per_superclass = 3;
    int dim = 8;
    std::size_t num_points = 20000;
    std::size_t num_test = 4000;
    double labeled_fraction = 0.01;
    double superclass_spread = 3.0;  // distance of superclass centres from the origin
    double leaf_spread = 2.5;        // distance of leaf centres from their superclass centre
    double point_noise = 1.0;        // std of points around their leaf centre

    // Training.
    double lambda = 5.0;
    double tau = 0.95;
    int q = 5;
    Strategy strategy = Strategy::Sampling;
    bool hierarchical_head = true;
    bool diagnosis = true;
    bool fuzzy_likelihood = true;
    RuleFamilies families;
    double weak_noise = 0.1;
    double strong_noise = 0.5;
    double learning_rate = 0.5;
    std::size_t iterations = 300;
    std::size_t warmup = 100;  // supervised-only iterations before the unlabeled term starts
    std::size_t rampup = 0;    // iterations over which lambda grows linearly after warmup
    std::size_t labeled_batch = 32;
    std::size_t unlabeled_batch = 256;
    double binarize_threshold = 0.5;
    std::size_t max_cardinality = 0;
    std::uint64_t seed = 0;
    HierarchySource hierarchy = HierarchySource::Official;
    unsigned threads = 1;

    void validate() const;
};

// Flat key=value text, one field per line; '#' starts a comment. Keys match
// the SimConfig field names.
SimConfig parse_sim_config(const std::string& text);
SimConfig load_sim_config(const std::string& path);
nlohmann::json to_json(const SimConfig& cfg);

// Root -> super{s} -> leaf{s}_{j}.
LabelHierarchy official_hierarchy(const SimConfig& cfg);
// Same node counts with the leaves dealt into different superclasses.
LabelHierarchy random_hierarchy(const LabelHierarchy& official, std::uint64_t seed);

struct SynthDataset {
    std::size_t dim = 0;
    std::vector<double> features{};          // N x dim, row-major
    std::vector<int> leaf_labels{};          // class index into hierarchy.leaf_ids()
    std::vector<std::uint8_t> labeled_mask{};
    LabelHierarchy hierarchy;
    std::vector<std::vector<double>> leaf_means{};  // generator parameters
    double point_noise = 1.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return leaf_labels.size(); }
    std::size_t num_labeled() const;
    const double* row(std::size_t i) const { return features.data() + i * dim; }
};

SynthDataset gen_synthetic(const SimConfig& cfg, std::uint64_t seed);
// Fresh points from the same clusters; nothing labeled.
SynthDataset sample_from(const SynthDataset& like, std::size_t n, std::uint64_t seed);

// Bias-augmented linear map with one sigmoid output per concept.
struct ToyModel {
    std::size_t dim = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // (dim + 1) x outputs, bias in the last row

    ToyModel() = default;
    ToyModel(std::size_t dim, std::size_t outputs) : dim(dim), outputs(outputs), weights((dim + 1) * outputs, 0.0) {}

    void logits(const double* x, double* out) const;
    std::vector<double> predict(const std::vector<double>& features) const;  // sigmoid outputs, N x outputs
};

// One optimisation step's worth of inputs. Targets are 0/1 per output; rows
// with unlabeled_mask == 0 are excluded from the unsupervised term; outputs
// with active == 0 are excluded from both terms.
struct LossBatch {
    std::vector<double> labeled_x;    // B_l x dim
    std::vector<double> labeled_t;    // B_l x outputs
    std::vector<double> unlabeled_x;  // B_u x dim (strong view)
    std::vector<double> unlabeled_t;  // B_u x outputs (revised pseudo labels)
    std::vector<std::uint8_t> unlabeled_mask;
    std::vector<std::uint8_t> active;
};

struct LossValue {
    double supervised = 0.0;
    double unsupervised = 0.0;
    double total = 0.0;
    std::vector<double> gradient;  // d total / d weights
};

// Mean binary cross entropy over (row, active output) pairs for each term;
// total = supervised + lambda * unsupervised.
LossValue losses(const ToyModel& model, const LossBatch& batch, double lambda);

struct Metrics {
    std::vector<double> leaf_iou;   // percent; NaN when the class is absent from truth and prediction
    std::vector<double> miou;       // miou[l - 1] = mIoU at level l, percent
    std::vector<double> accuracy;   // accuracy[l - 1], percent
    double miou1() const { return miou.empty() ? 0.0 : miou.front(); }
};

// Row-major C x C confusion counts (truth x prediction) over leaf classes.
using Confusion = std::vector<std::size_t>;

Confusion confusion_matrix(const std::vector<int>& truth, const std::vector<int>& pred, std::size_t classes);
// Merges leaf classes into their level-l ancestors.
Confusion project_confusion(const Confusion& leaf_conf, const LabelHierarchy& h, int level);
std::vector<double> class_iou(const Confusion& conf, std::size_t classes);
double mean_defined(const std::vector<double>& values);
double accuracy(const Confusion& conf, std::size_t classes);

// Leaf prediction is the argmax over leaf outputs; ancestor outputs are ignored.
std::vector<int> predict_leaf_classes(const ToyModel& model, const SynthDataset& data,
                                      const std::vector<ConceptId>& class_to_output);
Metrics evaluate(const ToyModel& model, const SynthDataset& data, const std::vector<ConceptId>& class_to_output);

// Pseudo-label quality over unlabeled rows, accumulated across training.
// "pre" is the binarized prediction, "post" the target trained on (revised
// assignment, or the thresholded path). Row-level precision counts a pseudo
// label as correct when it equals the true path; empty or ignored rows emit
// no pseudo label. Concept-level counts treat each output separately.
struct PseudoLabelTally {
    std::size_t pre_rows = 0;
    std::size_t pre_exact = 0;
    std::size_t post_rows = 0;
    std::size_t post_exact = 0;
    std::size_t truth_positives = 0;
    std::size_t pre_positives = 0;
    std::size_t pre_true_positives = 0;
    std::size_t post_positives = 0;
    std::size_t post_true_positives = 0;

    static double ratio(std::size_t a, std::size_t b) { return b ? double(a) / double(b) : 0.0; }
    double pre_precision() const { return ratio(pre_exact, pre_rows); }
    double post_precision() const { return ratio(post_exact, post_rows); }
    double pre_concept_precision() const { return ratio(pre_true_positives, pre_positives); }
    double post_concept_precision() const { return ratio(post_true_positives, post_positives); }
    double pre_concept_recall() const { return ratio(pre_true_positives, truth_positives); }
    double post_concept_recall() const { return ratio(post_true_positives, truth_positives); }
};

struct TrainReport {
    SimConfig config;
    std::vector<double> loss_supervised;
    std::vector<double> loss_unsupervised;
    std::vector<double> loss_total;
    Metrics initial;
    Metrics final;
    PseudoLabelTally pseudo;
    std::size_t revised_rows = 0;
    std::size_t ignored_rows = 0;
    ToyModel model;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

TrainReport train(const SimConfig& cfg);
nlohmann::json to_json(const TrainReport& report, const LabelHierarchy& h);

}  // namespace logicdiag::sim
