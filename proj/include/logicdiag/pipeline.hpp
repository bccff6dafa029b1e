#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "logicdiag/diagnosis.hpp"
#include "logicdiag/fuzzy.hpp"
#include "logicdiag/hierarchy.hpp"
#include "logicdiag/rules.hpp"

namespace logicdiag {

struct RevisionConfig {
    double binarize_threshold = 0.5;  // p >= threshold binarizes to true
    Strategy strategy = Strategy::Sampling;
    FuzzyConfig fuzzy;
    RuleFamilies families;
    std::size_t max_cardinality = 0;  // 0 selects hierarchy depth + 2
    std::uint64_t seed = 0;
    double tau = 0.95;  // confidence-threshold baseline only
    unsigned threads = 1;  // 0 selects the hardware concurrency

    void validate() const;
};

struct RevisionStats {
    std::size_t rows = 0;
    // consistent + revised + bound_exceeded == rows.
    std::size_t consistent = 0;
    std::size_t revised = 0;
    std::size_t bound_exceeded = 0;
    // Rows whose leaf label is -1 (empty assignments and bound-exceeded rows).
    std::size_t ignored = 0;
    std::size_t uniform_fallbacks = 0;
    // cardinality_histogram[k] counts revised rows whose chosen diagnosis flips k outputs.
    std::vector<std::size_t> cardinality_histogram;
    ConflictProfile conflict;

    bool operator==(const RevisionStats& other) const;
};

struct RevisionResult {
    std::size_t rows = 0;
    std::size_t num_concepts = 0;
    std::vector<std::uint8_t> revised;        // rows x num_concepts, row-major
    std::vector<std::int32_t> leaf_labels;    // leaf concept id, or -1 to ignore
    RevisionStats stats;

    Assignment revised_row(std::size_t r) const;
};

// Batch revision: binarize, score conflicts once per batch, then diagnose and
// resolve each inconsistent row independently. Row r draws from
// RngStream(seed, r), so results do not depend on the thread count.
//
// The engine is immutable; concurrent revise() calls are safe.
class RevisionEngine {
public:
    RevisionEngine(LabelHierarchy hierarchy, RevisionConfig config);

    const LabelHierarchy& hierarchy() const { return hierarchy_; }
    const GroundRuleSet& rules() const { return rules_; }
    const RevisionConfig& config() const { return config_; }
    std::size_t max_cardinality() const { return max_cardinality_; }

    RevisionResult revise(const ProbBatch& probs) const;
    // Override of the config seed and thread count for one call.
    RevisionResult revise(const ProbBatch& probs, std::uint64_t seed, unsigned threads) const;

private:
    LabelHierarchy hierarchy_;
    RevisionConfig config_;
    GroundRuleSet rules_;
    std::size_t max_cardinality_;
};

RevisionResult revise_batch(const ProbBatch& probs, const LabelHierarchy& h, const RevisionConfig& cfg);

// Confidence thresholding: argmax column if its probability reaches tau,
// else -1. Rows must lie on the probability simplex (sum to 1 within 1e-6).
std::vector<std::int32_t> confidence_threshold_baseline(std::span<const double> probs, std::size_t rows,
                                                        std::size_t classes, double tau);

struct LoadedProbs {
    ProbBatch batch;
    std::vector<std::uint64_t> leading_dims;  // every dim but the concept axis
};

// Reads a float32 LDT1 tensor whose last axis is the concept axis.
LoadedProbs read_probs(const std::string& path, std::size_t num_concepts);
void write_labels(const std::string& path, const std::vector<std::int32_t>& labels,
                  const std::vector<std::uint64_t>& leading_dims);

nlohmann::json stats_to_json(const RevisionStats& stats, const LabelHierarchy& h);
void write_stats(const std::string& path, const RevisionStats& stats, const LabelHierarchy& h);

}  // namespace logicdiag
