#pragma once

#include <array>
#include <span>
#include <vector>

#include "logicdiag/diagnosis.hpp"
#include "logicdiag/hierarchy.hpp"
#include "logicdiag/rules.hpp"

namespace logicdiag {

inline constexpr double kDefaultClampEpsilon = 1e-7;

// Row-major (num_rows x num_concepts) matrix of predictive probabilities
// P(o|x), clamped to [eps, 1 - eps] on ingestion.
class ProbBatch {
public:
    ProbBatch() = default;
    ProbBatch(std::size_t num_rows, std::size_t num_concepts, std::span<const double> values,
              double clamp_epsilon = kDefaultClampEpsilon);
    ProbBatch(std::size_t num_rows, std::size_t num_concepts, std::span<const float> values,
              double clamp_epsilon = kDefaultClampEpsilon);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double clamp_epsilon() const { return eps_; }

    double operator()(std::size_t row, ConceptId o) const { return values_[row * cols_ + static_cast<std::size_t>(o)]; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
    const std::vector<double>& values() const { return values_; }

private:
    void ingest(std::size_t i, double v);

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    double eps_ = kDefaultClampEpsilon;
    std::vector<double> values_;
};

enum class ConflictGrouping {
    PerFamily,     // average over every enabled rule family; vacuous families count as 1
    PerGroundRule  // average over the ground rules actually anchored at the concept
};

struct FuzzyConfig {
    int q = 5;
    ConflictGrouping grouping = ConflictGrouping::PerFamily;

    void validate() const;
};

// Connectives: product t-norm, max t-conorm, standard negation.
double t_norm(double a, double b);
double t_conorm(double a, double b);
double f_neg(double a);

// Generalized-mean quantifiers over truth values in [0, 1].
//   exists_q = (mean phi^q)^(1/q)
//   forall_q = 1 - (mean (1 - phi)^q)^(1/q)
double exists_q(std::span<const double> phi, int q);
double forall_q(std::span<const double> phi, int q);

// Batch truth degrees of the rule families anchored at o. Vacuous instances
// (root for Composition, leaves for Decomposition, no siblings for Exclusion)
// are 1.
double truth_composition(const ProbBatch& p, ConceptId o, const LabelHierarchy& h, int q);
double truth_decomposition(const ProbBatch& p, ConceptId o, const LabelHierarchy& h, int q);
// One-vs-one form: averages the pairwise exclusion truth over siblings.
double truth_exclusion(const ProbBatch& p, ConceptId o, const LabelHierarchy& h, int q);

struct ConflictProfile {
    std::vector<double> c;                      // conflict degree per concept
    std::vector<std::array<double, 3>> g;       // truth degree per concept per RuleKind
};

ConflictProfile conflict_profile(const ProbBatch& p, const LabelHierarchy& h, const GroundRuleSet& k,
                                 const FuzzyConfig& cfg);

// Probability that output o is normal given its confidence and conflict.
double normality(double p_ox, double c_o, bool predicted_true);

// Normality for every concept of one row. Pass an all-zero conflict vector to
// score on predictive probability alone.
std::vector<double> normality_vector(std::span<const double> row_probs, const Assignment& a,
                                     std::span<const double> conflict);

// Independent-failure likelihood: product of n_o over normal outputs times
// product of (1 - n_o) over flipped outputs.
double diagnosis_likelihood(const Diagnosis& d, std::span<const double> normality);

}  // namespace logicdiag
