#include "logicdiag/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "logicdiag/error.hpp"

namespace logicdiag {

namespace {

void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(std::string(what) + " expects a truth value in [0,1], got " + std::to_string(v));
    }
}

void check_q(int q) {
    if (q < 1) {
        throw ValidationError("q must be >= 1, got " + std::to_string(q));
    }
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

double ipow(double base, int exp) {
    double result = 1.0;
    while (exp > 0) {
        if (exp & 1) result *= base;
        base *= base;
        exp >>= 1;
    }
    return result;
}

// Pairwise summation keeps the batch reduction accurate and independent of
// how terms would be grouped by a parallel reducer of the same shape.
double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 16) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// (mean t^q)^(1/q) over per-row terms t(x) in [0,1].
template <typename Term>
double power_mean(const ProbBatch& p, int q, Term term) {
    check_q(q);
    if (p.rows() == 0) {
        throw ValidationError("truth degrees need at least one datapoint");
    }
    std::vector<double> powered(p.rows());
    for (std::size_t x = 0; x < p.rows(); ++x) {
        powered[x] = ipow(term(x), q);
    }
    const double mean = pairwise_sum(powered) / static_cast<double>(p.rows());
    return std::pow(mean, 1.0 / q);
}

}  // namespace

ProbBatch::ProbBatch(std::size_t num_rows, std::size_t num_concepts, std::span<const double> values,
                     double clamp_epsilon)
    : rows_(num_rows), cols_(num_concepts), eps_(clamp_epsilon), values_(values.size()) {
    if (values.size() != num_rows * num_concepts) {
        throw ValidationError("probability buffer has " + std::to_string(values.size()) + " values, expected " +
                              std::to_string(num_rows) + " x " + std::to_string(num_concepts));
    }
    if (!(clamp_epsilon >= 0.0 && clamp_epsilon < 0.5)) {
        throw ValidationError("clamp epsilon must be in [0, 0.5)");
    }
    for (std::size_t i = 0; i < values.size(); ++i) ingest(i, values[i]);
}

ProbBatch::ProbBatch(std::size_t num_rows, std::size_t num_concepts, std::span<const float> values,
                     double clamp_epsilon)
    : rows_(num_rows), cols_(num_concepts), eps_(clamp_epsilon), values_(values.size()) {
    if (values.size() != num_rows * num_concepts) {
        throw ValidationError("probability buffer has " + std::to_string(values.size()) + " values, expected " +
                              std::to_string(num_rows) + " x " + std::to_string(num_concepts));
    }
    if (!(clamp_epsilon >= 0.0 && clamp_epsilon < 0.5)) {
        throw ValidationError("clamp epsilon must be in [0, 0.5)");
    }
    for (std::size_t i = 0; i < values.size(); ++i) ingest(i, static_cast<double>(values[i]));
}

void ProbBatch::ingest(std::size_t i, double v) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw ValidationError("probability at row " + std::to_string(i / std::max<std::size_t>(cols_, 1)) +
                              ", concept " + std::to_string(i % std::max<std::size_t>(cols_, 1)) +
                              " is not in [0,1]: " + std::to_string(v));
    }
    values_[i] = std::clamp(v, eps_, 1.0 - eps_);
}

void FuzzyConfig::validate() const { check_q(q); }

double t_norm(double a, double b) {
    check_unit(a, "t_norm");
    check_unit(b, "t_norm");
    return a * b;
}

double t_conorm(double a, double b) {
    check_unit(a, "t_conorm");
    check_unit(b, "t_conorm");
    return std::max(a, b);
}

double f_neg(double a) {
    check_unit(a, "f_neg");
    return 1.0 - a;
}

double exists_q(std::span<const double> phi, int q) {
    check_q(q);
    if (phi.empty()) {
        throw ValidationError("exists_q over an empty set");
    }
    std::vector<double> powered;
    powered.reserve(phi.size());
    for (double v : phi) {
        check_unit(v, "exists_q");
        powered.push_back(ipow(v, q));
    }
    return std::pow(pairwise_sum(powered) / static_cast<double>(phi.size()), 1.0 / q);
}

double forall_q(std::span<const double> phi, int q) {
    check_q(q);
    if (phi.empty()) {
        throw ValidationError("forall_q over an empty set");
    }
    std::vector<double> powered;
    powered.reserve(phi.size());
    for (double v : phi) {
        check_unit(v, "forall_q");
        powered.push_back(ipow(1.0 - v, q));
    }
    return 1.0 - std::pow(pairwise_sum(powered) / static_cast<double>(phi.size()), 1.0 / q);
}

double truth_composition(const ProbBatch& p, ConceptId o, const LabelHierarchy& h, int q) {
    const auto parent = h.parent_or_none(o);
    if (!parent) {
        return 1.0;
    }
    const double err = power_mean(p, q, [&](std::size_t x) {
        const double po = p(x, o);
        return clamp_unit(po - po * p(x, *parent));
    });
    return clamp_unit(1.0 - err);
}

double truth_decomposition(const ProbBatch& p, ConceptId o, const LabelHierarchy& h, int q) {
    const auto& kids = h.children_of(o);
    if (kids.empty()) {
        return 1.0;
    }
    const double err = power_mean(p, q, [&](std::size_t x) {
        double best = 0.0;
        for (ConceptId r : kids) best = std::max(best, p(x, r));
        const double po = p(x, o);
        return clamp_unit(po - po * best);
    });
    return clamp_unit(1.0 - err);
}

double truth_exclusion(const ProbBatch& p, ConceptId o, const LabelHierarchy& h, int q) {
    const auto sibs = h.siblings(o);
    if (sibs.empty()) {
        return 1.0;
    }
    double total = 0.0;
    for (ConceptId s : sibs) {
        total += power_mean(p, q, [&](std::size_t x) { return p(x, o) * p(x, s); });
    }
    return clamp_unit(1.0 - total / static_cast<double>(sibs.size()));
}

ConflictProfile conflict_profile(const ProbBatch& p, const LabelHierarchy& h, const GroundRuleSet& k,
                                 const FuzzyConfig& cfg) {
    cfg.validate();
    if (p.cols() != h.size() || k.num_concepts() != h.size()) {
        throw ValidationError("probability batch has " + std::to_string(p.cols()) + " concepts, hierarchy has " +
                              std::to_string(h.size()));
    }
    const auto& fam = k.families();

    ConflictProfile prof;
    prof.c.assign(h.size(), 0.0);
    prof.g.assign(h.size(), {1.0, 1.0, 1.0});
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto o = static_cast<ConceptId>(i);
        auto& g = prof.g[i];
        if (fam.composition) g[0] = truth_composition(p, o, h, cfg.q);
        if (fam.decomposition) g[1] = truth_decomposition(p, o, h, cfg.q);
        if (fam.exclusion) g[2] = truth_exclusion(p, o, h, cfg.q);

        double sum = 0.0;
        int count = 0;
        if (cfg.grouping == ConflictGrouping::PerFamily) {
            for (int kind = 0; kind < kNumRuleKinds; ++kind) {
                if (fam.contains(static_cast<RuleKind>(kind))) {
                    sum += g[static_cast<std::size_t>(kind)];
                    ++count;
                }
            }
        } else {
            for (std::size_t idx : k.anchored_at(o)) {
                sum += g[static_cast<std::size_t>(k.rules()[idx].kind)];
                ++count;
            }
        }
        prof.c[i] = count == 0 ? 0.0 : clamp_unit(1.0 - sum / count);
    }
    return prof;
}

double normality(double p_ox, double c_o, bool predicted_true) {
    check_unit(p_ox, "normality");
    check_unit(c_o, "normality");
    return (predicted_true ? p_ox : 1.0 - p_ox) * (1.0 - c_o);
}

std::vector<double> normality_vector(std::span<const double> row_probs, const Assignment& a,
                                     std::span<const double> conflict) {
    if (row_probs.size() != a.size() || conflict.size() != a.size()) {
        throw ValidationError("normality inputs disagree in length");
    }
    std::vector<double> n(a.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        n[i] = normality(row_probs[i], conflict[i], a[static_cast<ConceptId>(i)]);
    }
    return n;
}

double diagnosis_likelihood(const Diagnosis& d, std::span<const double> normality) {
    double like = 1.0;
    auto flip = d.flip_set.begin();
    for (std::size_t i = 0; i < normality.size(); ++i) {
        const double n = normality[i];
        check_unit(n, "diagnosis_likelihood");
        if (flip != d.flip_set.end() && static_cast<std::size_t>(*flip) == i) {
            like *= 1.0 - n;
            ++flip;
        } else {
            like *= n;
        }
    }
    if (flip != d.flip_set.end()) {
        throw ValidationError("diagnosis flips a concept outside the normality vector");
    }
    return like;
}

}  // namespace logicdiag
