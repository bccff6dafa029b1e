#include "logicdiag/diagnosis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "logicdiag/error.hpp"

namespace logicdiag {

namespace {

using FlipSet = std::vector<ConceptId>;

bool is_subset(const FlipSet& small, const FlipSet& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

bool contains_any(const std::vector<FlipSet>& found, const FlipSet& f) {
    return std::any_of(found.begin(), found.end(), [&](const FlipSet& d) { return is_subset(d, f); });
}

// Violated rule with the fewest unflipped support members; nullptr if none.
const GroundRule* pick_violation(const GroundRuleSet& rules, const Assignment& flipped, const FlipSet& f,
                                 std::size_t& open_count) {
    const GroundRule* best = nullptr;
    std::size_t best_open = 0;
    for (const auto& r : rules.rules()) {
        if (eval_rule(r, flipped)) {
            continue;
        }
        std::size_t open = 0;
        for (ConceptId o : r.support) {
            if (!std::binary_search(f.begin(), f.end(), o)) {
                ++open;
            }
        }
        if (best == nullptr || open < best_open) {
            best = &r;
            best_open = open;
            if (open == 0) {
                break;
            }
        }
    }
    open_count = best_open;
    return best;
}

}  // namespace

std::vector<ConceptId> Diagnosis::normal_set(std::size_t num_concepts) const {
    std::vector<ConceptId> out;
    for (std::size_t i = 0; i < num_concepts; ++i) {
        if (!flips(static_cast<ConceptId>(i))) {
            out.push_back(static_cast<ConceptId>(i));
        }
    }
    return out;
}

bool Diagnosis::flips(ConceptId o) const {
    return std::binary_search(flip_set.begin(), flip_set.end(), o);
}

Assignment apply_flips(const Assignment& a, std::span<const ConceptId> flip_set) {
    Assignment out = a;
    for (ConceptId o : flip_set) {
        if (o < 0 || static_cast<std::size_t>(o) >= a.size()) {
            throw ContractViolation("flip index " + std::to_string(o) + " out of range");
        }
        out.flip(o);
    }
    return out;
}

DiagnosisOutcome enumerate_minimal_diagnoses(const GroundRuleSet& rules, const Assignment& a,
                                             std::size_t max_cardinality) {
    DiagnosisOutcome outcome;
    if (is_consistent(rules, a)) {
        return outcome;
    }

    std::vector<FlipSet> found;
    std::set<FlipSet> frontier{FlipSet{}};
    for (std::size_t depth = 0; !frontier.empty(); ++depth) {
        std::set<FlipSet> next;
        for (const auto& f : frontier) {
            if (contains_any(found, f)) {
                continue;
            }
            const Assignment flipped = apply_flips(a, f);
            std::size_t open = 0;
            const GroundRule* violated = pick_violation(rules, flipped, f, open);
            if (violated == nullptr) {
                found.push_back(f);
                continue;
            }
            if (open == 0) {
                continue;  // no extension of f can repair this rule
            }
            if (depth >= max_cardinality) {
                continue;
            }
            for (ConceptId o : violated->support) {
                if (std::binary_search(f.begin(), f.end(), o)) {
                    continue;
                }
                FlipSet child = f;
                child.insert(std::upper_bound(child.begin(), child.end(), o), o);
                next.insert(std::move(child));
            }
        }
        frontier = std::move(next);
    }

    // Each level is visited in lexicographic order, so `found` is already
    // sorted by (cardinality, ids).
    for (auto& f : found) {
        outcome.diagnoses.push_back(Diagnosis{std::move(f), -1.0});
    }
    if (outcome.diagnoses.empty()) {
        outcome.status = DiagnosisStatus::BoundExceeded;
    } else {
        outcome.status = DiagnosisStatus::Diagnosed;
    }
    return outcome;
}

std::vector<Diagnosis> brute_force_diagnoses(const GroundRuleSet& rules, const Assignment& a) {
    const std::size_t n = a.size();
    if (n > kBruteForceLimit) {
        throw ValidationError("brute-force diagnosis is limited to " + std::to_string(kBruteForceLimit) +
                              " concepts, got " + std::to_string(n));
    }
    if (is_consistent(rules, a)) {
        return {};
    }
    std::vector<FlipSet> repairing;
    const std::uint32_t total = 1u << n;
    for (std::uint32_t mask = 1; mask < total; ++mask) {
        Assignment flipped = a;
        FlipSet f;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                flipped.flip(static_cast<ConceptId>(i));
                f.push_back(static_cast<ConceptId>(i));
            }
        }
        if (is_consistent(rules, flipped)) {
            repairing.push_back(std::move(f));
        }
    }
    std::sort(repairing.begin(), repairing.end(), [](const FlipSet& x, const FlipSet& y) {
        return x.size() != y.size() ? x.size() < y.size() : x < y;
    });
    std::vector<Diagnosis> out;
    for (const auto& f : repairing) {
        const bool minimal = std::none_of(repairing.begin(), repairing.end(), [&](const FlipSet& g) {
            return g.size() < f.size() && is_subset(g, f);
        });
        if (minimal) {
            out.push_back(Diagnosis{f, -1.0});
        }
    }
    return out;
}

Assignment resolve(const GroundRuleSet& rules, const Assignment& a, const Diagnosis& d) {
    Assignment out = apply_flips(a, d.flip_set);
    if (!is_consistent(rules, out)) {
        throw ContractViolation("flip set is not a diagnosis: the revised assignment " + out.to_bitstring() +
                                " is still inconsistent");
    }
    return out;
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Uniform:
            return "uniform";
        case Strategy::Predictive:
            return "predictive";
        case Strategy::Greedy:
            return "greedy";
        case Strategy::Sampling:
            return "sampling";
    }
    return "?";
}

Strategy parse_strategy(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "uniform") return Strategy::Uniform;
    if (lower == "predictive") return Strategy::Predictive;
    if (lower == "greedy") return Strategy::Greedy;
    if (lower == "sampling") return Strategy::Sampling;
    throw ValidationError("unknown resolution strategy \"" + std::string(text) +
                          "\" (expected uniform, predictive, greedy or sampling)");
}

Selection select_diagnosis(std::span<const Diagnosis> ds, Strategy strategy, RngStream& rng) {
    if (ds.empty()) {
        throw ContractViolation("cannot select from an empty diagnosis list");
    }
    std::vector<double> weights;
    weights.reserve(ds.size());
    for (const auto& d : ds) {
        if (strategy != Strategy::Uniform && !(d.likelihood >= 0.0)) {
            throw ContractViolation("diagnosis likelihoods must be scored before " + to_string(strategy) +
                                    " selection");
        }
        weights.push_back(d.likelihood);
    }
    return select_by_weight(weights, strategy, rng);
}

Selection select_by_weight(std::span<const double> weights, Strategy strategy, RngStream& rng) {
    if (weights.empty()) {
        throw ContractViolation("cannot select from an empty diagnosis list");
    }
    Selection sel;
    if (weights.size() == 1) {
        return sel;
    }
    if (strategy == Strategy::Uniform) {
        sel.index = static_cast<std::size_t>(rng.below(weights.size()));
        return sel;
    }

    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ContractViolation("diagnosis weights must be finite and non-negative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        sel.uniform_fallback = true;
        sel.index = static_cast<std::size_t>(rng.below(weights.size()));
        return sel;
    }

    if (strategy == Strategy::Greedy) {
        for (std::size_t i = 1; i < weights.size(); ++i) {
            if (weights[i] > weights[sel.index]) {
                sel.index = i;
            }
        }
        return sel;
    }

    const double target = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (target < acc) {
            sel.index = i;
            return sel;
        }
    }
    // Rounding left target at the very top; take the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) {
            sel.index = i;
            break;
        }
    }
    return sel;
}

}  // namespace logicdiag
