#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "logicdiag/rng.hpp"
#include "logicdiag/rules.hpp"

namespace logicdiag {

// A set of outputs assumed faulty. Applying it negates each flipped output.
struct Diagnosis {
    std::vector<ConceptId> flip_set;  // sorted ascending
    double likelihood = -1.0;         // -1 until scored

    std::size_t cardinality() const { return flip_set.size(); }
    std::vector<ConceptId> normal_set(std::size_t num_concepts) const;
    bool flips(ConceptId o) const;

    bool operator==(const Diagnosis& other) const { return flip_set == other.flip_set; }
};

enum class DiagnosisStatus {
    Consistent,     // nothing to repair
    Diagnosed,      // at least one minimal diagnosis within the bound
    BoundExceeded,  // inconsistent, but no diagnosis within max_cardinality
};

struct DiagnosisOutcome {
    DiagnosisStatus status = DiagnosisStatus::Consistent;
    std::vector<Diagnosis> diagnoses;  // ascending cardinality, then lexicographic
};

// Default cardinality bound: hierarchy depth plus two.
inline std::size_t default_max_cardinality(const LabelHierarchy& h) {
    return static_cast<std::size_t>(h.num_levels()) + 2;
}

// All subset-minimal flip sets of size <= max_cardinality whose application
// makes `a` consistent with `rules`.
//
// Breadth-first hitting-set search: a node is a partial flip set F; if a xor F
// is consistent, F is recorded; otherwise the node branches on the unflipped
// members of one violated rule's support. Any diagnosis extending F must flip
// at least one of them, since a rule's truth depends only on its support.
// Nodes containing an already-found diagnosis are closed, which makes every
// recorded set subset-minimal.
DiagnosisOutcome enumerate_minimal_diagnoses(const GroundRuleSet& rules, const Assignment& a,
                                             std::size_t max_cardinality);

// Exhaustive reference: tries all 2^|O| flip sets. Throws ValidationError
// when |O| exceeds kBruteForceLimit.
inline constexpr std::size_t kBruteForceLimit = 20;
std::vector<Diagnosis> brute_force_diagnoses(const GroundRuleSet& rules, const Assignment& a);

// Flips every member of d.flip_set. Throws ContractViolation if the result is
// inconsistent.
Assignment resolve(const GroundRuleSet& rules, const Assignment& a, const Diagnosis& d);
// Flip without the consistency check.
Assignment apply_flips(const Assignment& a, std::span<const ConceptId> flip_set);

enum class Strategy { Uniform, Predictive, Greedy, Sampling };

std::string to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

struct Selection {
    std::size_t index = 0;
    bool uniform_fallback = false;  // weights were all zero
};

// Uniform ignores likelihoods. Predictive and Sampling draw proportionally to
// the stored likelihoods (the caller fills them with the matching scores).
// Greedy takes the argmax, ties to the earliest entry.
Selection select_diagnosis(std::span<const Diagnosis> ds, Strategy strategy, RngStream& rng);
// Same selection over a bare weight vector (one entry per diagnosis).
Selection select_by_weight(std::span<const double> weights, Strategy strategy, RngStream& rng);

}  // namespace logicdiag
