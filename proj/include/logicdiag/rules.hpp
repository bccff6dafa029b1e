#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "logicdiag/hierarchy.hpp"

namespace logicdiag {

enum class RuleKind : std::uint8_t { Composition = 0, Decomposition = 1, Exclusion = 2 };

inline constexpr int kNumRuleKinds = 3;

std::string_view to_string(RuleKind kind);

// Bit mask over RuleKind, used to ablate rule families.
struct RuleFamilies {
    bool composition = true;
    bool decomposition = true;
    bool exclusion = true;

    bool contains(RuleKind kind) const;
    static RuleFamilies all() { return {}; }
};

// One propositional instance of a rule family, grounded at an anchor concept.
//   Composition:   anchor -> parent
//   Decomposition: anchor -> OR(children)
//   Exclusion:     anchor -> AND(NOT sibling)
struct GroundRule {
    RuleKind kind = RuleKind::Composition;
    ConceptId anchor = 0;
    std::vector<ConceptId> consequents;
    std::vector<ConceptId> support;  // sorted {anchor} U consequents

    bool operator==(const GroundRule&) const = default;
};

// Truth value per concept for one datapoint.
class Assignment {
public:
    Assignment() = default;
    explicit Assignment(std::size_t num_concepts) : bits_(num_concepts, 0) {}
    explicit Assignment(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

    static Assignment from_true_set(std::size_t num_concepts, std::span<const ConceptId> true_ids);
    // Accepts either a 0/1 string of length |O| or a comma-separated name list.
    static Assignment parse(const LabelHierarchy& h, std::string_view text);

    std::size_t size() const { return bits_.size(); }
    bool operator[](ConceptId o) const { return bits_[static_cast<std::size_t>(o)] != 0; }
    void set(ConceptId o, bool value) { bits_[static_cast<std::size_t>(o)] = value ? 1 : 0; }
    void flip(ConceptId o) { bits_[static_cast<std::size_t>(o)] ^= 1; }

    std::vector<ConceptId> true_set() const;
    bool empty() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }
    std::string to_bitstring() const;

    bool operator==(const Assignment&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

class GroundRuleSet {
public:
    GroundRuleSet(std::size_t num_concepts, std::vector<GroundRule> rules,
                  RuleFamilies families = RuleFamilies::all());

    std::size_t num_concepts() const { return num_concepts_; }
    const std::vector<GroundRule>& rules() const { return rules_; }
    std::size_t size() const { return rules_.size(); }
    std::size_t count(RuleKind kind) const;
    // Families this set was compiled with; an enabled family may still have
    // zero instances on a given hierarchy.
    const RuleFamilies& families() const { return families_; }

    // Indices into rules() of the rules anchored at o (at most one per kind).
    const std::vector<std::size_t>& anchored_at(ConceptId o) const {
        return by_anchor_.at(static_cast<std::size_t>(o));
    }
    // Indices into rules() of all rules of one family.
    const std::vector<std::size_t>& of_kind(RuleKind kind) const {
        return by_kind_[static_cast<std::size_t>(kind)];
    }

private:
    std::size_t num_concepts_;
    std::vector<GroundRule> rules_;
    RuleFamilies families_;
    std::vector<std::vector<std::size_t>> by_anchor_;
    std::vector<std::size_t> by_kind_[kNumRuleKinds];
};

// Rules are emitted concept by concept in id order, Composition, then
// Decomposition, then Exclusion for each anchor.
GroundRuleSet compile_rules(const LabelHierarchy& h, RuleFamilies families = RuleFamilies::all());

bool eval_rule(const GroundRule& rule, const Assignment& a);
bool is_consistent(const GroundRuleSet& rules, const Assignment& a);
std::vector<GroundRule> violated_rules(const GroundRuleSet& rules, const Assignment& a);
// Index of the first violated rule, or -1.
long first_violation(const GroundRuleSet& rules, const Assignment& a);

// The single true leaf of an assignment, or -1 when no leaf or more than one
// leaf is true. Under the full rule set a consistent non-empty assignment is
// exactly one root-to-leaf path, so this is the path's leaf.
ConceptId path_leaf(const LabelHierarchy& h, const Assignment& a);

}  // namespace logicdiag
