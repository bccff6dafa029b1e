#include "logicdiag/rules.hpp"

#include <algorithm>

#include "logicdiag/error.hpp"

namespace logicdiag {

std::string_view to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::Composition:
            return "Composition";
        case RuleKind::Decomposition:
            return "Decomposition";
        case RuleKind::Exclusion:
            return "Exclusion";
    }
    return "?";
}

bool RuleFamilies::contains(RuleKind kind) const {
    switch (kind) {
        case RuleKind::Composition:
            return composition;
        case RuleKind::Decomposition:
            return decomposition;
        case RuleKind::Exclusion:
            return exclusion;
    }
    return false;
}

Assignment Assignment::from_true_set(std::size_t num_concepts, std::span<const ConceptId> true_ids) {
    Assignment a(num_concepts);
    for (ConceptId o : true_ids) {
        if (o < 0 || static_cast<std::size_t>(o) >= num_concepts) {
            throw ValidationError("concept id " + std::to_string(o) + " out of range");
        }
        a.set(o, true);
    }
    return a;
}

Assignment Assignment::parse(const LabelHierarchy& h, std::string_view text) {
    const bool is_bits = text.size() == h.size() &&
                         std::all_of(text.begin(), text.end(), [](char c) { return c == '0' || c == '1'; });
    Assignment a(h.size());
    if (is_bits) {
        for (std::size_t i = 0; i < text.size(); ++i) {
            a.set(static_cast<ConceptId>(i), text[i] == '1');
        }
        return a;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(',', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto token = text.substr(start, end - start);
        while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
        if (!token.empty()) {
            a.set(h.id_of(token), true);
        }
        start = end + 1;
    }
    return a;
}

std::vector<ConceptId> Assignment::true_set() const {
    std::vector<ConceptId> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) {
            out.push_back(static_cast<ConceptId>(i));
        }
    }
    return out;
}

bool Assignment::empty() const {
    return std::none_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

std::string Assignment::to_bitstring() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) {
        s.push_back(b ? '1' : '0');
    }
    return s;
}

GroundRuleSet::GroundRuleSet(std::size_t num_concepts, std::vector<GroundRule> rules, RuleFamilies families)
    : num_concepts_(num_concepts), rules_(std::move(rules)), families_(families), by_anchor_(num_concepts) {
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& r = rules_[i];
        if (r.anchor < 0 || static_cast<std::size_t>(r.anchor) >= num_concepts_) {
            throw ContractViolation("rule anchor out of range");
        }
        by_anchor_[static_cast<std::size_t>(r.anchor)].push_back(i);
        by_kind_[static_cast<std::size_t>(r.kind)].push_back(i);
    }
}

std::size_t GroundRuleSet::count(RuleKind kind) const {
    return by_kind_[static_cast<std::size_t>(kind)].size();
}

GroundRuleSet compile_rules(const LabelHierarchy& h, RuleFamilies families) {
    std::vector<GroundRule> rules;
    auto emit = [&](RuleKind kind, ConceptId anchor, std::vector<ConceptId> consequents) {
        GroundRule r;
        r.kind = kind;
        r.anchor = anchor;
        r.support = consequents;
        r.support.push_back(anchor);
        std::sort(r.support.begin(), r.support.end());
        r.consequents = std::move(consequents);
        rules.push_back(std::move(r));
    };
    for (const auto& node : h.nodes()) {
        const ConceptId o = node.id;
        if (families.composition && !h.is_root(o)) {
            emit(RuleKind::Composition, o, {h.parent(o)});
        }
        if (families.decomposition && !h.is_leaf(o)) {
            emit(RuleKind::Decomposition, o, h.children_of(o));
        }
        if (families.exclusion) {
            auto sibs = h.siblings(o);
            if (!sibs.empty()) {
                emit(RuleKind::Exclusion, o, std::move(sibs));
            }
        }
    }
    return GroundRuleSet(h.size(), std::move(rules), families);
}

bool eval_rule(const GroundRule& rule, const Assignment& a) {
    if (!a[rule.anchor]) {
        return true;
    }
    switch (rule.kind) {
        case RuleKind::Composition:
            return a[rule.consequents.front()];
        case RuleKind::Decomposition:
            return std::any_of(rule.consequents.begin(), rule.consequents.end(), [&](ConceptId r) { return a[r]; });
        case RuleKind::Exclusion:
            return std::none_of(rule.consequents.begin(), rule.consequents.end(), [&](ConceptId s) { return a[s]; });
    }
    return true;
}

long first_violation(const GroundRuleSet& rules, const Assignment& a) {
    if (a.size() != rules.num_concepts()) {
        throw ValidationError("assignment has " + std::to_string(a.size()) + " concepts, rules expect " +
                              std::to_string(rules.num_concepts()));
    }
    const auto& all = rules.rules();
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (!eval_rule(all[i], a)) {
            return static_cast<long>(i);
        }
    }
    return -1;
}

bool is_consistent(const GroundRuleSet& rules, const Assignment& a) {
    return first_violation(rules, a) < 0;
}

std::vector<GroundRule> violated_rules(const GroundRuleSet& rules, const Assignment& a) {
    if (a.size() != rules.num_concepts()) {
        throw ValidationError("assignment size does not match rule set");
    }
    std::vector<GroundRule> out;
    for (const auto& r : rules.rules()) {
        if (!eval_rule(r, a)) {
            out.push_back(r);
        }
    }
    return out;
}

ConceptId path_leaf(const LabelHierarchy& h, const Assignment& a) {
    ConceptId found = -1;
    for (ConceptId leaf : h.leaf_ids()) {
        if (a[leaf]) {
            if (found >= 0) {
                return -1;
            }
            found = leaf;
        }
    }
    return found;
}

}  // namespace logicdiag
