#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace logicdiag {

using ConceptId = int;

struct ConceptNode {
    std::string name;
    ConceptId id = 0;
};

// A uniform-depth tree of semantic concepts. Concept ids are assigned in
// depth-first document order (parents before children), so id 0 is always the
// root and tensor channel order is reproducible across tools.
//
// Leaves sit at level 1 and the root at level num_levels(). Instances are
// immutable once built.
class LabelHierarchy {
public:
    // Builds from a parent table in which parents precede children
    // (parent_of[0] must be nullopt). Validates every tree invariant.
    static LabelHierarchy from_parents(std::vector<std::string> names,
                                       std::vector<std::optional<ConceptId>> parent_of);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<ConceptNode>& nodes() const { return nodes_; }
    const std::string& name(ConceptId o) const { return nodes_.at(static_cast<std::size_t>(o)).name; }
    std::optional<ConceptId> find(std::string_view name) const;
    ConceptId id_of(std::string_view name) const;  // throws ValidationError if unknown

    ConceptId root() const { return 0; }
    bool is_root(ConceptId o) const { return o == 0; }
    bool is_leaf(ConceptId o) const { return children_of(o).empty(); }

    // Throws ContractViolation for the root.
    ConceptId parent(ConceptId o) const;
    std::optional<ConceptId> parent_or_none(ConceptId o) const { return parent_of_.at(static_cast<std::size_t>(o)); }
    const std::vector<ConceptId>& children_of(ConceptId o) const { return children_of_.at(static_cast<std::size_t>(o)); }
    std::vector<ConceptId> siblings(ConceptId o) const;

    int level_of(ConceptId o) const { return level_of_.at(static_cast<std::size_t>(o)); }
    int num_levels() const { return num_levels_; }
    std::vector<ConceptId> concepts_at_level(int level) const;

    // Leaves in id order; position in this list is the leaf class index.
    const std::vector<ConceptId>& leaf_ids() const { return leaf_ids_; }
    std::size_t num_leaves() const { return leaf_ids_.size(); }
    // Index of a leaf concept within leaf_ids(), or -1 if o is not a leaf.
    int leaf_index(ConceptId o) const { return leaf_index_.at(static_cast<std::size_t>(o)); }

    // Ancestor of o at the given level (o itself when level == level_of(o)).
    ConceptId ancestor_at_level(ConceptId o, int level) const;
    // Root-to-leaf path ending at the given leaf, in root-first order.
    std::vector<ConceptId> path_to(ConceptId leaf) const;

    bool operator==(const LabelHierarchy& other) const;

private:
    LabelHierarchy() = default;

    std::vector<ConceptNode> nodes_;
    std::vector<std::optional<ConceptId>> parent_of_;
    std::vector<std::vector<ConceptId>> children_of_;
    std::vector<int> level_of_;
    std::vector<ConceptId> leaf_ids_;
    std::vector<int> leaf_index_;
    int num_levels_ = 0;
};

// Parses the nested-object hierarchy format. A top-level array with more than
// one node gets a virtual root named "Root".
LabelHierarchy parse_hierarchy(std::string_view text);
LabelHierarchy load_hierarchy_file(const std::string& path);

// Canonical text form: a single pretty-printed root object.
std::string serialize_hierarchy(const LabelHierarchy& h);

// Same shape as h (number of internal nodes per parent and leaves per parent)
// but with the leaves dealt into leaf slots in a random order.
LabelHierarchy shuffle_leaf_grouping(const LabelHierarchy& h, std::mt19937_64& rng);

}  // namespace logicdiag
