#include "logicdiag/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "logicdiag/error.hpp"

namespace logicdiag {

namespace {

using nlohmann::json;

struct FlatNode {
    std::string name;
    std::optional<ConceptId> parent;
};

void flatten(const json& node, std::optional<ConceptId> parent, const std::string& where,
             std::vector<FlatNode>& out) {
    if (!node.is_object()) {
        throw ParseError("hierarchy node at " + where + " is not an object");
    }
    auto name_it = node.find("name");
    if (name_it == node.end() || !name_it->is_string()) {
        throw ParseError("hierarchy node at " + where + " has no string \"name\"");
    }
    std::string name = name_it->get<std::string>();
    if (name.empty()) {
        throw ParseError("hierarchy node at " + where + " has an empty name");
    }
    for (const auto& [key, _] : node.items()) {
        if (key != "name" && key != "children") {
            throw ParseError("hierarchy node \"" + name + "\" at " + where + " has unknown key \"" + key + "\"");
        }
    }
    const auto id = static_cast<ConceptId>(out.size());
    out.push_back({name, parent});

    auto children_it = node.find("children");
    if (children_it == node.end()) {
        return;
    }
    if (!children_it->is_array()) {
        throw ParseError("\"children\" of node \"" + name + "\" at " + where + " is not an array");
    }
    if (children_it->empty()) {
        throw ParseError("node \"" + name + "\" at " + where +
                         " has an empty \"children\" array; leaves must omit the key");
    }
    for (std::size_t i = 0; i < children_it->size(); ++i) {
        flatten((*children_it)[i], id, where + "/children/" + std::to_string(i), out);
    }
}

json to_json(const LabelHierarchy& h, ConceptId o) {
    json node = json::object();
    node["name"] = h.name(o);
    if (!h.is_leaf(o)) {
        json children = json::array();
        for (ConceptId c : h.children_of(o)) {
            children.push_back(to_json(h, c));
        }
        node["children"] = std::move(children);
    }
    return node;
}

}  // namespace

LabelHierarchy LabelHierarchy::from_parents(std::vector<std::string> names,
                                            std::vector<std::optional<ConceptId>> parent_of) {
    if (names.empty()) {
        throw ValidationError("hierarchy is empty");
    }
    if (names.size() != parent_of.size()) {
        throw ValidationError("hierarchy name/parent tables differ in length");
    }
    const std::size_t n = names.size();
    if (parent_of[0].has_value()) {
        throw ValidationError("first node \"" + names[0] + "\" must be the root");
    }

    LabelHierarchy h;
    h.nodes_.reserve(n);
    h.children_of_.assign(n, {});
    h.parent_of_ = std::move(parent_of);

    std::unordered_set<std::string> seen;
    // Ancestor chain of the previous node; a valid preorder attaches each node
    // to some member of this chain.
    std::vector<ConceptId> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (names[i].empty()) {
            throw ValidationError("node " + std::to_string(i) + " has an empty name");
        }
        if (!seen.insert(names[i]).second) {
            throw ValidationError("duplicate concept name \"" + names[i] + "\"");
        }
        const auto id = static_cast<ConceptId>(i);
        if (i > 0) {
            const auto& p = h.parent_of_[i];
            if (!p.has_value()) {
                throw ValidationError("node \"" + names[i] + "\" has no parent; only one root is allowed");
            }
            while (!stack.empty() && stack.back() != *p) {
                stack.pop_back();
            }
            if (stack.empty()) {
                throw ValidationError("node \"" + names[i] + "\" is not in depth-first order under its parent");
            }
            h.children_of_[static_cast<std::size_t>(*p)].push_back(id);
        }
        stack.push_back(id);
        h.nodes_.push_back({std::move(names[i]), id});
    }

    // Levels bottom-up; preorder guarantees children have larger ids.
    h.level_of_.assign(n, 0);
    for (std::size_t i = n; i-- > 0;) {
        const auto& kids = h.children_of_[i];
        if (kids.empty()) {
            h.level_of_[i] = 1;
            continue;
        }
        int lo = h.level_of_[static_cast<std::size_t>(kids.front())];
        int hi = lo;
        for (ConceptId c : kids) {
            lo = std::min(lo, h.level_of_[static_cast<std::size_t>(c)]);
            hi = std::max(hi, h.level_of_[static_cast<std::size_t>(c)]);
        }
        if (lo != hi) {
            throw ValidationError("leaves below \"" + h.nodes_[i].name +
                                  "\" have different depths; the hierarchy must have uniform leaf depth");
        }
        h.level_of_[i] = hi + 1;
    }
    h.num_levels_ = h.level_of_[0];
    if (h.num_levels_ < 2) {
        throw ValidationError("hierarchy must contain at least one leaf below the root \"" + h.nodes_[0].name + "\"");
    }

    h.leaf_index_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (h.children_of_[i].empty()) {
            h.leaf_index_[i] = static_cast<int>(h.leaf_ids_.size());
            h.leaf_ids_.push_back(static_cast<ConceptId>(i));
        }
    }
    return h;
}

std::optional<ConceptId> LabelHierarchy::find(std::string_view name) const {
    for (const auto& node : nodes_) {
        if (node.name == name) {
            return node.id;
        }
    }
    return std::nullopt;
}

ConceptId LabelHierarchy::id_of(std::string_view name) const {
    auto id = find(name);
    if (!id) {
        throw ValidationError("unknown concept \"" + std::string(name) + "\"");
    }
    return *id;
}

ConceptId LabelHierarchy::parent(ConceptId o) const {
    auto p = parent_or_none(o);
    if (!p) {
        throw ContractViolation("concept \"" + name(o) + "\" is the root and has no parent");
    }
    return *p;
}

std::vector<ConceptId> LabelHierarchy::siblings(ConceptId o) const {
    std::vector<ConceptId> out;
    auto p = parent_or_none(o);
    if (!p) {
        return out;
    }
    for (ConceptId c : children_of(*p)) {
        if (c != o) {
            out.push_back(c);
        }
    }
    return out;
}

std::vector<ConceptId> LabelHierarchy::concepts_at_level(int level) const {
    std::vector<ConceptId> out;
    for (std::size_t i = 0; i < level_of_.size(); ++i) {
        if (level_of_[i] == level) {
            out.push_back(static_cast<ConceptId>(i));
        }
    }
    return out;
}

ConceptId LabelHierarchy::ancestor_at_level(ConceptId o, int level) const {
    if (level < level_of(o) || level > num_levels_) {
        throw ContractViolation("level " + std::to_string(level) + " is not an ancestor level of \"" + name(o) + "\"");
    }
    while (level_of(o) < level) {
        o = parent(o);
    }
    return o;
}

std::vector<ConceptId> LabelHierarchy::path_to(ConceptId leaf) const {
    std::vector<ConceptId> path{leaf};
    for (auto p = parent_or_none(leaf); p; p = parent_or_none(*p)) {
        path.push_back(*p);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

bool LabelHierarchy::operator==(const LabelHierarchy& other) const {
    if (nodes_.size() != other.nodes_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].name != other.nodes_[i].name || parent_of_[i] != other.parent_of_[i]) {
            return false;
        }
    }
    return true;
}

LabelHierarchy parse_hierarchy(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed hierarchy text at byte ") + std::to_string(e.byte) + ": " + e.what());
    }

    std::vector<FlatNode> flat;
    if (doc.is_array()) {
        if (doc.empty()) {
            throw ValidationError("hierarchy is empty");
        }
        if (doc.size() == 1) {
            flatten(doc[0], std::nullopt, "/0", flat);
        } else {
            flat.push_back({"Root", std::nullopt});
            for (std::size_t i = 0; i < doc.size(); ++i) {
                flatten(doc[i], 0, "/" + std::to_string(i), flat);
            }
        }
    } else {
        flatten(doc, std::nullopt, "", flat);
    }

    std::vector<std::string> names;
    std::vector<std::optional<ConceptId>> parents;
    names.reserve(flat.size());
    parents.reserve(flat.size());
    for (auto& f : flat) {
        names.push_back(std::move(f.name));
        parents.push_back(f.parent);
    }
    return LabelHierarchy::from_parents(std::move(names), std::move(parents));
}

LabelHierarchy load_hierarchy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open hierarchy file " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_hierarchy(buf.str());
}

std::string serialize_hierarchy(const LabelHierarchy& h) {
    return to_json(h, h.root()).dump(2) + "\n";
}

LabelHierarchy shuffle_leaf_grouping(const LabelHierarchy& h, std::mt19937_64& rng) {
    std::vector<std::string> leaf_names;
    for (ConceptId leaf : h.leaf_ids()) {
        leaf_names.push_back(h.name(leaf));
    }
    std::shuffle(leaf_names.begin(), leaf_names.end(), rng);

    std::vector<std::string> names;
    std::vector<std::optional<ConceptId>> parents;
    std::size_t next_leaf = 0;
    for (const auto& node : h.nodes()) {
        names.push_back(h.is_leaf(node.id) ? leaf_names[next_leaf++] : node.name);
        parents.push_back(h.parent_or_none(node.id));
    }
    return LabelHierarchy::from_parents(std::move(names), std::move(parents));
}

}  // namespace logicdiag
