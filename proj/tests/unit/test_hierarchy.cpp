#include <doctest.h>

#include <random>
#include <string>

#include "logicdiag/error.hpp"
#include "logicdiag/hierarchy.hpp"
#include "oracle.hpp"

using namespace logicdiag;

namespace {

const char* kH3 = R"({"name": "Root", "children": [
  {"name": "Animal", "children": [{"name": "Cat"}, {"name": "Bird"}]},
  {"name": "Vehicle", "children": [{"name": "Car"}, {"name": "Boat"}]}]})";

std::string data_file(const std::string& name) { return std::string(LOGICDIAG_DATA_DIR) + "/hierarchies/" + name; }

void check_invariants(const LabelHierarchy& h) {
    std::size_t total = 0;
    for (int l = 1; l <= h.num_levels(); ++l) total += h.concepts_at_level(l).size();
    CHECK(total == h.size());
    for (const auto& n : h.nodes()) {
        if (h.is_root(n.id)) continue;
        const ConceptId p = h.parent(n.id);
        CHECK(h.level_of(p) == h.level_of(n.id) + 1);
        const auto& kids = h.children_of(p);
        CHECK(std::find(kids.begin(), kids.end(), n.id) != kids.end());
        for (ConceptId s : h.siblings(n.id)) {
            CHECK(s != n.id);
            CHECK(h.parent(s) == p);
        }
    }
    for (ConceptId leaf : h.leaf_ids()) CHECK(h.level_of(leaf) == 1);
}

}  // namespace

TEST_CASE("H3 parses with depth-first ids") {
    const auto h = parse_hierarchy(kH3);
    CHECK(h.size() == 7);
    CHECK(h.num_levels() == 3);
    CHECK(h.num_leaves() == 4);
    CHECK(h.leaf_ids() == std::vector<ConceptId>{2, 3, 5, 6});
    CHECK(h.name(h.root()) == "Root");
    CHECK(h.id_of("Vehicle") == 4);
    CHECK(h == oracle::h3());
    check_invariants(h);
}

TEST_CASE("parent and siblings queries") {
    const auto h = oracle::h3();
    CHECK(h.parent(h.id_of("Cat")) == h.id_of("Animal"));
    CHECK(h.parent(h.id_of("Animal")) == h.id_of("Root"));
    CHECK_THROWS_AS(h.parent(h.root()), ContractViolation);
    CHECK(h.siblings(h.id_of("Animal")) == std::vector<ConceptId>{h.id_of("Vehicle")});
    CHECK(h.siblings(h.id_of("Cat")) == std::vector<ConceptId>{h.id_of("Bird")});
    CHECK(h.siblings(h.root()).empty());
    CHECK(h.path_to(h.id_of("Boat")) == std::vector<ConceptId>{0, 4, 6});
    CHECK(h.ancestor_at_level(h.id_of("Boat"), 2) == h.id_of("Vehicle"));
    CHECK(h.leaf_index(h.id_of("Car")) == 2);
    CHECK(h.leaf_index(h.id_of("Animal")) == -1);
}

TEST_CASE("multiple top-level nodes get a virtual root") {
    const auto h = parse_hierarchy(R"([
      {"name": "Animal", "children": [{"name": "Cat"}, {"name": "Bird"}]},
      {"name": "Vehicle", "children": [{"name": "Car"}, {"name": "Boat"}]}])");
    CHECK(h.name(0) == "Root");
    CHECK(h.num_levels() == 3);
    CHECK(h == oracle::h3());
}

TEST_CASE("degenerate and malformed hierarchies are rejected") {
    SUBCASE("single root") {
        CHECK_THROWS_WITH_AS(parse_hierarchy(R"({"name": "Root"})"),
                             doctest::Contains("at least one leaf below the root"), ValidationError);
    }
    SUBCASE("duplicate names") {
        CHECK_THROWS_WITH_AS(parse_hierarchy(R"({"name": "R", "children": [{"name": "A"}, {"name": "A"}]})"),
                             doctest::Contains("duplicate concept name \"A\""), ValidationError);
    }
    SUBCASE("non-uniform depth") {
        CHECK_THROWS_WITH_AS(
            parse_hierarchy(R"({"name": "R", "children": [{"name": "A", "children": [{"name": "B"}]}, {"name": "C"}]})"),
            doctest::Contains("uniform"), ValidationError);
    }
    SUBCASE("syntax error reports a position") {
        CHECK_THROWS_WITH_AS(parse_hierarchy(R"({"name": "R", "children": [)"), doctest::Contains("byte"),
                             ParseError);
    }
    SUBCASE("missing name reports the node path") {
        CHECK_THROWS_WITH_AS(parse_hierarchy(R"({"name": "R", "children": [{"name": "A"}, {"title": "B"}]})"),
                             doctest::Contains("/children/1"), ParseError);
    }
    SUBCASE("empty document") { CHECK_THROWS_AS(parse_hierarchy("[]"), ValidationError); }
    SUBCASE("unknown key") {
        CHECK_THROWS_AS(parse_hierarchy(R"({"name": "R", "kids": []})"), ParseError);
    }
}

TEST_CASE("two-node chain is valid") {
    const auto h = parse_hierarchy(R"({"name": "Root", "children": [{"name": "A"}]})");
    CHECK(h.size() == 2);
    CHECK(h.num_levels() == 2);
    CHECK(h.siblings(1).empty());
}

TEST_CASE("bundled hierarchies round-trip through serialize") {
    struct Expect {
        const char* file;
        std::size_t nodes;
        int levels;
        std::size_t leaves;
    };
    for (const auto& e : {Expect{"h3.json", 7, 3, 4}, Expect{"pascal_voc.json", 27, 3, 21},
                          Expect{"cityscapes.json", 26, 3, 19}, Expect{"coco.json", 95, 4, 80}}) {
        CAPTURE(e.file);
        const auto h = load_hierarchy_file(data_file(e.file));
        CHECK(h.size() == e.nodes);
        CHECK(h.num_levels() == e.levels);
        CHECK(h.num_leaves() == e.leaves);
        check_invariants(h);
        const auto again = parse_hierarchy(serialize_hierarchy(h));
        CHECK(again == h);
        CHECK(serialize_hierarchy(again) == serialize_hierarchy(h));
    }
}

TEST_CASE("random trees satisfy the structural invariants") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const auto h = oracle::random_tree(rng, 14);
        check_invariants(h);
        CHECK(parse_hierarchy(serialize_hierarchy(h)) == h);
    }
}

TEST_CASE("leaf shuffle keeps the shape") {
    const auto h = load_hierarchy_file(data_file("pascal_voc.json"));
    std::mt19937_64 rng(3);
    const auto s = shuffle_leaf_grouping(h, rng);
    CHECK(s.size() == h.size());
    CHECK(s.num_levels() == h.num_levels());
    for (const auto& n : h.nodes()) {
        if (h.is_leaf(n.id)) continue;
        CHECK(s.children_of(n.id).size() == h.children_of(n.id).size());
    }
    for (ConceptId leaf : h.leaf_ids()) CHECK(s.find(h.name(leaf)).has_value());
}
