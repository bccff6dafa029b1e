#include <doctest.h>

#include <array>
#include <optional>
#include <random>

#include "logicdiag/diagnosis.hpp"
#include "logicdiag/error.hpp"
#include "oracle.hpp"

using namespace logicdiag;

namespace {

std::vector<std::vector<ConceptId>> flip_sets(const std::vector<Diagnosis>& ds) {
    std::vector<std::vector<ConceptId>> out;
    for (const auto& d : ds) out.push_back(d.flip_set);
    return out;
}

Assignment from_mask(std::uint64_t m, std::size_t n) {
    Assignment a(n);
    for (std::size_t i = 0; i < n; ++i) a.set(static_cast<ConceptId>(i), (m >> i) & 1U);
    return a;
}

}  // namespace

TEST_CASE("worked diagnosis examples on H3") {
    const auto h = oracle::h3();
    const auto k = compile_rules(h);

    auto out = enumerate_minimal_diagnoses(k, Assignment::parse(h, "Root,Animal,Vehicle,Cat"), 3);
    CHECK(out.status == DiagnosisStatus::Diagnosed);
    CHECK(flip_sets(out.diagnoses) == std::vector<std::vector<ConceptId>>{{4}, {1, 2, 5}, {1, 2, 6}});

    out = enumerate_minimal_diagnoses(k, Assignment::parse(h, "Root,Animal,Cat"), 5);
    CHECK(out.status == DiagnosisStatus::Consistent);
    CHECK(out.diagnoses.empty());

    out = enumerate_minimal_diagnoses(k, Assignment::parse(h, "Cat"), 5);
    CHECK(flip_sets(out.diagnoses) == std::vector<std::vector<ConceptId>>{{2}, {0, 1}});
}

TEST_CASE("bound exceeded is distinct from consistent") {
    const auto h = oracle::h3();
    const auto k = compile_rules(h);
    const auto out = enumerate_minimal_diagnoses(k, Assignment::parse(h, "Root,Animal,Vehicle,Cat"), 0);
    CHECK(out.status == DiagnosisStatus::BoundExceeded);
    CHECK(out.diagnoses.empty());
    CHECK(default_max_cardinality(h) == 5);
}

TEST_CASE("enumeration matches both brute-force references on every H3 assignment") {
    const auto h = oracle::h3();
    const auto k = compile_rules(h);
    for (std::uint64_t m = 0; m < 128; ++m) {
        const auto a = from_mask(m, 7);
        const auto fast = flip_sets(enumerate_minimal_diagnoses(k, a, 7).diagnoses);
        CHECK(fast == flip_sets(brute_force_diagnoses(k, a)));
        CHECK(fast == oracle::minimal_diagnoses(h, oracle::bits_of(m, 7)));
    }
}

TEST_CASE("randomized differential test against the oracle") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 30; ++t) {
        const auto h = oracle::random_tree(rng, 12);
        const auto k = compile_rules(h);
        const std::size_t n = h.size();
        for (int j = 0; j < 10; ++j) {
            const std::uint64_t m = rng() & ((std::uint64_t{1} << n) - 1);
            const auto a = from_mask(m, n);
            const auto fast = enumerate_minimal_diagnoses(k, a, n);
            REQUIRE(flip_sets(fast.diagnoses) == oracle::minimal_diagnoses(h, oracle::bits_of(m, n)));
            for (const auto& d : fast.diagnoses) {
                CHECK(is_consistent(k, resolve(k, a, d)));
                // Dropping any single flip must break consistency.
                for (std::size_t i = 0; i < d.flip_set.size(); ++i) {
                    auto smaller = d.flip_set;
                    smaller.erase(smaller.begin() + static_cast<std::ptrdiff_t>(i));
                    CHECK_FALSE(is_consistent(k, apply_flips(a, smaller)));
                }
            }
        }
    }
}

TEST_CASE("resolve") {
    const auto h = oracle::h3();
    const auto k = compile_rules(h);
    const auto a = Assignment::parse(h, "Root,Animal,Vehicle,Cat");
    CHECK(resolve(k, a, Diagnosis{{4}}).true_set() == std::vector<ConceptId>{0, 1, 2});
    CHECK(resolve(k, Assignment::parse(h, "Cat"), Diagnosis{{0, 1}}).true_set() == std::vector<ConceptId>{0, 1, 2});
    const auto ok = Assignment::parse(h, "Root,Vehicle,Car");
    CHECK(resolve(k, ok, Diagnosis{}) == ok);
    CHECK_THROWS_AS(resolve(k, a, Diagnosis{{5}}), ContractViolation);
}

TEST_CASE("brute force refuses large hierarchies") {
    std::vector<std::string> names{"Root"};
    std::vector<std::optional<ConceptId>> parents{std::nullopt};
    for (int i = 0; i < 21; ++i) {
        names.push_back("c" + std::to_string(i));
        parents.emplace_back(0);
    }
    const auto h = LabelHierarchy::from_parents(names, parents);
    CHECK_THROWS_AS(brute_force_diagnoses(compile_rules(h), Assignment(h.size())), ValidationError);
}

TEST_CASE("selection strategies") {
    RngStream rng(1, 0);
    const std::vector<double> w{0.7, 0.3};
    CHECK(select_by_weight(w, Strategy::Greedy, rng).index == 0);
    CHECK(select_by_weight(std::vector<double>{0.3, 0.7, 0.7}, Strategy::Greedy, rng).index == 1);

    const std::vector<double> one{0.2};
    for (auto s : {Strategy::Uniform, Strategy::Predictive, Strategy::Greedy, Strategy::Sampling}) {
        RngStream r(9, 9);
        CHECK(select_by_weight(one, s, r).index == 0);
    }

    const auto fb = select_by_weight(std::vector<double>{0.0, 0.0, 0.0}, Strategy::Sampling, rng);
    CHECK(fb.uniform_fallback);
    CHECK(fb.index < 3);
    CHECK_THROWS_AS(select_by_weight(std::vector<double>{}, Strategy::Sampling, rng), ContractViolation);

    CHECK(parse_strategy("Sampling") == Strategy::Sampling);
    CHECK_THROWS_AS(parse_strategy("best"), ValidationError);
}

TEST_CASE("sampling frequencies follow the weights") {
    const std::vector<double> w{0.7, 0.3};
    std::array<int, 2> counts{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        RngStream r(42, static_cast<std::uint64_t>(i));
        ++counts[select_by_weight(w, Strategy::Sampling, r).index];
    }
    double chi2 = 0.0;
    for (int j = 0; j < 2; ++j) {
        const double e = n * w[static_cast<std::size_t>(j)];
        chi2 += (counts[static_cast<std::size_t>(j)] - e) * (counts[static_cast<std::size_t>(j)] - e) / e;
    }
    CHECK(chi2 < 6.635);  // df = 1, p = 0.01
}

TEST_CASE("sampling is reproducible per stream") {
    const std::vector<double> w{0.2, 0.5, 0.3};
    for (std::uint64_t s = 0; s < 50; ++s) {
        RngStream a(3, s), b(3, s);
        CHECK(select_by_weight(w, Strategy::Sampling, a).index == select_by_weight(w, Strategy::Sampling, b).index);
    }
}
