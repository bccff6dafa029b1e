#pragma once

// Reference implementations used only by tests. They are deliberately naive
// and share no code with the engine beyond the hierarchy queries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "logicdiag/hierarchy.hpp"

namespace oracle {

using logicdiag::ConceptId;
using logicdiag::LabelHierarchy;

inline LabelHierarchy h3() {
    return LabelHierarchy::from_parents({"Root", "Animal", "Cat", "Bird", "Vehicle", "Car", "Boat"},
                                        {std::nullopt, 0, 1, 1, 0, 4, 4});
}

// Truth-table reading of the three rule families, straight from their
// logical form: a true concept needs its parent true, at least one child
// true, and every sibling false.
inline bool consistent(const LabelHierarchy& h, const std::vector<bool>& a) {
    for (ConceptId o = 0; o < static_cast<ConceptId>(h.size()); ++o) {
        if (!a[static_cast<std::size_t>(o)]) continue;
        if (!h.is_root(o) && !a[static_cast<std::size_t>(h.parent(o))]) return false;
        if (!h.is_leaf(o)) {
            bool any = false;
            for (ConceptId r : h.children_of(o)) any = any || a[static_cast<std::size_t>(r)];
            if (!any) return false;
        }
        for (ConceptId s : h.siblings(o)) {
            if (a[static_cast<std::size_t>(s)]) return false;
        }
    }
    return true;
}

inline std::vector<bool> bits_of(std::uint64_t mask, std::size_t n) {
    std::vector<bool> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = (mask >> i) & 1U;
    return a;
}

// Every subset-minimal flip mask that makes `a` consistent, sorted by
// cardinality then lexicographically by the ascending id lists.
inline std::vector<std::vector<ConceptId>> minimal_diagnoses(const LabelHierarchy& h, const std::vector<bool>& a) {
    const std::size_t n = h.size();
    std::vector<std::uint64_t> hits;
    for (std::uint64_t f = 0; f < (std::uint64_t{1} << n); ++f) {
        auto b = a;
        for (std::size_t i = 0; i < n; ++i) {
            if ((f >> i) & 1U) b[i] = !b[i];
        }
        if (consistent(h, b)) hits.push_back(f);
    }
    std::vector<std::vector<ConceptId>> out;
    for (auto f : hits) {
        bool minimal = true;
        for (auto g : hits) {
            if (g != f && (g & f) == g) {
                minimal = false;
                break;
            }
        }
        if (!minimal || f == 0) continue;
        std::vector<ConceptId> ids;
        for (std::size_t i = 0; i < n; ++i) {
            if ((f >> i) & 1U) ids.push_back(static_cast<ConceptId>(i));
        }
        out.push_back(ids);
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.size() != y.size() ? x.size() < y.size() : x < y;
    });
    return out;
}

// Random uniform-depth tree with at most max_nodes concepts and depth >= 2.
inline LabelHierarchy random_tree(std::mt19937_64& rng, std::size_t max_nodes) {
    for (;;) {
        const int depth = std::uniform_int_distribution<int>(2, 4)(rng);
        std::vector<std::string> names{"n0"};
        std::vector<std::optional<ConceptId>> parents{std::nullopt};
        bool ok = true;
        // Preorder construction so parents precede children.
        auto grow = [&](auto&& self, ConceptId node, int level) -> void {
            if (level == 1 || !ok) return;
            const int kids = std::uniform_int_distribution<int>(1, 3)(rng);
            for (int k = 0; k < kids && ok; ++k) {
                if (names.size() >= max_nodes) {
                    ok = k > 0;  // the node needs at least one child
                    return;
                }
                const auto id = static_cast<ConceptId>(names.size());
                names.push_back("n" + std::to_string(id));
                parents.emplace_back(node);
                self(self, id, level - 1);
            }
        };
        grow(grow, 0, depth);
        if (!ok) continue;
        try {
            return LabelHierarchy::from_parents(names, parents);
        } catch (const std::exception&) {
            continue;  // a budget cut left a non-uniform branch
        }
    }
}

inline double pmean(const std::vector<double>& xs, int q) {
    double s = 0.0;
    for (double x : xs) s += std::pow(x, q);
    return std::pow(s / static_cast<double>(xs.size()), 1.0 / q);
}

// Rows of probabilities indexed [x][o].
using Rows = std::vector<std::vector<double>>;

inline double truth_composition(const Rows& p, const LabelHierarchy& h, ConceptId o, int q) {
    if (h.is_root(o)) return 1.0;
    std::vector<double> v;
    for (const auto& r : p) v.push_back(r[o] - r[o] * r[h.parent(o)]);
    return 1.0 - pmean(v, q);
}

inline double truth_decomposition(const Rows& p, const LabelHierarchy& h, ConceptId o, int q) {
    if (h.is_leaf(o)) return 1.0;
    std::vector<double> v;
    for (const auto& r : p) {
        double m = 0.0;
        for (ConceptId c : h.children_of(o)) m = std::max(m, r[c]);
        v.push_back(r[o] - r[o] * m);
    }
    return 1.0 - pmean(v, q);
}

inline double truth_exclusion(const Rows& p, const LabelHierarchy& h, ConceptId o, int q) {
    const auto sib = h.siblings(o);
    if (sib.empty()) return 1.0;
    double acc = 0.0;
    for (ConceptId s : sib) {
        std::vector<double> v;
        for (const auto& r : p) v.push_back(r[o] * r[s]);
        acc += pmean(v, q);
    }
    return 1.0 - acc / static_cast<double>(sib.size());
}

// Likelihood of flipping `flips` in a single-row batch: conflict averages the
// three family truth degrees, normality scales the predicted side's
// probability by (1 - conflict), and outputs fail independently.
inline double likelihood(const LabelHierarchy& h, const std::vector<double>& row, const std::vector<bool>& a,
                         const std::vector<ConceptId>& flips, int q) {
    const Rows rows{row};
    double l = 1.0;
    for (ConceptId o = 0; o < static_cast<ConceptId>(h.size()); ++o) {
        const double g =
            truth_composition(rows, h, o, q) + truth_decomposition(rows, h, o, q) + truth_exclusion(rows, h, o, q);
        const double c = 1.0 - g / 3.0;
        const double p = row[static_cast<std::size_t>(o)];
        const double n = (a[static_cast<std::size_t>(o)] ? p : 1.0 - p) * (1.0 - c);
        const bool flipped = std::find(flips.begin(), flips.end(), o) != flips.end();
        l *= flipped ? 1.0 - n : n;
    }
    return l;
}

}  // namespace oracle
