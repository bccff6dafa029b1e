#include "logicdiag/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>

#include "logicdiag/error.hpp"
#include "logicdiag/tensor_io.hpp"

namespace logicdiag {

namespace {

unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Splits [0, n) into contiguous chunks, one per worker.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    if (workers == 1) {
        fn(std::size_t{0}, n, std::size_t{0});
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(n, w * step);
        const std::size_t end = std::min(n, begin + step);
        pool.emplace_back([&, begin, end, w] {
            try {
                fn(begin, end, w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct RowTally {
    std::size_t consistent = 0;
    std::size_t revised = 0;
    std::size_t bound_exceeded = 0;
    std::size_t ignored = 0;
    std::size_t uniform_fallbacks = 0;
    std::vector<std::size_t> histogram;
};

}  // namespace

void RevisionConfig::validate() const {
    if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
        throw ValidationError("binarize threshold must be in (0,1)");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ValidationError("tau must be in (0,1]");
    }
    fuzzy.validate();
}

bool RevisionStats::operator==(const RevisionStats& o) const {
    return rows == o.rows && consistent == o.consistent && revised == o.revised &&
           bound_exceeded == o.bound_exceeded && ignored == o.ignored && uniform_fallbacks == o.uniform_fallbacks &&
           cardinality_histogram == o.cardinality_histogram && conflict.c == o.conflict.c &&
           conflict.g == o.conflict.g;
}

Assignment RevisionResult::revised_row(std::size_t r) const {
    const auto first = revised.begin() + static_cast<std::ptrdiff_t>(r * num_concepts);
    return Assignment(std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(num_concepts)));
}

RevisionEngine::RevisionEngine(LabelHierarchy hierarchy, RevisionConfig config)
    : hierarchy_(std::move(hierarchy)),
      config_(config),
      rules_(compile_rules(hierarchy_, config.families)),
      max_cardinality_(config.max_cardinality == 0 ? default_max_cardinality(hierarchy_) : config.max_cardinality) {
    config_.validate();
}

RevisionResult RevisionEngine::revise(const ProbBatch& probs) const {
    return revise(probs, config_.seed, config_.threads);
}

RevisionResult RevisionEngine::revise(const ProbBatch& probs, std::uint64_t seed, unsigned threads) const {
    const std::size_t n = probs.rows();
    const std::size_t width = hierarchy_.size();
    if (probs.cols() != width) {
        throw ValidationError("probability tensor has " + std::to_string(probs.cols()) +
                              " concepts per row but the hierarchy has " + std::to_string(width));
    }

    RevisionResult result;
    result.rows = n;
    result.num_concepts = width;
    result.revised.assign(n * width, 0);
    result.leaf_labels.assign(n, -1);
    result.stats.rows = n;
    if (n == 0) {
        result.stats.conflict.c.assign(width, 0.0);
        result.stats.conflict.g.assign(width, {1.0, 1.0, 1.0});
        return result;
    }

    // Binarize.
    for (std::size_t i = 0; i < n * width; ++i) {
        // Clamping moved values by at most eps, far from any sane threshold.
        result.revised[i] = probs.values()[i] >= config_.binarize_threshold ? 1 : 0;
    }

    const bool needs_conflict = config_.strategy == Strategy::Sampling || config_.strategy == Strategy::Greedy;
    result.stats.conflict = conflict_profile(probs, hierarchy_, rules_, config_.fuzzy);
    const std::vector<double> zero_conflict(width, 0.0);
    const std::vector<double>& conflict = needs_conflict ? result.stats.conflict.c : zero_conflict;

    // Rows sharing a binarized pattern share their diagnoses.
    std::unordered_map<std::string, std::size_t> pattern_index;
    std::vector<std::size_t> row_pattern(n);
    std::vector<Assignment> patterns;
    for (std::size_t r = 0; r < n; ++r) {
        const auto* row = result.revised.data() + r * width;
        std::string key(reinterpret_cast<const char*>(row), width);
        auto [it, inserted] = pattern_index.emplace(std::move(key), patterns.size());
        if (inserted) {
            patterns.emplace_back(std::vector<std::uint8_t>(row, row + width));
        }
        row_pattern[r] = it->second;
    }
    const unsigned workers = resolve_threads(threads);
    std::vector<DiagnosisOutcome> outcomes(patterns.size());
    parallel_chunks(patterns.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            outcomes[i] = enumerate_minimal_diagnoses(rules_, patterns[i], max_cardinality_);
        }
    });

    std::vector<RowTally> tallies(std::max<std::size_t>(1, std::min<std::size_t>(workers, n)));
    parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
        RowTally& tally = tallies[w];
        tally.histogram.assign(max_cardinality_ + 1, 0);
        std::vector<double> normal(width);
        std::vector<double> weights;
        for (std::size_t r = begin; r < end; ++r) {
            auto* row = result.revised.data() + r * width;
            const auto& outcome = outcomes[row_pattern[r]];
            switch (outcome.status) {
                case DiagnosisStatus::Consistent:
                    ++tally.consistent;
                    break;
                case DiagnosisStatus::BoundExceeded:
                    ++tally.bound_exceeded;
                    ++tally.ignored;
                    continue;  // left as binarized, labelled -1
                case DiagnosisStatus::Diagnosed: {
                    const auto& ds = outcome.diagnoses;
                    weights.assign(ds.size(), -1.0);
                    if (config_.strategy != Strategy::Uniform && ds.size() > 1) {
                        const auto p = probs.row(r);
                        for (std::size_t o = 0; o < width; ++o) {
                            normal[o] = normality(p[o], conflict[o], row[o] != 0);
                        }
                        for (std::size_t i = 0; i < ds.size(); ++i) {
                            weights[i] = diagnosis_likelihood(ds[i], normal);
                        }
                    }
                    RngStream rng(seed, r);
                    const Selection sel = select_by_weight(weights, config_.strategy, rng);
                    tally.uniform_fallbacks += sel.uniform_fallback ? 1 : 0;
                    const auto& chosen = ds[sel.index];
                    for (ConceptId o : chosen.flip_set) row[o] ^= 1;
                    ++tally.revised;
                    ++tally.histogram[chosen.cardinality()];
                    break;
                }
            }
            const Assignment revised(std::vector<std::uint8_t>(row, row + width));
            if (!is_consistent(rules_, revised)) {
                throw ContractViolation("row " + std::to_string(r) + " is inconsistent after revision");
            }
            const ConceptId leaf = path_leaf(hierarchy_, revised);
            result.leaf_labels[r] = leaf;
            if (leaf < 0) ++tally.ignored;
        }
    });

    auto& stats = result.stats;
    stats.cardinality_histogram.assign(max_cardinality_ + 1, 0);
    for (const auto& t : tallies) {
        stats.consistent += t.consistent;
        stats.revised += t.revised;
        stats.bound_exceeded += t.bound_exceeded;
        stats.ignored += t.ignored;
        stats.uniform_fallbacks += t.uniform_fallbacks;
        for (std::size_t k = 0; k < t.histogram.size(); ++k) stats.cardinality_histogram[k] += t.histogram[k];
    }
    return result;
}

RevisionResult revise_batch(const ProbBatch& probs, const LabelHierarchy& h, const RevisionConfig& cfg) {
    return RevisionEngine(h, cfg).revise(probs);
}

std::vector<std::int32_t> confidence_threshold_baseline(std::span<const double> probs, std::size_t rows,
                                                        std::size_t classes, double tau) {
    if (probs.size() != rows * classes || classes == 0) {
        throw ValidationError("leaf probability buffer does not match " + std::to_string(rows) + " x " +
                              std::to_string(classes));
    }
    std::vector<std::int32_t> out(rows, -1);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = probs.subspan(r * classes, classes);
        double sum = 0.0;
        for (double v : row) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("row " + std::to_string(r) + " has a value outside [0,1]");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ValidationError("row " + std::to_string(r) + " is not on the probability simplex (sums to " +
                                  std::to_string(sum) + ")");
        }
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (row[best] >= tau) {
            out[r] = static_cast<std::int32_t>(best);
        }
    }
    return out;
}

LoadedProbs read_probs(const std::string& path, std::size_t num_concepts) {
    Tensor t = read_tensor_file(path);
    if (t.dtype() != DType::Float32) {
        throw TensorFormatError(TensorFormatError::Kind::BadDtype, "probability tensor " + path + " is not float32");
    }
    if (t.dims.size() < 2) {
        throw TensorFormatError(TensorFormatError::Kind::DimMismatch,
                                "probability tensor " + path + " needs at least 2 dims, has " +
                                    std::to_string(t.dims.size()));
    }
    if (t.dims.back() != num_concepts) {
        throw TensorFormatError(TensorFormatError::Kind::DimMismatch,
                                "dimension mismatch: probability tensor width " + std::to_string(t.dims.back()) +
                                    " does not match hierarchy size " + std::to_string(num_concepts));
    }
    LoadedProbs out;
    out.leading_dims.assign(t.dims.begin(), t.dims.end() - 1);
    std::size_t rows = 1;
    for (auto d : out.leading_dims) rows *= static_cast<std::size_t>(d);
    const auto& values = std::get<std::vector<float>>(t.data);
    out.batch = ProbBatch(rows, num_concepts, std::span<const float>(values));
    return out;
}

void write_labels(const std::string& path, const std::vector<std::int32_t>& labels,
                  const std::vector<std::uint64_t>& leading_dims) {
    write_tensor(path, Tensor::i32(leading_dims, labels));
}

nlohmann::json stats_to_json(const RevisionStats& stats, const LabelHierarchy& h) {
    nlohmann::json j;
    j["rows"] = stats.rows;
    j["consistent"] = stats.consistent;
    j["revised"] = stats.revised;
    j["bound_exceeded"] = stats.bound_exceeded;
    j["ignored"] = stats.ignored;
    j["uniform_fallbacks"] = stats.uniform_fallbacks;
    j["cardinality_histogram"] = stats.cardinality_histogram;
    nlohmann::json concepts = nlohmann::json::array();
    for (std::size_t i = 0; i < h.size() && i < stats.conflict.c.size(); ++i) {
        const auto& g = stats.conflict.g[i];
        concepts.push_back({{"id", i},
                            {"name", h.name(static_cast<ConceptId>(i))},
                            {"conflict", stats.conflict.c[i]},
                            {"truth_composition", g[0]},
                            {"truth_decomposition", g[1]},
                            {"truth_exclusion", g[2]}});
    }
    j["concepts"] = std::move(concepts);
    return j;
}

void write_stats(const std::string& path, const RevisionStats& stats, const LabelHierarchy& h) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out << stats_to_json(stats, h).dump(2) << "\n";
}

}  // namespace logicdiag
