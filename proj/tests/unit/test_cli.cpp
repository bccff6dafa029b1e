#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "logicdiag/tensor_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = logicdiag::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string data(const char* name) { return std::string(LOGICDIAG_DATA_DIR) + "/hierarchies/" + name; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string golden(const char* name) { return slurp(fs::path(LOGICDIAG_GOLDEN_DIR) / name); }

std::string random_probs(std::size_t rows, std::size_t cols, const char* name) {
    std::mt19937_64 rng(rows * 31 + cols);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(rows * cols);
    for (auto& x : v) x = u(rng);
    const auto path = (fs::temp_directory_path() / name).string();
    logicdiag::write_tensor(path, logicdiag::Tensor::f32({rows, cols}, v));
    return path;
}

}  // namespace

TEST_CASE("golden outputs") {
    const auto h3 = data("h3.json");
    CHECK(run({"validate-hierarchy", "--hierarchy", h3}).out == golden("validate_h3.txt"));
    CHECK(run({"compile-rules", "--hierarchy", h3}).out == golden("rules_h3.txt"));
    const auto d = run({"diagnose", "--hierarchy", h3, "--assignment", "Root,Animal,Vehicle,Cat"});
    CHECK(d.code == 0);
    CHECK(d.out == golden("diagnose_h3.txt"));
    CHECK(run({"diagnose", "--hierarchy", h3, "--assignment", "1110100"}).out == golden("diagnose_h3.txt"));
}

TEST_CASE("repeated runs are byte-identical") {
    const auto h3 = data("h3.json");
    const auto probs = random_probs(500, 7, "logicdiag_cli_repeat.ldt");
    const std::vector<std::string> args{"revise", "--hierarchy", h3, "--probs", probs, "--seed", "5", "--json"};
    const auto a = run(args), b = run(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("\"rows\": 500") != std::string::npos);
    fs::remove(probs);
}

TEST_CASE("diagnose verdicts") {
    const auto h3 = data("h3.json");
    CHECK(run({"diagnose", "--hierarchy", h3, "--assignment", "Root,Animal,Cat"}).out == "verdict\tconsistent\n");
    const auto tight = run({"diagnose", "--hierarchy", h3, "--assignment", "Root,Animal,Vehicle,Cat,Bird", "--max-card", "1"});
    CHECK(tight.code == 0);
    CHECK(tight.out.rfind("verdict\tinconsistent-bound-exceeded", 0) == 0);
    const auto j = run({"--json", "diagnose", "--hierarchy", h3, "--assignment", "Cat"});
    CHECK(j.out.find("\"verdict\": \"inconsistent\"") != std::string::npos);
}

TEST_CASE("exit codes") {
    const auto h3 = data("h3.json");
    const auto none = run({});
    CHECK(none.code == 1);
    CHECK(none.err.find("Usage") != std::string::npos);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"diagnose", "--hierarchy", h3}).code == 1);
    CHECK(run({"revise", "--hierarchy", h3, "--probs", "x", "--grouping", "bogus"}).code == 1);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).out.find("0.1.0") != std::string::npos);

    CHECK(run({"validate-hierarchy", "--hierarchy", "/nonexistent.json"}).code == 2);
    CHECK(run({"diagnose", "--hierarchy", h3, "--assignment", "Root,Dog"}).code == 2);

    const auto bad = fs::temp_directory_path() / "logicdiag_cli_bad.json";
    std::ofstream(bad) << R"({"name": "Root", "children": [{"name": "A", "children": [{"name": "x"}]}, {"name": "B"}]})";
    const auto r = run({"validate-hierarchy", "--hierarchy", bad.string()});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    fs::remove(bad);
}

TEST_CASE("revise rejects a width mismatch") {
    const auto probs = random_probs(4, 6, "logicdiag_cli_width.ldt");
    const auto r = run({"revise", "--hierarchy", data("h3.json"), "--probs", probs});
    CHECK(r.code == 2);
    CHECK(r.err.find("7") != std::string::npos);
    CHECK(r.err.find("6") != std::string::npos);
    fs::remove(probs);
}

TEST_CASE("LOGICDIAG_SEED applies only when --seed is absent") {
    const auto h3 = data("h3.json");
    const auto probs = random_probs(2000, 7, "logicdiag_cli_seed.ldt");
    const auto dir = fs::temp_directory_path();
    auto labels = [&](const char* name, std::vector<std::string> extra) {
        const auto path = (dir / name).string();
        std::vector<std::string> args{"revise", "--hierarchy", h3, "--probs", probs, "--out-labels", path};
        args.insert(args.end(), extra.begin(), extra.end());
        REQUIRE(run(args).code == 0);
        const auto bytes = slurp(path);
        fs::remove(path);
        return bytes;
    };
    ::setenv("LOGICDIAG_SEED", "9", 1);
    const auto env9 = labels("a.ldt", {});
    const auto flag3 = labels("b.ldt", {"--seed", "3"});
    ::unsetenv("LOGICDIAG_SEED");
    CHECK(env9 == labels("c.ldt", {"--seed", "9"}));
    CHECK(flag3 == labels("d.ldt", {"--seed", "3"}));
    CHECK(env9 != flag3);

    ::setenv("LOGICDIAG_SEED", "-4", 1);
    CHECK(run({"revise", "--hierarchy", h3, "--probs", probs}).code == 1);
    ::unsetenv("LOGICDIAG_SEED");
    fs::remove(probs);
}

TEST_CASE("revise writes labels with the leading shape") {
    const auto dir = fs::temp_directory_path();
    std::vector<float> v(2 * 3 * 7, 0.1f);
    for (std::size_t r = 0; r < 6; ++r) {
        v[r * 7 + 0] = 0.9f;
        v[r * 7 + 4] = 0.9f;
        v[r * 7 + 5] = 0.8f;
    }
    const auto probs = (dir / "logicdiag_cli_shape.ldt").string();
    logicdiag::write_tensor(probs, logicdiag::Tensor::f32({2, 3, 7}, v));
    const auto labels = (dir / "logicdiag_cli_shape_labels.ldt").string();
    const auto stats = (dir / "logicdiag_cli_shape_stats.json").string();
    REQUIRE(run({"revise", "--hierarchy", data("h3.json"), "--probs", probs, "--out-labels", labels, "--out-stats",
                 stats})
                .code == 0);
    const auto t = logicdiag::read_tensor_file(labels);
    CHECK(t.dims == std::vector<std::uint64_t>{2, 3});
    CHECK(std::get<std::vector<std::int32_t>>(t.data) == std::vector<std::int32_t>(6, 5));
    CHECK(slurp(stats).find("\"consistent\": 6") != std::string::npos);
    for (const auto& p : {probs, labels, stats}) fs::remove(p);
}

TEST_CASE("bench and simulate run") {
    const auto b = run({"bench", "--hierarchy", data("h3.json"), "--rows", "1000", "--threads", "1", "--json"});
    CHECK(b.code == 0);
    CHECK(b.out.find("\"rows\": 1000") != std::string::npos);

    const auto cfg = fs::temp_directory_path() / "logicdiag_cli_sim.cfg";
    std::ofstream(cfg) << "num_points=2000\nnum_test=500\nlabeled_fraction=0.05\niterations=20\nwarmup=10\n";
    const auto s = run({"simulate", "--config", cfg.string(), "--seed", "1"});
    CHECK(s.code == 0);
    CHECK(s.out.find("miou1") != std::string::npos);
    std::ofstream(cfg) << "bogus=1\n";
    CHECK(run({"simulate", "--config", cfg.string()}).code == 2);
    fs::remove(cfg);
}
