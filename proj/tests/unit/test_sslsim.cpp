#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "logicdiag/sslsim.hpp"

using namespace logicdiag;
using namespace logicdiag::sim;

namespace {

SimConfig small_config() {
    SimConfig c;
    c.num_points = 4000;
    c.num_test = 1000;
    c.labeled_fraction = 0.02;
    c.iterations = 150;
    c.warmup = 50;
    return c;
}

}  // namespace

TEST_CASE("default synthetic task") {
    const SimConfig cfg;
    const auto d = gen_synthetic(cfg, 0);
    CHECK(d.size() == 20000);
    CHECK(d.dim == 8);
    CHECK(d.hierarchy.size() == 9);
    CHECK(d.hierarchy.num_leaves() == 6);
    CHECK(d.num_labeled() == 200);
    std::vector<int> per_leaf(6, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.labeled_mask[i]) ++per_leaf[static_cast<std::size_t>(d.leaf_labels[i])];
    }
    for (int n : per_leaf) CHECK(n >= 1);

    const auto again = gen_synthetic(cfg, 0);
    CHECK(again.features == d.features);
    const auto other = gen_synthetic(cfg, 1);
    CHECK(other.features.size() == d.features.size());
    CHECK(other.features != d.features);

    auto full = cfg;
    full.labeled_fraction = 1.0;
    CHECK(gen_synthetic(full, 0).num_labeled() == 20000);
}

TEST_CASE("official and random hierarchies") {
    const SimConfig cfg;
    const auto h = official_hierarchy(cfg);
    CHECK(h.name(0) == "Root");
    CHECK(h.num_levels() == 3);
    const auto r = random_hierarchy(h, 4);
    CHECK(r.size() == h.size());
    CHECK(r.num_leaves() == h.num_leaves());
    CHECK_FALSE(r == h);
    CHECK(random_hierarchy(h, 4) == r);
}

TEST_CASE("loss identities") {
    std::mt19937_64 rng(1);
    auto inst = oracle::random_loss_instance(rng);
    const auto zero = losses(inst.model, inst.batch, 0.0);
    CHECK(zero.total == zero.supervised);

    // Huge weights on an exact feature make crisp, correct predictions.
    ToyModel m(1, 1);
    m.weights = {100.0, 0.0};
    LossBatch b;
    b.labeled_x = {1.0, -1.0};
    b.labeled_t = {1.0, 0.0};
    b.active = {1};
    CHECK(losses(m, b, 1.0).supervised < 1e-6);

    // Every unlabeled row ignored: the term is defined and zero.
    b.unlabeled_x = {0.3};
    b.unlabeled_t = {1.0};
    b.unlabeled_mask = {0};
    CHECK(losses(m, b, 5.0).unsupervised == 0.0);
}

TEST_CASE("losses agree with the definition and gradients with finite differences") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto inst = oracle::random_loss_instance(rng);
        const auto v = losses(inst.model, inst.batch, inst.lambda);
        CHECK(v.total == doctest::Approx(oracle::naive_total(inst)).epsilon(1e-12));
        CHECK(oracle::gradient_relative_error(inst, v.gradient) < 1e-5);
    }
}

TEST_CASE("IoU from confusion counts") {
    // Balanced 6 classes, predictor constant on class 2.
    std::vector<int> truth, pred;
    for (int c = 0; c < 6; ++c) {
        for (int i = 0; i < 10; ++i) {
            truth.push_back(c);
            pred.push_back(2);
        }
    }
    const auto iou = class_iou(confusion_matrix(truth, pred, 6), 6);
    CHECK(iou[2] == doctest::Approx(100.0 / 6.0));
    for (int c : {0, 1, 3, 4, 5}) CHECK(iou[static_cast<std::size_t>(c)] == 0.0);

    const auto perfect = confusion_matrix(truth, truth, 6);
    CHECK(mean_defined(class_iou(perfect, 6)) == 100.0);
    const auto h = official_hierarchy(SimConfig{});
    CHECK(mean_defined(class_iou(project_confusion(perfect, h, 2), 2)) == 100.0);

    // Absent classes are undefined and skipped.
    const auto sparse = class_iou(confusion_matrix({0, 0}, {0, 0}, 3), 3);
    CHECK(std::isnan(sparse[1]));
    CHECK(mean_defined(sparse) == 100.0);
}

TEST_CASE("projecting to superclasses never lowers accuracy") {
    const auto h = official_hierarchy(SimConfig{});
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        Confusion conf(36);
        for (auto& v : conf) v = rng() % 20;
        const auto sup = project_confusion(conf, h, 2);
        CHECK(accuracy(sup, 2) >= accuracy(conf, 6) - 1e-12);
        // Brute-force merge as the reference.
        Confusion ref(4, 0);
        for (std::size_t a = 0; a < 6; ++a) {
            for (std::size_t b = 0; b < 6; ++b) {
                ref[(a / 3) * 2 + b / 3] += conf[a * 6 + b];
            }
        }
        CHECK(sup == ref);
    }
}

TEST_CASE("training determinism and degenerate runs") {
    auto cfg = small_config();
    const auto a = train(cfg);
    cfg.threads = 4;
    const auto b = train(cfg);
    CHECK(a.model.weights == b.model.weights);
    CHECK(a.loss_total == b.loss_total);
    CHECK(a.final.miou == b.final.miou);

    auto none = small_config();
    none.iterations = 0;
    const auto z = train(none);
    CHECK(z.loss_total.empty());
    CHECK(z.initial.miou == z.final.miou);
}

TEST_CASE("lambda = 0 matches supervised-only training") {
    auto zero = small_config();
    zero.lambda = 0.0;
    auto sup = small_config();
    sup.warmup = sup.iterations;  // unlabeled term never starts
    const auto a = train(zero);
    const auto b = train(sup);
    CHECK(a.loss_supervised == b.loss_supervised);
    CHECK(a.model.weights == b.model.weights);
}

TEST_CASE("training improves over the initial model") {
    const auto r = train(small_config());
    CHECK(r.final.miou1() > r.initial.miou1());
    CHECK(r.final.miou1() > 50.0);
    CHECK(r.pseudo.post_rows > 0);
}

TEST_CASE("config parsing") {
    const auto c = parse_sim_config("# comment\nlambda = 2.5\nstrategy=greedy\nfamilies=CE\nhierarchy=random\n\n");
    CHECK(c.lambda == 2.5);
    CHECK(c.strategy == Strategy::Greedy);
    CHECK(c.families.contains(RuleKind::Composition));
    CHECK_FALSE(c.families.contains(RuleKind::Decomposition));
    CHECK(c.hierarchy == HierarchySource::Random);
    CHECK(parse_sim_config("").lambda == SimConfig{}.lambda);
    CHECK(to_json(c).at("strategy") == "greedy");

    CHECK_THROWS_AS(parse_sim_config("bogus=1"), ValidationError);
    CHECK_THROWS_AS(parse_sim_config("lambda"), ParseError);
    CHECK_THROWS_AS(parse_sim_config("lambda=abc"), DataError);
    CHECK_THROWS_AS(parse_sim_config("diagnosis=1\nhierarchical_head=0"), ValidationError);
    CHECK_THROWS_AS(parse_sim_config("weak_noise=0.6\nstrong_noise=0.5"), ValidationError);
    CHECK_THROWS_AS(parse_sim_config("num_points=100\nlabeled_fraction=0.01"), ValidationError);
}
