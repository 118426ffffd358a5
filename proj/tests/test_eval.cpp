#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cossl/eval.hpp"
#include "cossl/sampling.hpp"

using namespace cossl;

namespace {

// Encoder that passes inputs straight through (tanh of large scale ~ sign,
// so use an explicit linear-ish construction: one layer, identity weights,
// small inputs stay near-linear). For exact control we instead pick inputs
// whose predictions depend only on the head.
ModelConfig passthrough_model(int d) {
    ModelConfig mc;
    mc.input_dim = d;
    mc.hidden = {};
    mc.feature_dim = d;
    mc.num_classes = d;
    return mc;
}

EncoderParams scaled_identity_encoder(int d, double scale) {
    EncoderParams enc;
    enc.act = Activation::Relu;  // exact identity on non-negative inputs
    Matrix w(d, d);
    for (int i = 0; i < d; ++i) w(i, i) = scale;
    enc.w.push_back(std::move(w));
    enc.b.emplace_back(static_cast<std::size_t>(d), 0.0);
    return enc;
}

HeadParams identity_head(int d) {
    HeadParams h;
    h.w = Matrix(d, d);
    for (int i = 0; i < d; ++i) h.w(i, i) = 1.0;
    h.b.assign(static_cast<std::size_t>(d), 0.0);
    return h;
}

// One-hot dataset: class c encoded as e_c, so the identity model predicts it.
Dataset onehot_set(const std::vector<int>& counts) {
    const int k = static_cast<int>(counts.size());
    Dataset ds(k, k, true);
    std::vector<double> x(static_cast<std::size_t>(k), 0.0);
    for (int c = 1; c <= k; ++c) {
        x.assign(static_cast<std::size_t>(k), 0.0);
        x[static_cast<std::size_t>(c - 1)] = 1.0;
        for (int i = 0; i < counts[static_cast<std::size_t>(c - 1)]; ++i) ds.add(x, c);
    }
    return ds;
}

}  // namespace

TEST_CASE("perfect predictor scores 1.0 everywhere") {
    const Dataset test = onehot_set({7, 5, 3});
    const EvalResult r = evaluate(scaled_identity_encoder(3, 1.0), identity_head(3), test);
    CHECK(r.overall_accuracy == 1.0);
    CHECK(r.averaged_class_recall == 1.0);
    for (double rec : r.per_class_recall) CHECK(rec == 1.0);
}

TEST_CASE("constant predictor on a balanced set scores 1/K both ways") {
    const Dataset test = onehot_set(std::vector<int>(10, 20));
    HeadParams head = identity_head(10);
    for (auto view : tensor_views(head))
        for (double& v : view) v = 0.0;
    head.b[0] = 5.0;  // always predicts class 1
    const EvalResult r = evaluate(scaled_identity_encoder(10, 1.0), head, test);
    CHECK(r.overall_accuracy == doctest::Approx(0.1));
    CHECK(r.averaged_class_recall == doctest::Approx(0.1));
}

TEST_CASE("constructed 3-class confusion with recalls 1.0/0.5/0.0") {
    // Class 2 features half e_2, half e_1; class 3 features all e_1.
    const int k = 3;
    Dataset test(k, k, true);
    auto add = [&](int onehot, int label, int n) {
        std::vector<double> x(static_cast<std::size_t>(k), 0.0);
        x[static_cast<std::size_t>(onehot - 1)] = 1.0;
        for (int i = 0; i < n; ++i) test.add(x, label);
    };
    add(1, 1, 10);
    add(2, 2, 5);
    add(1, 2, 5);
    add(1, 3, 8);
    const EvalResult r = evaluate(scaled_identity_encoder(3, 1.0), identity_head(3), test);
    CHECK(r.per_class_recall[0] == doctest::Approx(1.0));
    CHECK(r.per_class_recall[1] == doctest::Approx(0.5));
    CHECK(r.per_class_recall[2] == doctest::Approx(0.0));
    CHECK(r.averaged_class_recall == doctest::Approx(0.5));
    // On an unbalanced set accuracy and averaged recall differ.
    CHECK(r.overall_accuracy == doctest::Approx((10.0 + 5.0) / 28.0));
}

TEST_CASE("averaged class recall equals accuracy on a balanced test set") {
    Rng rng(5);
    const int k = 4;
    Dataset test(k, k, true);
    std::vector<double> x(static_cast<std::size_t>(k));
    for (int c = 1; c <= k; ++c)
        for (int i = 0; i < 25; ++i) {
            for (double& v : x) v = rng.normal();
            test.add(x, c);
        }
    Rng init(2);
    const ModelConfig mc = passthrough_model(k);
    const EncoderParams enc = init_encoder(mc, init);
    const HeadParams head = init_head(k, k, init);
    const EvalResult r = evaluate(enc, head, test);
    CHECK(r.overall_accuracy == doctest::Approx(r.averaged_class_recall).epsilon(1e-12));
}

TEST_CASE("post-compensation: identity when priors match, over random logits") {
    Rng rng(9);
    PriorPair pair;
    pair.source = {0.6, 0.25, 0.1, 0.05};
    pair.target = pair.source;
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> logits(4);
        for (double& v : logits) v = 5.0 * rng.normal();
        const std::vector<double> adj = post_compensate(logits, pair);
        int a = 0;
        int b = 0;
        for (int j = 1; j < 4; ++j) {
            if (logits[static_cast<std::size_t>(j)] > logits[static_cast<std::size_t>(a)]) a = j;
            if (adj[static_cast<std::size_t>(j)] > adj[static_cast<std::size_t>(b)]) b = j;
        }
        CHECK(a == b);
    }
}

TEST_CASE("post-compensation shifts ties toward the favored class") {
    PriorPair pair;
    pair.source = {0.5, 0.5};
    pair.target = {0.01, 0.99};
    const std::vector<double> adj = post_compensate(std::vector<double>{1.0, 1.0}, pair);
    CHECK(adj[1] > adj[0]);

    PriorPair skew;
    skew.source = {0.9, 0.1};
    skew.target = {0.5, 0.5};
    const std::vector<double> adj2 = post_compensate(std::vector<double>{1.0, 1.0}, skew);
    CHECK(adj2[1] > adj2[0]);  // +ln(0.5/0.1) beats +ln(0.5/0.9)
    CHECK(adj2[0] == doctest::Approx(1.0 + std::log(0.5) - std::log(0.9)));
    CHECK(adj2[1] == doctest::Approx(1.0 + std::log(0.5) - std::log(0.1)));
}

TEST_CASE("post-compensation rejects zero source mass") {
    PriorPair pair;
    pair.source = {1.0, 0.0};
    pair.target = {0.5, 0.5};
    CHECK_THROWS_AS(post_compensate(std::vector<double>{0.0, 0.0}, pair), ValidationError);
}

TEST_CASE("shifted sweep: row shape, gamma symmetry, and mean row") {
    MixtureSpec spec;
    spec.k = 5;
    spec.d = 6;
    spec.separation = 4.0;
    spec.noise_sigma = 1.0;
    spec.pool_per_class = 600;
    const Dataset pool = make_mixture_pool(spec, 77);
    Rng init(3);
    ModelConfig mc;
    mc.input_dim = 6;
    mc.hidden = {12};
    mc.feature_dim = 8;
    mc.num_classes = 5;
    const EncoderParams enc = init_encoder(mc, init);
    const HeadParams head = init_head(8, 5, init);

    const std::vector<int> gammas = {16, 4, 1, -4, -16};
    const std::vector<double> prior = {0.5, 0.2, 0.15, 0.1, 0.05};
    const SweepTable t = shifted_sweep(enc, head, pool, gammas, 512, PcMode::Unknown, false,
                                       prior, 99);
    REQUIRE(t.rows.size() == gammas.size());
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        CHECK(t.rows[i].gamma_test == gammas[i]);
        CHECK_FALSE(t.rows[i].pc_applied);
        CHECK(t.rows[i].per_class_recall.size() == 5);
    }
    // gamma = 1 row equals plain evaluation on the uniform test set.
    ClassDistribution uniform;
    uniform.counts.assign(5, 512);
    const Dataset uni = build_test_set(pool, uniform, 99);
    const EvalResult direct = evaluate(enc, head, uni);
    CHECK(t.rows[2].overall_accuracy == doctest::Approx(direct.overall_accuracy));

    double acc = 0.0;
    for (const EvalResult& r : t.rows) acc += r.overall_accuracy;
    CHECK(t.mean.overall_accuracy == doctest::Approx(acc / t.rows.size()));

    // Known mode applies PC everywhere.
    const SweepTable known = shifted_sweep(enc, head, pool, gammas, 512, PcMode::Known, false,
                                           prior, 99);
    for (const EvalResult& r : known.rows) CHECK(r.pc_applied);

    // CSV export round-trip shape.
    const auto path = (std::filesystem::temp_directory_path() / "cossl_sweep_test.csv").string();
    write_sweep_csv(path, t);
    std::ifstream f(path);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "# cossl-sweep-v1");
    REQUIRE(std::getline(f, line));
    CHECK(line == "gamma,overall_acc,avg_class_recall,recall_1,recall_2,recall_3,recall_4,recall_5,pc_applied");
    std::size_t rows = 0;
    std::string last;
    while (std::getline(f, line))
        if (!line.empty()) {
            ++rows;
            last = line;
        }
    CHECK(rows == gammas.size() + 1);
    CHECK(last.substr(0, 5) == "mean,");
    std::filesystem::remove(path);
}

TEST_CASE("last_k_average") {
    std::vector<double> constant(30, 0.42);
    CHECK(last_k_average(constant, 20) == doctest::Approx(0.42));
    std::vector<double> spike(10, 0.0);
    spike.back() = 1.0;
    CHECK(last_k_average(spike, 1) == doctest::Approx(1.0));
    std::vector<double> ramp;
    for (int i = 1; i <= 100; ++i) ramp.push_back(i);
    CHECK(last_k_average(ramp, 20) == doctest::Approx(90.5));
    CHECK_THROWS_AS(last_k_average(spike, 11), ValidationError);
}
