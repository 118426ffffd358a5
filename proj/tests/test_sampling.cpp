#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cossl/sampling.hpp"
#include "support/test_util.hpp"

using namespace cossl;
namespace ts = cossl::testsupport;

namespace {

// Long-tailed labeled set over trivially distinct features.
Dataset make_labeled(const std::vector<int>& counts) {
    Dataset ds(2, static_cast<int>(counts.size()), true);
    for (int c = 1; c <= static_cast<int>(counts.size()); ++c)
        for (int i = 0; i < counts[static_cast<std::size_t>(c - 1)]; ++i) {
            const std::vector<double> x = {static_cast<double>(c), static_cast<double>(i)};
            ds.add(x, c);
        }
    return ds;
}

std::vector<long> class_histogram(const Batch& b, int k) {
    std::vector<long> h(static_cast<std::size_t>(k), 0);
    for (std::size_t idx : b.indices) ++h[static_cast<std::size_t>(b.source->diagnostic_label(idx) - 1)];
    return h;
}

}  // namespace

TEST_CASE("samplers are deterministic given the rng state and stay in range") {
    const Dataset ds = make_labeled({50, 20, 5});
    Rng a(77);
    Rng b(77);
    const Batch ba = sample_batch(ds, SamplerKind::class_balanced(), 64, a);
    const Batch bb = sample_batch(ds, SamplerKind::class_balanced(), 64, b);
    CHECK(ba.indices == bb.indices);
    CHECK(ba.size() == 64);
    for (std::size_t idx : ba.indices) CHECK(idx < ds.size());
}

TEST_CASE("K=1-style degenerate set: balanced and random agree in distribution") {
    // Single non-empty class; both samplers draw uniformly within it.
    Dataset ds(1, 2, true);
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> x = {static_cast<double>(i)};
        ds.add(x, 1);
    }
    Rng r1(5);
    Rng r2(5);
    std::vector<long> h_rand(10, 0);
    std::vector<long> h_bal(10, 0);
    const int draws = 20000;
    const Batch b1 = sample_batch(ds, SamplerKind::random(), draws, r1);
    const Batch b2 = sample_batch(ds, SamplerKind::class_balanced(), draws, r2);
    for (std::size_t i = 0; i < b1.size(); ++i) {
        ++h_rand[b1.indices[i]];
        ++h_bal[b2.indices[i]];
    }
    const std::vector<double> expected(10, draws / 10.0);
    CHECK(ts::chi_square_statistic(h_rand, expected) < ts::chi_square_q999(9));
    CHECK(ts::chi_square_statistic(h_bal, expected) < ts::chi_square_q999(9));
}

TEST_CASE("class-balanced marginal is uniform over classes at gamma=100") {
    const ClassDistribution counts = long_tail_counts(150, 100.0, 10);
    const Dataset ds = make_labeled(counts.counts);
    Rng rng(123);
    const int n = 100000;
    const Batch b = sample_batch(ds, SamplerKind::class_balanced(), n, rng);
    const std::vector<long> h = class_histogram(b, 10);
    for (long c : h) CHECK(std::abs(c / static_cast<double>(n) - 0.1) < 0.01);
    const std::vector<double> expected(10, n / 10.0);
    CHECK(ts::chi_square_statistic(h, expected) < ts::chi_square_q999(9));
}

TEST_CASE("random marginal is proportional to class counts") {
    const ClassDistribution counts = long_tail_counts(150, 100.0, 10);
    const Dataset ds = make_labeled(counts.counts);
    Rng rng(321);
    const int n = 100000;
    const Batch b = sample_batch(ds, SamplerKind::random(), n, rng);
    const std::vector<long> h = class_histogram(b, 10);
    std::vector<double> expected;
    for (int c : counts.counts)
        expected.push_back(static_cast<double>(n) * c / static_cast<double>(counts.total()));
    CHECK(ts::chi_square_statistic(h, expected) < ts::chi_square_q999(9));
}

TEST_CASE("class-imbalanced sampler follows the target distribution") {
    const Dataset ds = make_labeled({40, 40, 40, 40});
    const std::vector<double> target = {0.5, 0.3, 0.15, 0.05};
    Rng rng(9);
    const int n = 100000;
    const Batch b = sample_batch(ds, SamplerKind::class_imbalanced(target), n, rng);
    const std::vector<long> h = class_histogram(b, 4);
    std::vector<double> expected;
    for (double p : target) expected.push_back(n * p);
    CHECK(ts::chi_square_statistic(h, expected) < ts::chi_square_q999(3));
}

TEST_CASE("one-hot target draws only that class") {
    const Dataset ds = make_labeled({10, 10, 10});
    Rng rng(2);
    const Batch b = sample_batch(ds, SamplerKind::class_imbalanced({0.0, 0.0, 1.0}), 500, rng);
    for (std::size_t idx : b.indices) CHECK(ds.diagnostic_label(idx) == 3);
}

TEST_CASE("empty class with positive target mass is an error naming the class") {
    Dataset ds(1, 3, true);
    const std::vector<double> x = {1.0};
    ds.add(x, 1);
    ds.add(x, 3);
    Rng rng(4);
    try {
        (void)sample_batch(ds, SamplerKind::class_imbalanced({0.5, 0.25, 0.25}), 8, rng);
        FAIL("expected empty-class error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("class 2") != std::string::npos);
    }
    // Class-balanced skips empty classes instead of failing.
    const Batch b = sample_batch(ds, SamplerKind::class_balanced(), 100, rng);
    for (std::size_t idx : b.indices) CHECK(ds.diagnostic_label(idx) != 2);
}

TEST_CASE("sampler kind validation") {
    CHECK_THROWS_AS(SamplerKind::class_imbalanced({0.5, 0.4}).validate(3), ValidationError);
    CHECK_THROWS_AS(SamplerKind::class_imbalanced({0.5, 0.6}).validate(2), ValidationError);
    CHECK_THROWS_AS(SamplerKind::class_imbalanced({1.5, -0.5}).validate(2), ValidationError);
    CHECK_NOTHROW(SamplerKind::class_imbalanced({0.5, 0.5}).validate(2));
}

TEST_CASE("empirical_class_frequencies basics and pooling linearity") {
    const Dataset ds = make_labeled({4, 4});
    Batch all_one;
    all_one.source = &ds;
    for (std::size_t i = 0; i < 4; ++i) all_one.indices.push_back(i);  // all class 1
    const std::vector<double> f = empirical_class_frequencies(std::vector<Batch>{all_one}, 2);
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(0.0));

    Batch mixed;
    mixed.source = &ds;
    mixed.indices = {0, 4, 5, 6, 7, 1, 2, 3};  // 5x class1, 3x class2
    const std::vector<double> f2 = empirical_class_frequencies(std::vector<Batch>{mixed}, 2);
    const std::vector<double> pooled =
        empirical_class_frequencies(std::vector<Batch>{all_one, mixed}, 2);
    // Count-weighted mean of the two batches: sizes 4 and 8.
    CHECK(pooled[0] == doctest::Approx((4.0 * f[0] + 8.0 * f2[0]) / 12.0));
    CHECK(pooled[1] == doctest::Approx((4.0 * f[1] + 8.0 * f2[1]) / 12.0));
}

TEST_CASE("frequencies of 1e5 class-balanced draws pass the chi-square gate") {
    const Dataset ds = make_labeled(long_tail_counts(150, 100.0, 10).counts);
    Rng rng(55);
    const int n = 100000;
    const Batch b = sample_batch(ds, SamplerKind::class_balanced(), n, rng);
    const std::vector<double> freq = empirical_class_frequencies(std::vector<Batch>{b}, 10);
    std::vector<long> observed;
    for (double f : freq) observed.push_back(std::lround(f * n));
    const std::vector<double> expected(10, n / 10.0);
    CHECK(ts::chi_square_statistic(observed, expected) < ts::chi_square_q999(9));
}
