#include "cossl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace cossl {

namespace {

// floor with a tiny absolute nudge: the formula hits exact integers
// (1500 * 150^-1 = 10) and pow roundoff must not drop them by one.
int floor_count(double x) {
    return static_cast<int>(std::floor(x + 1e-9));
}

std::vector<std::size_t> shuffled_indices(const std::vector<std::size_t>& src, Rng& rng) {
    std::vector<std::size_t> idx = src;
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.index_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace

long ClassDistribution::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

void ImbalanceSpec::validate() const {
    if (k < 2) throw ValidationError("k must be >= 2");
    if (n1 < 1 || m1 < 1) throw ValidationError("n1 and m1 must be >= 1");
    if (gamma_l < 1.0 || gamma_u < 1.0) throw ValidationError("gamma_l and gamma_u must be >= 1");
}

void MixtureSpec::validate() const {
    if (k < 2) throw ValidationError("mixture k must be >= 2");
    if (d < 1) throw ValidationError("mixture d must be >= 1");
    if (separation <= 0.0) throw ValidationError("separation must be > 0");
    if (noise_sigma <= 0.0) throw ValidationError("noise_sigma must be > 0");
    if (pool_per_class < 1) throw ValidationError("pool_per_class must be >= 1");
}

void Dataset::add(std::span<const double> x, int label) {
    if (static_cast<int>(x.size()) != dim_) throw ValidationError("feature dimension mismatch");
    if (label < 1 || label > k_) throw ValidationError("label out of range 1..K");
    const std::size_t idx = labels_.size();
    features_.insert(features_.end(), x.begin(), x.end());
    labels_.push_back(label);
    if (by_class_.empty()) by_class_.resize(static_cast<std::size_t>(k_));
    by_class_[static_cast<std::size_t>(label - 1)].push_back(idx);
}

int Dataset::label(std::size_t i) const {
    if (!visible_) throw ValidationError("labels are hidden on this dataset");
    return labels_[i];
}

const std::vector<std::size_t>& Dataset::class_examples(int cls) const {
    if (!visible_) throw ValidationError("labels are hidden on this dataset");
    if (by_class_.empty()) {
        static const std::vector<std::size_t> empty;
        return empty;
    }
    return by_class_[static_cast<std::size_t>(cls - 1)];
}

ClassDistribution Dataset::class_counts() const {
    ClassDistribution dist;
    dist.counts.assign(static_cast<std::size_t>(k_), 0);
    for (int l : labels_) ++dist.counts[static_cast<std::size_t>(l - 1)];
    return dist;
}

ClassDistribution long_tail_counts(int base, double gamma, int k) {
    if (k < 2) throw ValidationError("long_tail_counts: k must be >= 2");
    if (base < 1) throw ValidationError("long_tail_counts: base must be >= 1");
    if (gamma < 1.0) throw ValidationError("long_tail_counts: gamma must be >= 1");
    ClassDistribution dist;
    dist.counts.reserve(static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) {
        const double v = base * std::pow(gamma, -static_cast<double>(j - 1) / (k - 1));
        dist.counts.push_back(std::max(1, floor_count(v)));
    }
    return dist;
}

ClassDistribution shifted_test_counts(int base, double gamma_signed, int k) {
    if (std::abs(gamma_signed) < 1.0)
        throw ValidationError("shifted_test_counts: |gamma| must be >= 1");
    if (gamma_signed > 0.0) return long_tail_counts(base, gamma_signed, k);
    if (k < 2) throw ValidationError("shifted_test_counts: k must be >= 2");
    if (base < 1) throw ValidationError("shifted_test_counts: base must be >= 1");
    const double g = -gamma_signed;
    ClassDistribution dist;
    dist.counts.reserve(static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) {
        const double v = base * std::pow(g, static_cast<double>(j - 1) / (k - 1));
        dist.counts.push_back(std::max(1, floor_count(v)));
    }
    return dist;
}

int shifted_base_for_cap(int cap, double gamma_signed) {
    if (cap < 1) throw ValidationError("shifted_base_for_cap: cap must be >= 1");
    if (std::abs(gamma_signed) < 1.0)
        throw ValidationError("shifted_base_for_cap: |gamma| must be >= 1");
    if (gamma_signed > 0.0) return cap;
    return std::max(1, floor_count(cap / -gamma_signed));
}

Dataset make_mixture_pool(const MixtureSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);

    // Centroids: random directions on the unit sphere scaled by separation.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(static_cast<std::size_t>(spec.k));
    for (int c = 0; c < spec.k; ++c) {
        std::vector<double> v(static_cast<std::size_t>(spec.d));
        double norm = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12) norm = 1.0;
        for (double& x : v) x *= spec.separation / norm;
        centroids.push_back(std::move(v));
    }

    Dataset pool(spec.d, spec.k, true);
    std::vector<double> x(static_cast<std::size_t>(spec.d));
    for (int c = 1; c <= spec.k; ++c) {
        const std::vector<double>& mu = centroids[static_cast<std::size_t>(c - 1)];
        for (int n = 0; n < spec.pool_per_class; ++n) {
            for (int i = 0; i < spec.d; ++i)
                x[static_cast<std::size_t>(i)] = mu[static_cast<std::size_t>(i)] + spec.noise_sigma * rng.normal();
            pool.add(x, c);
        }
    }
    return pool;
}

Splits carve_splits(const Dataset& pool, const ClassDistribution& labeled,
                    const ClassDistribution& unlabeled, std::uint64_t seed) {
    if (labeled.num_classes() != pool.num_classes() || unlabeled.num_classes() != pool.num_classes())
        throw ValidationError("carve_splits: class count mismatch");
    Rng rng(seed);
    Splits out{Dataset(pool.dim(), pool.num_classes(), true),
               Dataset(pool.dim(), pool.num_classes(), false),
               Dataset(pool.dim(), pool.num_classes(), true)};
    for (int c = 1; c <= pool.num_classes(); ++c) {
        const int nl = labeled.count(c);
        const int nu = unlabeled.count(c);
        const std::vector<std::size_t>& avail = pool.class_examples(c);
        if (static_cast<std::size_t>(nl) + static_cast<std::size_t>(nu) > avail.size())
            throw std::runtime_error("insufficient pool for class " + std::to_string(c) + ": need " +
                                     std::to_string(nl + nu) + ", have " + std::to_string(avail.size()));
        std::vector<std::size_t> idx = shuffled_indices(avail, rng);
        for (int i = 0; i < nl; ++i) out.labeled.add(pool.feature(idx[static_cast<std::size_t>(i)]), c);
        for (int i = nl; i < nl + nu; ++i) out.unlabeled.add(pool.feature(idx[static_cast<std::size_t>(i)]), c);
        for (std::size_t i = static_cast<std::size_t>(nl + nu); i < idx.size(); ++i)
            out.remainder.add(pool.feature(idx[i]), c);
    }
    return out;
}

Dataset build_test_set(const Dataset& pool, const ClassDistribution& counts, std::uint64_t seed) {
    if (counts.num_classes() != pool.num_classes())
        throw ValidationError("build_test_set: class count mismatch");
    Rng rng(seed);
    Dataset test(pool.dim(), pool.num_classes(), true);
    for (int c = 1; c <= pool.num_classes(); ++c) {
        const int n = counts.count(c);
        const std::vector<std::size_t>& avail = pool.class_examples(c);
        if (static_cast<std::size_t>(n) > avail.size())
            throw std::runtime_error("insufficient pool for class " + std::to_string(c) + ": need " +
                                     std::to_string(n) + ", have " + std::to_string(avail.size()));
        std::vector<std::size_t> idx = shuffled_indices(avail, rng);
        for (int i = 0; i < n; ++i) test.add(pool.feature(idx[static_cast<std::size_t>(i)]), c);
    }
    return test;
}

void export_tsv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        f << (ds.labels_visible() ? ds.diagnostic_label(i) : 0) << '\t';
        const std::span<const double> x = ds.feature(i);
        for (std::size_t j = 0; j < x.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", x[j]);
            if (j) f << ',';
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace cossl
