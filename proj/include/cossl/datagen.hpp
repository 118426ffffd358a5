#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cossl/rng.hpp"
#include "cossl/tinynn.hpp"

namespace cossl {

// Per-class example counts, class index 1..K stored at [0..K-1].
struct ClassDistribution {
    std::vector<int> counts;

    int num_classes() const { return static_cast<int>(counts.size()); }
    long total() const;
    int count(int cls) const { return counts[static_cast<std::size_t>(cls - 1)]; }
};

struct ImbalanceSpec {
    int n1 = 150;
    int m1 = 1500;
    double gamma_l = 100.0;
    double gamma_u = 100.0;
    int k = 10;

    void validate() const;
};

struct MixtureSpec {
    int k = 10;
    int d = 16;
    double separation = 2.0;
    double noise_sigma = 1.0;
    int pool_per_class = 2400;

    void validate() const;
};

// Feature vectors with class labels. Unlabeled pools keep the true labels
// internally (diagnostics only); labels_visible() gates the training-facing
// accessors.
class Dataset {
public:
    Dataset() = default;
    Dataset(int dim, int num_classes, bool labels_visible)
        : dim_(dim), k_(num_classes), visible_(labels_visible) {}

    void add(std::span<const double> x, int label);

    int dim() const { return dim_; }
    int num_classes() const { return k_; }
    std::size_t size() const { return labels_.size(); }
    bool labels_visible() const { return visible_; }

    std::span<const double> feature(std::size_t i) const {
        return {features_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }

    int label(std::size_t i) const;
    const std::vector<std::size_t>& class_examples(int cls) const;

    // Hidden ground truth; for pseudo-label quality diagnostics only.
    int diagnostic_label(std::size_t i) const { return labels_[i]; }

    ClassDistribution class_counts() const;

private:
    int dim_ = 0;
    int k_ = 0;
    bool visible_ = true;
    std::vector<double> features_;
    std::vector<int> labels_;
    std::vector<std::vector<std::size_t>> by_class_;
};

// counts[j] = floor(base * gamma^(-(j-1)/(k-1))), clamped to >= 1.
ClassDistribution long_tail_counts(int base, double gamma, int k);

// Positive gamma: identical to long_tail_counts. Negative gamma: counts grow,
// counts[j] = floor(base * |gamma|^((j-1)/(k-1))), class 1 smallest.
ClassDistribution shifted_test_counts(int base, double gamma_signed, int k);

// Base count for a shifted test set bounded by a per-class pool cap:
// the largest class ends up at ~cap for either sign.
int shifted_base_for_cap(int cap, double gamma_signed);

Dataset make_mixture_pool(const MixtureSpec& spec, std::uint64_t seed);

struct Splits {
    Dataset labeled;    // X, labels visible
    Dataset unlabeled;  // U, labels hidden
    Dataset remainder;  // untouched pool; serves as the test pool
};

Splits carve_splits(const Dataset& pool, const ClassDistribution& labeled,
                    const ClassDistribution& unlabeled, std::uint64_t seed);

Dataset build_test_set(const Dataset& pool, const ClassDistribution& counts, std::uint64_t seed);

// Line-oriented export: "class<TAB>f1,f2,...". Unlabeled pools write class 0.
void export_tsv(const Dataset& ds, const std::string& path);

}  // namespace cossl
