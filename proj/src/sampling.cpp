#include "cossl/sampling.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace cossl {

void SamplerKind::validate(int k) const {
    if (tag != SamplerTag::ClassImbalanced) {
        if (!target.empty()) throw ValidationError("target only valid for class_imbalanced sampler");
        return;
    }
    if (static_cast<int>(target.size()) != k)
        throw ValidationError("class_imbalanced target must have K entries");
    double sum = 0.0;
    for (double p : target) {
        if (p < 0.0) throw ValidationError("class_imbalanced target must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("class_imbalanced target must sum to 1");
}

Batch sample_batch(const Dataset& set, const SamplerKind& kind, int batch, Rng& rng) {
    if (set.size() == 0) throw ValidationError("sample_batch: empty dataset");
    if (batch < 1) throw ValidationError("sample_batch: batch must be >= 1");
    kind.validate(set.num_classes());

    Batch out;
    out.source = &set;
    out.indices.reserve(static_cast<std::size_t>(batch));

    switch (kind.tag) {
        case SamplerTag::Random: {
            for (int i = 0; i < batch; ++i) out.indices.push_back(rng.index_below(set.size()));
            break;
        }
        case SamplerTag::ClassBalanced: {
            std::vector<int> nonempty;
            for (int c = 1; c <= set.num_classes(); ++c)
                if (!set.class_examples(c).empty()) nonempty.push_back(c);
            for (int i = 0; i < batch; ++i) {
                const int c = nonempty[rng.index_below(nonempty.size())];
                const std::vector<std::size_t>& pool = set.class_examples(c);
                out.indices.push_back(pool[rng.index_below(pool.size())]);
            }
            break;
        }
        case SamplerTag::ClassImbalanced: {
            // An empty class with positive mass is a split bug, not something
            // to renormalize away.
            for (int c = 1; c <= set.num_classes(); ++c)
                if (kind.target[static_cast<std::size_t>(c - 1)] > 0.0 && set.class_examples(c).empty())
                    throw std::runtime_error("class " + std::to_string(c) +
                                             " has positive target mass but no examples");
            for (int i = 0; i < batch; ++i) {
                const double u = rng.uniform01();
                double acc = 0.0;
                int c = set.num_classes();
                for (int j = 1; j <= set.num_classes(); ++j) {
                    acc += kind.target[static_cast<std::size_t>(j - 1)];
                    if (u < acc) {
                        c = j;
                        break;
                    }
                }
                while (set.class_examples(c).empty()) --c;  // top-of-CDF roundoff
                const std::vector<std::size_t>& pool = set.class_examples(c);
                out.indices.push_back(pool[rng.index_below(pool.size())]);
            }
            break;
        }
    }
    return out;
}

std::vector<double> empirical_class_frequencies(std::span<const Batch> batches, int k) {
    std::vector<double> freq(static_cast<std::size_t>(k), 0.0);
    std::size_t total = 0;
    for (const Batch& b : batches) {
        for (std::size_t idx : b.indices) {
            const int label = b.source->diagnostic_label(idx);
            freq[static_cast<std::size_t>(label - 1)] += 1.0;
        }
        total += b.indices.size();
    }
    if (total == 0) throw ValidationError("empirical_class_frequencies: no examples");
    for (double& f : freq) f /= static_cast<double>(total);
    return freq;
}

std::vector<double> counts_to_prior(const ClassDistribution& counts) {
    std::vector<double> p(counts.counts.size());
    const double total = static_cast<double>(counts.total());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = counts.counts[i] / total;
    return p;
}

}  // namespace cossl
