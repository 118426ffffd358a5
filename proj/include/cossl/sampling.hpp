#pragma once

#include <span>
#include <vector>

#include "cossl/datagen.hpp"
#include "cossl/rng.hpp"

namespace cossl {

enum class SamplerTag { Random, ClassBalanced, ClassImbalanced };

struct SamplerKind {
    SamplerTag tag = SamplerTag::Random;
    std::vector<double> target;  // class probabilities, ClassImbalanced only

    static SamplerKind random() { return {SamplerTag::Random, {}}; }
    static SamplerKind class_balanced() { return {SamplerTag::ClassBalanced, {}}; }
    static SamplerKind class_imbalanced(std::vector<double> t) {
        return {SamplerTag::ClassImbalanced, std::move(t)};
    }

    void validate(int k) const;
};

// A batch is an index list into its source dataset; sampling is always with
// replacement (epochs are optimizer steps, not data passes).
struct Batch {
    const Dataset* source = nullptr;
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }
};

Batch sample_batch(const Dataset& set, const SamplerKind& kind, int batch, Rng& rng);

// Normalized class histogram over pooled batches (test oracle; reads the
// diagnostic labels).
std::vector<double> empirical_class_frequencies(std::span<const Batch> batches, int k);

// Normalize a class-count vector into a probability vector.
std::vector<double> counts_to_prior(const ClassDistribution& counts);

}  // namespace cossl
