#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cossl {

// Stateless seed mixer used to derive independent per-role stream seeds
// from one master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled value transforms. The engine is fully
// specified by the standard; std::*_distribution is not, and frozen test
// values must survive a stdlib change.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, no caching: two raw draws per sample.
    double normal() {
        const double u1 = static_cast<double>((raw() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    // Uniform index in [0, n). n must be positive.
    std::size_t index_below(std::size_t n) {
        std::size_t i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

private:
    std::mt19937_64 engine_;
};

// TFE keeps private sampler/augment/blend streams so that toggling the
// classifier branch cannot shift the representation-side draws.
struct TfeStreams {
    Rng labeled;
    Rng unlabeled;
    Rng augment;
    Rng blend;

    static TfeStreams from_seed(std::uint64_t seed) {
        std::uint64_t s = seed;
        const std::uint64_t a = splitmix64(s);
        const std::uint64_t b = splitmix64(s);
        const std::uint64_t c = splitmix64(s);
        const std::uint64_t d = splitmix64(s);
        return TfeStreams{Rng(a), Rng(b), Rng(c), Rng(d)};
    }
};

// One stream per role, all derived from the master seed.
struct RngStreams {
    Rng labeled_sampler;
    Rng unlabeled_sampler;
    Rng augment;
    TfeStreams tfe;
    Rng init;

    static RngStreams from_master(std::uint64_t master) {
        std::uint64_t s = master;
        const std::uint64_t a = splitmix64(s);
        const std::uint64_t b = splitmix64(s);
        const std::uint64_t c = splitmix64(s);
        const std::uint64_t d = splitmix64(s);
        const std::uint64_t e = splitmix64(s);
        return RngStreams{Rng(a), Rng(b), Rng(c), TfeStreams::from_seed(d), Rng(e)};
    }
};

}  // namespace cossl
