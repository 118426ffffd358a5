#pragma once

#include <span>
#include <string>
#include <vector>

#include "cossl/datagen.hpp"
#include "cossl/tinynn.hpp"

namespace cossl {

struct EvalResult {
    double overall_accuracy = 0.0;
    std::vector<double> per_class_recall;
    double averaged_class_recall = 0.0;
    double gamma_test = 1.0;
    bool pc_applied = false;
};

// Training label prior and assumed test prior for post-compensation.
struct PriorPair {
    std::vector<double> source;
    std::vector<double> target;

    void validate() const;
};

// adjusted_k = logit_k + ln p_target(k) - ln p_source(k). Pure function of
// (logits, priors); only the argmax is contractual downstream.
std::vector<double> post_compensate(std::span<const double> logits, const PriorPair& pair);

EvalResult evaluate(const EncoderParams& encoder, const HeadParams& head, const Dataset& test,
                    const PriorPair* pc = nullptr);

enum class PcMode { Unknown, Known };

struct SweepTable {
    std::vector<EvalResult> rows;  // one per gamma, in input order
    EvalResult mean;               // arithmetic mean over the rows

    double mean_accuracy() const { return mean.overall_accuracy; }
};

// Builds one shifted test set per gamma from the pool (base derived from cap)
// and evaluates. Unknown mode applies no PC, or uniform-target PC when
// pc_unknown_uniform is set; known mode applies PC with the true test prior.
SweepTable shifted_sweep(const EncoderParams& encoder, const HeadParams& head, const Dataset& pool,
                         std::span<const int> gammas, int cap, PcMode mode,
                         bool pc_unknown_uniform, const std::vector<double>& source_prior,
                         std::uint64_t seed);

void write_sweep_csv(const std::string& path, const SweepTable& table);

// Mean of the final k entries.
double last_k_average(std::span<const double> history, int k);

}  // namespace cossl
