#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cossl/tinynn.hpp"

namespace cossl::testsupport {

// chi2 = sum (obs - exp)^2 / exp over categories with positive expectation.
inline double chi_square_statistic(std::span<const long> observed,
                                   std::span<const double> expected) {
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] <= 0.0) continue;
        const double d = static_cast<double>(observed[i]) - expected[i];
        stat += d * d / expected[i];
    }
    return stat;
}

// 0.999 quantile of chi-square. Exact values for the dfs the suite uses,
// Wilson-Hilferty elsewhere (within ~1% for df >= 3).
inline double chi_square_q999(int df) {
    switch (df) {
        case 1: return 10.827566;
        case 2: return 13.815511;
        case 3: return 16.266236;
        case 5: return 20.515006;
        case 9: return 27.877165;
        case 15: return 37.697298;
    }
    const double z = 3.09023230616781;  // Phi^-1(0.999)
    const double a = 2.0 / (9.0 * df);
    const double c = 1.0 - a + z * std::sqrt(a);
    return df * c * c * c;
}

// Central finite differences for every parameter tensor of a pack, against
// a loss recomputed through the public forward path.
struct FdCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline FdCheck finite_difference_check(const std::vector<std::span<double>>& params,
                                       const std::vector<std::span<const double>>& grads,
                                       const std::function<double()>& loss_fn,
                                       double eps = 1e-5) {
    FdCheck out;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t].size(); ++i) {
            const double saved = params[t][i];
            params[t][i] = saved + eps;
            const double lp = loss_fn();
            params[t][i] = saved - eps;
            const double lm = loss_fn();
            params[t][i] = saved;
            const double fd = (lp - lm) / (2.0 * eps);
            const double an = grads[t][i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
            out.max_rel_err = std::max(out.max_rel_err, std::abs(fd - an) / denom);
            ++out.checked;
        }
    }
    return out;
}

// Standalone EMA oracle: replays a recorded trajectory of flattened encoder
// snapshots through the closed recurrence.
inline std::vector<double> replay_ema(const std::vector<std::vector<double>>& g_trajectory,
                                      const std::vector<double>& xi0, double momentum) {
    std::vector<double> xi = xi0;
    for (const std::vector<double>& g : g_trajectory)
        for (std::size_t i = 0; i < xi.size(); ++i)
            xi[i] = momentum * xi[i] + (1.0 - momentum) * g[i];
    return xi;
}

inline std::vector<double> flatten_params(const EncoderParams& p) {
    std::vector<double> out;
    for (const auto view : tensor_views(p)) out.insert(out.end(), view.begin(), view.end());
    return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace cossl::testsupport
