#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "selbias/bias.hpp"
#include "selbias/mvn.hpp"
#include "selbias/rng.hpp"
#include "selbias/simulate.hpp"
#include "selbias/truncmvn.hpp"

namespace selbias {

enum class ValidationLevel { quick, full };

struct CheckResult {
    std::string name;
    bool passed;
    std::string detail;
};

namespace detail {

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace detail

/// Equicorrelated quadrature vs the QMC engine on random instances; the two
/// routes share no code beyond the univariate normal helpers.
inline CheckResult check_cross_engine_cdf(std::uint64_t seed, int instances) {
    std::mt19937_64 rng = substream_engine(seed, 1);
    double worst_ratio = 0.0;
    int failures = 0;
    for (int trial = 0; trial < instances; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 9);  // 2..10
        const double c = detail::uniform_in(rng, 0.3, 3.0);
        const double d = detail::uniform_in(rng, 0.0, 2.0);
        Eigen::VectorXd mean(n), upper(n);
        const double sd = std::sqrt(c + d);
        for (int i = 0; i < n; ++i) {
            mean[i] = detail::uniform_in(rng, -1.0, 1.0);
            upper[i] = mean[i] + sd * detail::uniform_in(rng, -1.0, 2.5);
        }
        const double quad = mvn_cdf_equicorr(mean, c, d, upper);
        const GaussianSpec spec = GaussianSpec::equicorrelated(mean, c, d);
        QmcConfig qmc;
        qmc.seed = substream_seed(seed, 1000 + static_cast<std::uint64_t>(trial));
        const MvnEstimate est = mvn_cdf_general(spec, upper, qmc);
        const double tol = std::max(3.0 * est.std_error, 1e-4);
        const double diff = std::fabs(quad - est.value);
        worst_ratio = std::max(worst_ratio, diff / tol);
        if (diff > tol) ++failures;
    }
    std::ostringstream detail;
    detail << instances << " instances; worst |diff|/tol = " << worst_ratio;
    return {"cross-engine CDF (quadrature vs QMC)", failures == 0, detail.str()};
}

/// Analytic truncated means vs rejection sampling on random exchangeable-ish
/// equicorrelated specs with per-coordinate bounds.
inline CheckResult check_truncated_mean_oracle(std::uint64_t seed, int instances,
                                               std::int64_t accepted_per_instance) {
    std::mt19937_64 rng = substream_engine(seed, 2);
    const int dims[] = {2, 3, 5};
    double worst_ratio = 0.0;
    int failures = 0;
    for (int trial = 0; trial < instances; ++trial) {
        const int n = dims[trial % 3];
        const double c = detail::uniform_in(rng, 0.4, 2.5);
        const double d = detail::uniform_in(rng, 0.0, 1.5);
        Eigen::VectorXd theta(n), upper(n);
        const double sd = std::sqrt(c + d);
        for (int i = 0; i < n; ++i) {
            theta[i] = detail::uniform_in(rng, -1.0, 1.0);
            upper[i] = theta[i] + sd * detail::uniform_in(rng, 0.0, 2.0);
        }
        TruncatedAboveSpec spec(GaussianSpec::equicorrelated(theta, c, d), upper);
        const Eigen::VectorXd analytic = truncated_mean(spec);
        const RejectionSummary sampled = rejection_sample_truncated(
            spec, accepted_per_instance,
            substream_seed(seed, 2000 + static_cast<std::uint64_t>(trial)));
        for (int i = 0; i < n; ++i) {
            const double tol = 3.0 * sampled.std_error[i];
            const double diff = std::fabs(analytic[i] - sampled.mean[i]);
            worst_ratio = std::max(worst_ratio, diff / tol);
            if (diff > tol) ++failures;
        }
    }
    std::ostringstream detail;
    detail << instances << " specs x " << accepted_per_instance
           << " accepted draws; worst |diff|/(3 SE) = " << worst_ratio;
    return {"truncated means vs rejection sampling", failures == 0, detail.str()};
}

namespace detail {

// Quadratic through three equally spaced points, for averaging the analytic
// bias over a bin without binning error.
struct Quadratic {
    double x0, x1, x2, y0, y1, y2;
    double operator()(double x) const {
        const double l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
        const double l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
        const double l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
        return y0 * l0 + y1 * l1 + y2 * l2;
    }
};

}  // namespace detail

/// Closed-form selection bias vs its Monte Carlo estimate. For each
/// configuration, simulate winner pairs, take the most-populated x_star bin,
/// and compare the empirical mean of (naive posterior mean - mu_star) inside
/// the bin with the analytic bias averaged over the same draws (by quadratic
/// interpolation across the bin, so the comparison carries no binning error).
inline CheckResult check_delta_oracle(std::uint64_t seed, int configurations,
                                      std::int64_t reps_per_config) {
    const ModelParams configs[] = {
        ModelParams(3, std::sqrt(0.5), 1.0, 1.0), ModelParams(5, 1.0, std::sqrt(0.5), 1.0),
        ModelParams(6, std::sqrt(0.5), 1.0, 2.0), ModelParams(2, 0.9, 0.3, 1.5),
        ModelParams(4, 0.2, 0.8, 0.8)};
    const int available = static_cast<int>(std::size(configs));
    double worst_ratio = 0.0;
    int failures = 0;
    for (int trial = 0; trial < configurations; ++trial) {
        const ModelParams& params = configs[trial % available];
        SimConfig cfg{params, reps_per_config,
                      substream_seed(seed, 3000 + static_cast<std::uint64_t>(trial)), 0.25};
        const std::vector<WinnerPair> pairs = winner_pairs(cfg);

        // Most populated bin.
        std::vector<BinSummary> bins = binned_conditional_mean(pairs, cfg.bin_width);
        const auto mode = std::max_element(
            bins.begin(), bins.end(),
            [](const BinSummary& u, const BinSummary& v) { return u.count < v.count; });
        const double center = mode->center;
        const double half = 0.5 * cfg.bin_width;

        detail::Quadratic analytic{center - half,
                                   center,
                                   center + half,
                                   selection_bias(params, center - half).delta,
                                   selection_bias(params, center).delta,
                                   selection_bias(params, center + half).delta};

        RunningStat empirical;  // naive posterior mean minus latent effect
        double analytic_sum = 0.0;
        for (const WinnerPair& pair : pairs) {
            if (std::llround(pair.x_star / cfg.bin_width) != std::llround(center / cfg.bin_width))
                continue;
            empirical.add(posterior_mean_single(params, pair.x_star) - pair.mu_star);
            analytic_sum += analytic(pair.x_star);
        }
        const double analytic_mean = analytic_sum / static_cast<double>(empirical.count());
        const double tol = 3.0 * empirical.std_error();
        const double diff = std::fabs(empirical.mean() - analytic_mean);
        worst_ratio = std::max(worst_ratio, diff / tol);
        if (diff > tol) ++failures;
    }
    std::ostringstream detail;
    detail << configurations << " configurations x " << reps_per_config
           << " reps; worst |diff|/(3 SE) = " << worst_ratio;
    return {"closed-form bias vs Monte Carlo", failures == 0, detail.str()};
}

inline std::vector<CheckResult> run_validation(std::uint64_t seed, ValidationLevel level) {
    const bool full = level == ValidationLevel::full;
    return {
        check_cross_engine_cdf(seed, full ? 50 : 10),
        check_truncated_mean_oracle(seed, full ? 10 : 3, full ? 1000000 : 100000),
        check_delta_oracle(seed, full ? 5 : 2, full ? 1000000 : 200000),
    };
}

}  // namespace selbias
