#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "selbias/errors.hpp"
#include "selbias/model.hpp"
#include "selbias/rng.hpp"
#include "selbias/truncmvn.hpp"

namespace selbias {

struct SimConfig {
    ModelParams params;
    std::int64_t n_reps;
    std::uint64_t seed = 0;
    double bin_width = 0.25;

    void validate() const {
        if (n_reps < 1) throw invalid_params("SimConfig: n_reps must be >= 1");
        if (!(bin_width > 0.0)) throw invalid_params("SimConfig: bin_width must be > 0");
    }
};

/// The winning arm of one replication: its latent mean, its observation (the
/// maximum across arms), and which arm it was.
struct WinnerPair {
    double mu_star;
    double x_star;
    int winner_index;
};

struct Replication {
    Eigen::VectorXd mu;
    Eigen::VectorXd x;
};

/// One replication of the hierarchical model, drawn from a substream keyed by
/// (seed, rep); the stream for a given rep never depends on how many other
/// reps run or in what order. Draw order: shared mean shock, per-arm mean
/// deviations, shared noise shock, per-arm noise deviations.
inline Replication sample_replication(const ModelParams& params, std::uint64_t seed,
                                      std::uint64_t rep) {
    const int p = params.arms();
    const double g2 = params.gamma() * params.gamma();
    const double e2 = params.eta() * params.eta();
    const double s2 = params.sigma2();
    const double sd_shared_mu = std::sqrt(1.0 - g2);
    const double sd_own_mu = params.gamma();
    const double sd_shared_eps = std::sqrt((1.0 - e2) * s2);
    const double sd_own_eps = std::sqrt(e2 * s2);

    std::mt19937_64 rng = substream_engine(seed, rep);
    Replication out{Eigen::VectorXd(p), Eigen::VectorXd(p)};
    const double shared_mu = sd_shared_mu * normal01(rng);
    for (int i = 0; i < p; ++i) out.mu[i] = shared_mu + sd_own_mu * normal01(rng);
    const double shared_eps = sd_shared_eps * normal01(rng);
    for (int i = 0; i < p; ++i)
        out.x[i] = out.mu[i] + shared_eps + sd_own_eps * normal01(rng);
    return out;
}

inline std::vector<Replication> sample_model(const SimConfig& cfg) {
    cfg.validate();
    std::vector<Replication> reps;
    reps.reserve(static_cast<std::size_t>(cfg.n_reps));
    for (std::int64_t r = 0; r < cfg.n_reps; ++r)
        reps.push_back(sample_replication(cfg.params, cfg.seed, static_cast<std::uint64_t>(r)));
    return reps;
}

inline std::vector<WinnerPair> winner_pairs(const SimConfig& cfg) {
    cfg.validate();
    std::vector<WinnerPair> pairs;
    pairs.reserve(static_cast<std::size_t>(cfg.n_reps));
    for (std::int64_t r = 0; r < cfg.n_reps; ++r) {
        const Replication rep =
            sample_replication(cfg.params, cfg.seed, static_cast<std::uint64_t>(r));
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < rep.x.size(); ++i)
            if (rep.x[i] > rep.x[best]) best = i;
        pairs.push_back({rep.mu[best], rep.x[best], static_cast<int>(best)});
    }
    return pairs;
}

struct BinSummary {
    double center;
    double mean;
    std::int64_t count;
    double std_error;
};

/// Empirical conditional mean of the winner's latent effect given its
/// observation, binned on x_star. Bin k covers [k*w - w/2, k*w + w/2) with
/// center k*w; empty bins are omitted.
inline std::vector<BinSummary> binned_conditional_mean(const std::vector<WinnerPair>& pairs,
                                                       double bin_width) {
    if (pairs.empty()) throw invalid_params("binned_conditional_mean: no pairs");
    if (!(bin_width > 0.0)) throw invalid_params("binned_conditional_mean: bin_width must be > 0");
    std::map<std::int64_t, RunningStat> bins;
    for (const WinnerPair& pair : pairs)
        bins[std::llround(pair.x_star / bin_width)].add(pair.mu_star);
    std::vector<BinSummary> out;
    out.reserve(bins.size());
    for (const auto& [index, stat] : bins)
        out.push_back({static_cast<double>(index) * bin_width, stat.mean(), stat.count(),
                       stat.std_error()});
    return out;
}

struct RegressionLine {
    double intercept;
    double slope;
    double predict(double x) const { return intercept + slope * x; }
};

/// Ordinary least squares of mu_star on x_star, two-pass form: means first,
/// then centered cross-moments.
inline RegressionLine regression_fit(const std::vector<WinnerPair>& pairs) {
    if (pairs.size() < 2) throw invalid_params("regression_fit: need at least 2 pairs");
    double sum_x = 0.0, sum_y = 0.0;
    for (const WinnerPair& pair : pairs) {
        sum_x += pair.x_star;
        sum_y += pair.mu_star;
    }
    const double n = static_cast<double>(pairs.size());
    const double mean_x = sum_x / n, mean_y = sum_y / n;
    double sxx = 0.0, sxy = 0.0;
    for (const WinnerPair& pair : pairs) {
        const double dx = pair.x_star - mean_x;
        sxx += dx * dx;
        sxy += dx * (pair.mu_star - mean_y);
    }
    if (sxx == 0.0)
        throw degenerate_design("regression_fit: all x_star values are identical");
    const double slope = sxy / sxx;
    return {mean_y - slope * mean_x, slope};
}

struct RejectionSummary {
    Eigen::VectorXd mean;
    Eigen::VectorXd std_error;
    double acceptance_rate;
    std::uint64_t proposals;
};

/// Brute-force moments of a truncated-from-above Gaussian: propose from the
/// base distribution through its Cholesky factor, keep draws inside the
/// truncation box. Serves as the independent oracle for the analytic
/// truncated moments; deliberately shares no code with that path.
inline RejectionSummary rejection_sample_truncated(const TruncatedAboveSpec& spec,
                                                   std::int64_t n_accepted, std::uint64_t seed,
                                                   std::uint64_t max_proposals = 1000000000ull) {
    if (n_accepted < 1)
        throw invalid_params("rejection_sample_truncated: n_accepted must be >= 1");
    const Eigen::Index n = spec.dim();
    Eigen::LLT<Eigen::MatrixXd> llt(spec.base().cov);
    if (llt.info() != Eigen::Success)
        throw not_positive_definite("rejection_sample_truncated: covariance not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    std::mt19937_64 rng = substream_engine(seed, 0xacce'97ed);
    std::vector<RunningStat> stats(static_cast<std::size_t>(n));
    Eigen::VectorXd z(n), y(n);
    std::uint64_t proposals = 0;
    std::int64_t accepted = 0;
    while (accepted < n_accepted) {
        if (proposals >= max_proposals)
            throw budget_exhausted(
                "rejection_sample_truncated: proposal budget exhausted before collecting "
                "enough acceptances");
        ++proposals;
        for (Eigen::Index i = 0; i < n; ++i) z[i] = normal01(rng);
        y = spec.base().mean + chol * z;
        bool inside = true;
        for (Eigen::Index i = 0; i < n; ++i)
            if (y[i] > spec.upper()[i]) { inside = false; break; }
        if (!inside) continue;
        ++accepted;
        for (Eigen::Index i = 0; i < n; ++i) stats[static_cast<std::size_t>(i)].add(y[i]);
    }

    RejectionSummary out{Eigen::VectorXd(n), Eigen::VectorXd(n),
                         static_cast<double>(accepted) / static_cast<double>(proposals),
                         proposals};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.mean[i] = stats[static_cast<std::size_t>(i)].mean();
        out.std_error[i] = stats[static_cast<std::size_t>(i)].std_error();
    }
    return out;
}

struct MeanWithError {
    double mean;
    double std_error;
    std::int64_t count;
};

/// Residual mu_star - E(mu_star | all observations) per replication. The
/// full-data posterior mean needs no selection adjustment (the selection
/// event is a function of the conditioning data), so the residual mean is
/// zero in expectation for any parameters; this is the simulation check of
/// that fact.
inline MeanWithError paradox_residuals(const SimConfig& cfg) {
    cfg.validate();
    const DerivedConstants k = derive_constants(cfg.params);
    const int p = cfg.params.arms();
    const double winner_weight = k.weights[p - 1];
    const double other_weight = p > 1 ? k.weights[0] : 0.0;

    RunningStat residuals;
    for (std::int64_t r = 0; r < cfg.n_reps; ++r) {
        const Replication rep =
            sample_replication(cfg.params, cfg.seed, static_cast<std::uint64_t>(r));
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < rep.x.size(); ++i)
            if (rep.x[i] > rep.x[best]) best = i;
        // Winner mapped to the last weight slot; the other weights are equal,
        // so their dot product reduces to a sum.
        const double posterior =
            winner_weight * rep.x[best] + other_weight * (rep.x.sum() - rep.x[best]);
        residuals.add(rep.mu[best] - posterior);
    }
    return {residuals.mean(), residuals.std_error(), residuals.count()};
}

}  // namespace selbias
