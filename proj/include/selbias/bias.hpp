#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "selbias/errors.hpp"
#include "selbias/model.hpp"
#include "selbias/truncmvn.hpp"

namespace selbias {

/// One winner's-curse query: how much does the naive posterior mean of the
/// best-looking arm overstate (or understate) the mean that correctly
/// conditions on that arm having come out on top.
struct BiasReport {
    ModelParams params;
    double xp;                      // the selected (largest) observation
    double naive_mean;              // E(mu | X = xp), ignoring selection
    double delta;                   // selection bias
    double lambda;                  // post-selection mean, = naive_mean - delta
    double marginal_density_value;  // common value of the truncated marginals at the bound
    double alpha;                   // mass of the truncation region

    // Proof-internal diagnostics, not part of the stable API: the downward
    // shift delta_i of a losing arm's conditional mean, and that mean itself,
    // E(X_i | X_p = xp, X_p largest) = (common/(idio+common)) xp - delta_i.
    double loser_shift;
    double loser_conditional_mean;
};

/// Selection bias Delta = E(mu | X = xp) - E(mu | X = xp, X largest) for the
/// arm observed at the maximum xp. Conditional on the winner's value, the
/// losing arms form an exchangeable Gaussian truncated above at xp; the bias
/// is proportional to the common value of the truncated marginal densities at
/// their bound:
///
///   Delta = sigma^2 (eta^2 - gamma^2) / (1 + sigma^2)
///           * (p - 1) * g(centered bound),
///
/// where g is any one of the (identical) marginals and the centered bound is
/// idio/(idio+common) * xp. `use_sum_form` evaluates every marginal
/// separately instead of exploiting exchangeability; it exists as a
/// cross-check of the fast path.
inline BiasReport selection_bias(const ModelParams& params, double xp,
                                 const QuadratureConfig& cfg = {},
                                 bool use_sum_form = false) {
    if (!std::isfinite(xp)) throw invalid_params("selection_bias: xp must be finite");

    const DerivedConstants k = derive_constants(params);
    const double a = k.idio_var;
    const double b = k.common_var;
    const int losers = params.arms() - 1;
    const double g2 = params.gamma() * params.gamma();
    const double e2 = params.eta() * params.eta();
    const double prefactor = params.sigma2() * (e2 - g2) / (1.0 + params.sigma2());

    GaussianSpec conditional = conditional_distribution(params, xp);
    TruncatedAboveSpec truncated(std::move(conditional),
                                 Eigen::VectorXd::Constant(losers, xp), cfg);
    // The density argument idio/(idio+common) * xp is exactly the centered
    // truncation bound; take it from the spec so the two agree to the ulp.
    double density_sum;
    if (use_sum_form) {
        density_sum = 0.0;
        for (Eigen::Index i = 0; i < losers; ++i)
            density_sum += marginal_density(truncated, i, truncated.centered_bound(i));
    } else {
        density_sum = losers * marginal_density(truncated, 0, truncated.centered_bound(0));
    }
    const double density = density_sum / losers;
    const double delta = prefactor * density_sum;
    const double naive = posterior_mean_single(params, xp);
    const double loser_shift = (a * b / (a + b) * losers + a) * density;

    return {params,
            xp,
            naive,
            delta,
            naive - delta,
            density,
            truncated.alpha(),
            loser_shift,
            b / (a + b) * xp - loser_shift};
}

/// Post-selection posterior mean lambda = naive mean minus selection bias.
inline double post_selection_mean(const ModelParams& params, double xp,
                                  const QuadratureConfig& cfg = {}) {
    return selection_bias(params, xp, cfg).lambda;
}

/// Winner and its value from raw observations; ties break to the lowest
/// index (they have probability zero under the model, but a deterministic
/// rule keeps runs reproducible).
inline std::pair<Eigen::Index, double> select_winner(const Eigen::VectorXd& x) {
    if (x.size() == 0) throw dimension_mismatch("select_winner: empty observation vector");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < x.size(); ++i)
        if (x[i] > x[best]) best = i;
    return {best, x[best]};
}

/// Convenience entry point taking the raw observation vector instead of the
/// already-identified maximum.
inline BiasReport selection_bias_from_observations(const ModelParams& params,
                                                   const Eigen::VectorXd& x,
                                                   const QuadratureConfig& cfg = {}) {
    if (x.size() != params.arms())
        throw dimension_mismatch(
            "selection_bias_from_observations: need one observation per arm");
    return selection_bias(params, select_winner(x).second, cfg);
}

/// Pr(max_i X_i > x) under the marginal law X ~ N(0, idio*I + common*11').
inline double max_exceedance_probability(const ModelParams& params, double x,
                                         const QuadratureConfig& cfg = {}) {
    if (std::isnan(x)) throw invalid_params("max_exceedance_probability: x is NaN");
    if (x == std::numeric_limits<double>::infinity()) return 0.0;
    if (x == -std::numeric_limits<double>::infinity()) return 1.0;
    const DerivedConstants k = derive_constants(params);
    const int p = params.arms();
    const double below =
        mvn_cdf_equicorr(Eigen::VectorXd::Zero(p), k.idio_var, k.common_var,
                         Eigen::VectorXd::Constant(p, x), cfg);
    return 1.0 - below;
}

/// Full grid of bias reports: one row per (case, arms, xp) combination, rows
/// ordered by case as given, then arms ascending, then xp ascending. Suitable
/// for plotting bias profiles across panel sizes.
inline std::vector<BiasReport> bias_table(double sigma, std::vector<int> arms_list,
                                          std::vector<double> xp_list,
                                          const std::vector<std::pair<double, double>>& cases,
                                          const QuadratureConfig& cfg = {}) {
    std::sort(arms_list.begin(), arms_list.end());
    std::sort(xp_list.begin(), xp_list.end());
    std::vector<BiasReport> rows;
    rows.reserve(cases.size() * arms_list.size() * xp_list.size());
    for (const auto& [gamma, eta] : cases)
        for (int arms : arms_list)
            for (double xp : xp_list)
                rows.push_back(selection_bias(ModelParams(arms, gamma, eta, sigma), xp, cfg));
    return rows;
}

}  // namespace selbias
