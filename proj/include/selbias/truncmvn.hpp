#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "selbias/errors.hpp"
#include "selbias/model.hpp"
#include "selbias/mvn.hpp"

namespace selbias {

inline constexpr int truncated_dim_cap = 25;  // plain Phi products underflow past this

/// A Gaussian N(theta, Omega) truncated from above, componentwise, at
/// `upper`. All truncated-distribution quantities work in *centered*
/// coordinates: the truncated variable is W = Y - theta restricted to
/// W_k <= upper_k - theta_k, so marginal densities take centered arguments.
/// The normalizing constant alpha is computed once at construction (by the
/// equicorrelated quadrature when the base carries the tag, else by QMC) and
/// cached; it never changes afterwards.
class TruncatedAboveSpec {
public:
    TruncatedAboveSpec(GaussianSpec base, Eigen::VectorXd upper,
                       QuadratureConfig quad = {}, QmcConfig qmc = {})
        : base_(std::move(base)), upper_(std::move(upper)), quad_(quad), qmc_(qmc) {
        if (upper_.size() != base_.dim())
            throw dimension_mismatch("TruncatedAboveSpec: upper length disagrees with base");
        if (base_.dim() > truncated_dim_cap)
            throw invalid_params("TruncatedAboveSpec: dimension exceeds cap of 25");
        quad_.validate();
        qmc_.validate();

        const Eigen::VectorXd centered = upper_ - base_.mean;
        if (base_.equicorr) {
            alpha_ = mvn_cdf_equicorr(Eigen::VectorXd::Zero(base_.dim()),
                                      base_.equicorr->indep_var, base_.equicorr->shared_var,
                                      centered, quad_);
        } else {
            Eigen::LLT<Eigen::MatrixXd> llt(base_.cov);
            if (llt.info() != Eigen::Success)
                throw not_positive_definite(
                    "TruncatedAboveSpec: covariance is not positive definite");
            GaussianSpec centered_base(Eigen::VectorXd::Zero(base_.dim()), base_.cov);
            alpha_ = mvn_cdf_general(centered_base, centered, qmc_).value;
        }
        if (!(alpha_ >= 1e-300))
            throw degenerate_truncation(
                "TruncatedAboveSpec: truncation region has vanishing mass (alpha < 1e-300)");
    }

    Eigen::Index dim() const { return base_.dim(); }
    const GaussianSpec& base() const { return base_; }
    const Eigen::VectorXd& upper() const { return upper_; }
    const QuadratureConfig& quadrature_config() const { return quad_; }
    const QmcConfig& qmc_config() const { return qmc_; }

    /// Pr(Y_1 <= upper_1, ..., Y_n <= upper_n); cached at construction.
    double alpha() const { return alpha_; }

    /// Truncation bound of coordinate k in centered coordinates.
    double centered_bound(Eigen::Index k) const { return upper_[k] - base_.mean[k]; }

private:
    GaussianSpec base_;
    Eigen::VectorXd upper_;
    QuadratureConfig quad_;
    QmcConfig qmc_;
    double alpha_;
};

/// k-th marginal density of the truncated (centered) vector, evaluated at the
/// centered argument w; zero above the bound. Decomposes as the univariate
/// density of W_k times the conditional orthant probability of the remaining
/// coordinates given W_k = w:
///
///   g_k(w) = phi(w; 0, omega_kk) / alpha
///            * Pr(W_{-k} <= bounds | W_k = w),
///
/// where conditioning shifts the remaining means by (omega_jk / omega_kk) w
/// and the conditional covariance is the Schur complement. For a
/// compound-symmetric base the Schur complement is again compound-symmetric,
/// so the inner probability stays on the exact quadrature path.
inline double marginal_density(const TruncatedAboveSpec& spec, Eigen::Index k, double w) {
    const Eigen::Index n = spec.dim();
    if (k < 0 || k >= n) throw dimension_mismatch("marginal_density: index out of range");
    if (w > spec.centered_bound(k)) return 0.0;

    const double omega_kk = spec.base().cov(k, k);
    const double univariate = norm_pdf(w, omega_kk) / spec.alpha();
    if (n == 1) return univariate;

    if (spec.base().equicorr) {
        const double c = spec.base().equicorr->indep_var;
        const double d = spec.base().equicorr->shared_var;
        Eigen::VectorXd cond_mean(n - 1), bounds(n - 1);
        Eigen::Index j = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == k) continue;
            cond_mean[j] = d / (c + d) * w;
            bounds[j] = spec.centered_bound(i);
            ++j;
        }
        const double cond_shared = c * d / (c + d);
        const double inner =
            mvn_cdf_equicorr(cond_mean, c, cond_shared, bounds, spec.quadrature_config());
        return univariate * inner;
    }

    // General covariance: Schur complement + QMC orthant probability.
    Eigen::VectorXd cross(n - 1), bounds(n - 1);
    Eigen::MatrixXd block(n - 1, n - 1);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i == k) continue;
        cross[row] = spec.base().cov(i, k);
        bounds[row] = spec.centered_bound(i);
        Eigen::Index col = 0;
        for (Eigen::Index l = 0; l < n; ++l) {
            if (l == k) continue;
            block(row, col) = spec.base().cov(i, l);
            ++col;
        }
        ++row;
    }
    Eigen::VectorXd cond_mean = cross * (w / omega_kk);
    Eigen::MatrixXd cond_cov = block - cross * cross.transpose() / omega_kk;
    GaussianSpec conditional(std::move(cond_mean), std::move(cond_cov));
    const double inner = mvn_cdf_general(conditional, bounds, spec.qmc_config()).value;
    return univariate * inner;
}

/// First moments of the truncated distribution in original coordinates:
/// E(Y_i | Y <= upper) = theta_i - sum_k omega_ki g_k(centered bound of k).
inline Eigen::VectorXd truncated_mean(const TruncatedAboveSpec& spec) {
    const Eigen::Index n = spec.dim();
    Eigen::VectorXd densities(n);
    for (Eigen::Index k = 0; k < n; ++k)
        densities[k] = marginal_density(spec, k, spec.centered_bound(k));
    return spec.base().mean - spec.base().cov * densities;
}

}  // namespace selbias
