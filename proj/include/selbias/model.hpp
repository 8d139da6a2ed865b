#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>

#include "selbias/errors.hpp"

namespace selbias {

/// Hierarchical normal-normal model for an experiment with `arms` treatment
/// arms. Arm means mu_i share a common component with weight (1 - gamma^2)
/// and carry an idiosyncratic component with variance gamma^2, so each
/// mu_i ~ N(0, 1) marginally. Observations X_i = mu_i + eps_i, where the
/// noise splits the same way: a shared N(0, (1-eta^2) sigma^2) shock plus an
/// independent N(0, eta^2 sigma^2) term. gamma = eta = 1 recovers fully
/// independent arms.
class ModelParams {
public:
    ModelParams(int arms, double gamma, double eta, double sigma)
        : arms_(arms), gamma_(gamma), eta_(eta), sigma_(sigma) {
        if (arms < 2) throw invalid_params("ModelParams: need at least 2 arms");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw invalid_params("ModelParams: gamma must lie in [0, 1]");
        if (!(eta >= 0.0 && eta <= 1.0))
            throw invalid_params("ModelParams: eta must lie in [0, 1]");
        if (!(sigma > 0.0)) throw invalid_params("ModelParams: sigma must be > 0");
        if (gamma == 0.0 && eta == 0.0)
            throw invalid_params(
                "ModelParams: gamma and eta cannot both be 0 (marginal covariance "
                "would be rank one)");
    }

    int arms() const { return arms_; }
    double gamma() const { return gamma_; }
    double eta() const { return eta_; }
    double sigma() const { return sigma_; }
    double sigma2() const { return sigma_ * sigma_; }

private:
    int arms_;
    double gamma_, eta_, sigma_;
};

/// Constants of the marginal law X ~ N(0, idio_var*I + common_var*11') and
/// the posterior weight vector: E(mu_p | X) = weights . X, with the weight on
/// the arm of interest in the last slot.
struct DerivedConstants {
    double idio_var;    // gamma^2 + sigma^2 eta^2
    double common_var;  // (1 - gamma^2) + sigma^2 (1 - eta^2); idio + common = 1 + sigma^2
    Eigen::VectorXd weights;
};

/// Mean and covariance of a multivariate normal. Covariances built by this
/// library are all of the compound-symmetric form indep_var*I + shared_var*11',
/// recorded in `equicorr` at construction; the tag enables the exact 1-D
/// quadrature path for orthant probabilities.
struct EquicorrTag {
    double indep_var;   // coefficient of I, > 0
    double shared_var;  // coefficient of 11', >= 0
};

struct GaussianSpec {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::optional<EquicorrTag> equicorr;

    GaussianSpec(Eigen::VectorXd m, Eigen::MatrixXd c)
        : mean(std::move(m)), cov(std::move(c)) {
        if (cov.rows() != cov.cols() || cov.rows() != mean.size())
            throw dimension_mismatch("GaussianSpec: mean/cov dimensions disagree");
        if (!cov.isApprox(cov.transpose(), 1e-12))
            throw invalid_params("GaussianSpec: covariance must be symmetric");
    }

    static GaussianSpec equicorrelated(Eigen::VectorXd m, double indep_var, double shared_var) {
        if (!(indep_var > 0.0))
            throw invalid_params("GaussianSpec: indep_var must be > 0");
        if (!(shared_var >= 0.0))
            throw invalid_params("GaussianSpec: shared_var must be >= 0");
        const Eigen::Index n = m.size();
        Eigen::MatrixXd c = Eigen::MatrixXd::Constant(n, n, shared_var);
        c.diagonal().array() += indep_var;
        GaussianSpec spec(std::move(m), std::move(c));
        spec.equicorr = EquicorrTag{indep_var, shared_var};
        return spec;
    }

    Eigen::Index dim() const { return mean.size(); }
};

inline DerivedConstants derive_constants(const ModelParams& params) {
    const double g2 = params.gamma() * params.gamma();
    const double e2 = params.eta() * params.eta();
    const double s2 = params.sigma2();
    const int p = params.arms();

    const double a = g2 + s2 * e2;
    const double b = (1.0 - g2) + s2 * (1.0 - e2);
    const double denom = a * (a + p * b);

    Eigen::VectorXd r(p);
    r.setConstant(s2 * (e2 - g2) / denom);
    r[p - 1] = (a + (p - 1) * b * g2) / denom;
    return {a, b, std::move(r)};
}

/// E(mu_p | X_p): univariate shrinkage toward the zero prior mean.
inline double posterior_mean_single(const ModelParams& params, double xp) {
    return xp / (1.0 + params.sigma2());
}

/// E(mu_p | X_1, ..., X_p), with the arm of interest in the last slot of x.
inline double posterior_mean_full(const ModelParams& params, const Eigen::VectorXd& x) {
    if (x.size() != params.arms())
        throw dimension_mismatch("posterior_mean_full: x must have one entry per arm");
    return derive_constants(params).weights.dot(x);
}

/// Law of (X_1, ..., X_{p-1}) given X_p = xp: an exchangeable Gaussian with
/// common mean shrunk from xp and compound-symmetric covariance.
inline GaussianSpec conditional_distribution(const ModelParams& params, double xp) {
    const DerivedConstants k = derive_constants(params);
    const double a = k.idio_var;
    const double b = k.common_var;
    const int n = params.arms() - 1;
    Eigen::VectorXd mean = Eigen::VectorXd::Constant(n, b / (a + b) * xp);
    return GaussianSpec::equicorrelated(std::move(mean), a, a * b / (a + b));
}

}  // namespace selbias
