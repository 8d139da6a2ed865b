#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "selbias/errors.hpp"
#include "selbias/model.hpp"
#include "selbias/normal.hpp"
#include "selbias/quadrature.hpp"
#include "selbias/rng.hpp"

namespace selbias {

struct QmcConfig {
    std::size_t samples = std::size_t{1} << 16;  // total budget across replicates
    int replicates = 8;                          // for the spread-based error estimate
    std::uint64_t seed = 0;

    void validate() const {
        if (samples < 1024) throw invalid_params("QmcConfig: samples must be >= 1024");
        if (replicates < 2) throw invalid_params("QmcConfig: replicates must be >= 2");
    }
};

struct MvnEstimate {
    double value;
    double std_error;
};

namespace detail {

inline double clamp_probability(double raw, double abs_tol, const char* who) {
    if (raw < -abs_tol || raw > 1.0 + abs_tol)
        throw numeric_error(std::string(who) + ": probability estimate outside [0, 1] "
                            "beyond tolerance");
    return std::clamp(raw, 0.0, 1.0);
}

}  // namespace detail

// Pr(Y_1 <= u_1, ..., Y_n <= u_n) for Y ~ N(mean, c*I + d*11') with c > 0,
// d >= 0. The shared factor gives Y_i = mean_i + sqrt(d) Z + sqrt(c) W_i with
// Z, W_i independent standard normals, so the orthant probability collapses
// to a single integral over Z:
//
//   Pr = Integral phi(z) prod_i Phi((u_i - mean_i - sqrt(d) z) / sqrt(c)) dz,
//
// evaluated by adaptive Gauss-Kronrod on |z| <= halfwidth (the discarded
// tails carry less than 2*Phi(-8.5) < 2e-17 of mass).
inline double mvn_cdf_equicorr(const Eigen::VectorXd& mean, double indep_var,
                               double shared_var, const Eigen::VectorXd& upper,
                               const QuadratureConfig& cfg = {}) {
    cfg.validate();
    if (mean.size() != upper.size())
        throw dimension_mismatch("mvn_cdf_equicorr: mean/upper lengths disagree");
    if (mean.size() == 0) throw invalid_params("mvn_cdf_equicorr: empty input");
    if (!(indep_var > 0.0)) throw invalid_params("mvn_cdf_equicorr: indep_var must be > 0");
    if (!(shared_var >= 0.0)) throw invalid_params("mvn_cdf_equicorr: shared_var must be >= 0");

    const Eigen::VectorXd t = upper - mean;
    const double sqrt_c = std::sqrt(indep_var);

    if (shared_var == 0.0) {
        double prob = 1.0;
        for (Eigen::Index i = 0; i < t.size(); ++i) prob *= norm_cdf(t[i] / sqrt_c);
        return detail::clamp_probability(prob, cfg.abs_tol, "mvn_cdf_equicorr");
    }

    const double sqrt_d = std::sqrt(shared_var);
    const auto integrand = [&](double z) {
        double value = norm_pdf(z);
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            value *= norm_cdf((t[i] - sqrt_d * z) / sqrt_c);
            if (value == 0.0) break;
        }
        return value;
    };
    double raw;
    try {
        raw = integrate_adaptive(integrand, -cfg.integration_halfwidth,
                                 cfg.integration_halfwidth, cfg);
    } catch (const nonconvergence&) {
        throw nonconvergence("mvn_cdf_equicorr: quadrature node budget exhausted");
    }
    return detail::clamp_probability(raw, cfg.abs_tol, "mvn_cdf_equicorr");
}

namespace detail {

inline std::vector<double> sqrt_prime_fractions(int count) {
    std::vector<int> primes;
    for (int c = 2; static_cast<int>(primes.size()) < count; ++c) {
        bool is_prime = true;
        for (int q : primes)
            if (c % q == 0) { is_prime = false; break; }
        if (is_prime) primes.push_back(c);
    }
    std::vector<double> alphas(count);
    for (int i = 0; i < count; ++i) {
        double frac = std::sqrt(static_cast<double>(primes[i]));
        alphas[i] = frac - std::floor(frac);
    }
    return alphas;
}

}  // namespace detail

// Pr(X <= upper) for a general positive-definite covariance, by the
// separation-of-variables transform of Genz (1992): after a Cholesky
// factorization the orthant probability becomes an integral over the unit
// cube, sampled here with a Richtmyer (sqrt-prime Kronecker) sequence under
// `replicates` independent random shifts. The replicate spread yields the
// standard error. This path is the cross-check oracle for mvn_cdf_equicorr;
// the equicorrelated quadrature is the production route.
inline MvnEstimate mvn_cdf_general(const GaussianSpec& spec, const Eigen::VectorXd& upper,
                                   const QmcConfig& cfg = {}) {
    cfg.validate();
    const Eigen::Index n = spec.dim();
    if (upper.size() != n)
        throw dimension_mismatch("mvn_cdf_general: upper length disagrees with spec");
    if (n == 0) throw invalid_params("mvn_cdf_general: empty input");

    Eigen::LLT<Eigen::MatrixXd> llt(spec.cov);
    if (llt.info() != Eigen::Success)
        throw not_positive_definite("mvn_cdf_general: covariance is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();
    const Eigen::VectorXd b = upper - spec.mean;

    const double first = norm_cdf(b[0] / chol(0, 0));
    if (n == 1) return {detail::clamp_probability(first, 1e-12, "mvn_cdf_general"), 0.0};

    const int dims = static_cast<int>(n) - 1;
    const std::vector<double> alphas = detail::sqrt_prime_fractions(dims);
    const std::size_t per_replicate =
        std::max<std::size_t>(1, cfg.samples / static_cast<std::size_t>(cfg.replicates));

    std::mt19937_64 shift_rng = substream_engine(cfg.seed, 0x71bc'9d03);
    std::vector<double> shift(dims), w(dims), y(n - 1);
    RunningStat replicate_means;

    for (int rep = 0; rep < cfg.replicates; ++rep) {
        for (double& s : shift) s = uniform01(shift_rng);
        double sum = 0.0, comp = 0.0;
        for (std::size_t j = 1; j <= per_replicate; ++j) {
            for (int k = 0; k < dims; ++k) {
                const double v = static_cast<double>(j) * alphas[k] + shift[k];
                w[k] = v - std::floor(v);
            }
            double e = first;
            double prob = e;
            for (Eigen::Index i = 1; i < n; ++i) {
                const double u = std::clamp(w[i - 1] * e, 1e-100, 1.0 - 1e-16);
                y[i - 1] = norm_quantile(u);
                double shifted = b[i];
                for (Eigen::Index k = 0; k < i; ++k) shifted -= chol(i, k) * y[k];
                e = norm_cdf(shifted / chol(i, i));
                prob *= e;
                if (prob == 0.0) break;
            }
            const double t = sum + prob;  // Neumaier compensation
            comp += (std::fabs(sum) >= std::fabs(prob)) ? (sum - t) + prob : (prob - t) + sum;
            sum = t;
        }
        replicate_means.add((sum + comp) / static_cast<double>(per_replicate));
    }

    return {detail::clamp_probability(replicate_means.mean(), 1e-9, "mvn_cdf_general"),
            replicate_means.std_error()};
}

}  // namespace selbias
