#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "selbias/mvn.hpp"
#include "selbias/rng.hpp"

using namespace selbias;

namespace {

struct EquicorrInstance {
    Eigen::VectorXd mean, upper;
    double c, d;
};

EquicorrInstance random_instance(std::mt19937_64& rng, int max_dim) {
    const int n = 1 + static_cast<int>(rng() % max_dim);
    EquicorrInstance inst;
    inst.c = 0.3 + 3.0 * uniform01(rng);
    inst.d = 2.0 * uniform01(rng);
    inst.mean.resize(n);
    inst.upper.resize(n);
    const double sd = std::sqrt(inst.c + inst.d);
    for (int i = 0; i < n; ++i) {
        inst.mean[i] = 2.0 * (uniform01(rng) - 0.5);
        inst.upper[i] = inst.mean[i] + sd * (3.0 * uniform01(rng) - 1.0);
    }
    return inst;
}

}  // namespace

TEST_CASE("univariate and independent reductions") {
    CHECK(mvn_cdf_equicorr(Eigen::VectorXd::Zero(1), 1.0, 0.0,
                           Eigen::VectorXd::Zero(1)) == Catch::Approx(0.5).margin(1e-12));

    // shared_var = 0 factorizes over coordinates
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 8);
        const double c = 0.2 + 2.0 * uniform01(rng);
        Eigen::VectorXd mean(n), upper(n);
        double expected = 1.0;
        for (int i = 0; i < n; ++i) {
            mean[i] = uniform01(rng) - 0.5;
            upper[i] = mean[i] + 4.0 * (uniform01(rng) - 0.3);
            expected *= norm_cdf((upper[i] - mean[i]) / std::sqrt(c));
        }
        CHECK(mvn_cdf_equicorr(mean, c, 0.0, upper) ==
              Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("orthant probability of the maximum's marginal law") {
    // p=10 exchangeable observations with unit prior variance and
    // sigma^2 = 4 noise split 4.5/0.5 across idiosyncratic/common parts.
    const double below =
        mvn_cdf_equicorr(Eigen::VectorXd::Zero(10), 4.5, 0.5,
                         Eigen::VectorXd::Constant(10, 3.25));
    CHECK(below == Catch::Approx(0.514).margin(5e-4));
    CHECK(1.0 - below == Catch::Approx(0.486).margin(5e-4));
}

TEST_CASE("monotone in every upper bound") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 60; ++trial) {
        const EquicorrInstance inst = random_instance(rng, 8);
        const double base = mvn_cdf_equicorr(inst.mean, inst.c, inst.d, inst.upper);
        Eigen::VectorXd bumped = inst.upper;
        const int coord = static_cast<int>(rng() % inst.upper.size());
        bumped[coord] += 0.5 + uniform01(rng);
        const double higher = mvn_cdf_equicorr(inst.mean, inst.c, inst.d, bumped);
        CHECK(higher >= base - 1e-10);
    }
}

TEST_CASE("stable under a doubled node budget") {
    std::mt19937_64 rng(47);
    QuadratureConfig base;
    QuadratureConfig doubled;
    doubled.max_nodes = 2 * base.max_nodes;
    for (int trial = 0; trial < 50; ++trial) {
        const EquicorrInstance inst = random_instance(rng, 10);
        const double v1 = mvn_cdf_equicorr(inst.mean, inst.c, inst.d, inst.upper, base);
        const double v2 = mvn_cdf_equicorr(inst.mean, inst.c, inst.d, inst.upper, doubled);
        CHECK(v1 == Catch::Approx(v2).margin(base.abs_tol));
    }
}

TEST_CASE("limits in the bounds") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(mvn_cdf_equicorr(Eigen::VectorXd::Zero(5), 1.0, 0.7,
                           Eigen::VectorXd::Constant(5, 1e6)) ==
          Catch::Approx(1.0).margin(1e-10));
    Eigen::VectorXd upper = Eigen::VectorXd::Constant(5, 2.0);
    upper[2] = -inf;
    CHECK(mvn_cdf_equicorr(Eigen::VectorXd::Zero(5), 1.0, 0.7, upper) ==
          Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("node budget exhaustion surfaces as nonconvergence") {
    QuadratureConfig tight;
    tight.abs_tol = 1e-16;
    tight.max_nodes = 32;
    CHECK_THROWS_AS(mvn_cdf_equicorr(Eigen::VectorXd::Zero(8), 1.0, 0.8,
                                     Eigen::VectorXd::Constant(8, 0.5), tight),
                    nonconvergence);
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(mvn_cdf_equicorr(Eigen::VectorXd::Zero(3), 0.0, 0.5,
                                     Eigen::VectorXd::Zero(3)),
                    invalid_params);
    CHECK_THROWS_AS(mvn_cdf_equicorr(Eigen::VectorXd::Zero(3), 1.0, -0.5,
                                     Eigen::VectorXd::Zero(3)),
                    invalid_params);
    CHECK_THROWS_AS(mvn_cdf_equicorr(Eigen::VectorXd::Zero(3), 1.0, 0.5,
                                     Eigen::VectorXd::Zero(4)),
                    dimension_mismatch);
}

TEST_CASE("QMC engine: diagonal covariance factorizes") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 6);
        Eigen::VectorXd mean(n), upper(n);
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
        double expected = 1.0;
        for (int i = 0; i < n; ++i) {
            mean[i] = uniform01(rng) - 0.5;
            cov(i, i) = 0.3 + 2.0 * uniform01(rng);
            upper[i] = mean[i] + 3.0 * (uniform01(rng) - 0.3);
            expected *= norm_cdf((upper[i] - mean[i]) / std::sqrt(cov(i, i)));
        }
        QmcConfig cfg;
        cfg.seed = 100 + trial;
        const MvnEstimate est = mvn_cdf_general(GaussianSpec(mean, cov), upper, cfg);
        CHECK(std::fabs(est.value - expected) <= std::max(3.0 * est.std_error, 1e-5));
    }
}

TEST_CASE("QMC engine: bivariate orthant closed form") {
    // Pr(X1 <= 0, X2 <= 0) = 1/4 + arcsin(rho)/(2 pi) for standard margins.
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        const double rho = 1.8 * (uniform01(rng) - 0.5);  // (-0.9, 0.9)
        Eigen::MatrixXd cov(2, 2);
        cov << 1.0, rho, rho, 1.0;
        const double expected = 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
        QmcConfig cfg;
        cfg.seed = 500 + trial;
        const MvnEstimate est =
            mvn_cdf_general(GaussianSpec(Eigen::VectorXd::Zero(2), cov),
                            Eigen::VectorXd::Zero(2), cfg);
        CHECK(std::fabs(est.value - expected) <= std::max(3.0 * est.std_error, 1e-5));
    }
}

TEST_CASE("QMC engine agrees with the equicorrelated quadrature") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 25; ++trial) {
        const EquicorrInstance inst = random_instance(rng, 10);
        const double quad = mvn_cdf_equicorr(inst.mean, inst.c, inst.d, inst.upper);
        QmcConfig cfg;
        cfg.seed = 900 + trial;
        const MvnEstimate est = mvn_cdf_general(
            GaussianSpec::equicorrelated(inst.mean, inst.c, inst.d), inst.upper, cfg);
        CHECK(std::fabs(est.value - quad) <= std::max(3.0 * est.std_error, 1e-4));
    }
}

TEST_CASE("QMC engine rejects a singular covariance") {
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, 1.0, 1.0, 1.0;  // rank one
    CHECK_THROWS_AS(mvn_cdf_general(GaussianSpec(Eigen::VectorXd::Zero(2), cov),
                                    Eigen::VectorXd::Zero(2)),
                    not_positive_definite);
}

TEST_CASE("QMC configuration validation") {
    QmcConfig bad_samples;
    bad_samples.samples = 512;
    CHECK_THROWS_AS(mvn_cdf_general(GaussianSpec(Eigen::VectorXd::Zero(2),
                                                 Eigen::MatrixXd::Identity(2, 2)),
                                    Eigen::VectorXd::Zero(2), bad_samples),
                    invalid_params);
    QmcConfig bad_reps;
    bad_reps.replicates = 1;
    CHECK_THROWS_AS(mvn_cdf_general(GaussianSpec(Eigen::VectorXd::Zero(2),
                                                 Eigen::MatrixXd::Identity(2, 2)),
                                    Eigen::VectorXd::Zero(2), bad_reps),
                    invalid_params);
}
