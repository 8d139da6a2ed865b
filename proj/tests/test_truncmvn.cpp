#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <random>

#include "selbias/normal.hpp"
#include "selbias/quadrature.hpp"
#include "selbias/rng.hpp"
#include "selbias/simulate.hpp"
#include "selbias/truncmvn.hpp"

using namespace selbias;

namespace {

TruncatedAboveSpec random_spec(std::mt19937_64& rng, int n, double min_centered = -1.0) {
    const double c = 0.3 + 2.5 * uniform01(rng);
    const double d = 1.5 * uniform01(rng);
    Eigen::VectorXd theta(n), upper(n);
    const double sd = std::sqrt(c + d);
    for (int i = 0; i < n; ++i) {
        theta[i] = 2.0 * (uniform01(rng) - 0.5);
        upper[i] = theta[i] + sd * (min_centered + (2.2 - min_centered) * uniform01(rng));
    }
    return TruncatedAboveSpec(GaussianSpec::equicorrelated(theta, c, d), upper);
}

}  // namespace

TEST_CASE("normalizing constant") {
    SECTION("univariate median bound") {
        TruncatedAboveSpec spec(
            GaussianSpec::equicorrelated(Eigen::VectorXd::Zero(1), 1.0, 0.0),
            Eigen::VectorXd::Zero(1));
        CHECK(spec.alpha() == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("far bounds leave the distribution untruncated") {
        std::mt19937_64 rng(67);
        for (int trial = 0; trial < 10; ++trial) {
            const int n = 1 + static_cast<int>(rng() % 6);
            Eigen::VectorXd theta(n);
            for (int i = 0; i < n; ++i) theta[i] = uniform01(rng);
            TruncatedAboveSpec spec(GaussianSpec::equicorrelated(theta, 1.0, 0.5),
                                    (theta.array() + 1e6).matrix());
            CHECK(spec.alpha() == Catch::Approx(1.0).margin(1e-10));
        }
    }
    SECTION("matches the rejection-sampling acceptance rate") {
        // Conditional law of nine losing arms given a winner at 3.25, in the
        // ten-arm, sigma=2, gamma^2=0.5, eta=1 model.
        Eigen::VectorXd theta = Eigen::VectorXd::Constant(9, 0.325);
        TruncatedAboveSpec spec(GaussianSpec::equicorrelated(theta, 4.5, 0.45),
                                Eigen::VectorXd::Constant(9, 3.25));
        const RejectionSummary oracle = rejection_sample_truncated(spec, 450000, 71);
        const double se = std::sqrt(spec.alpha() * (1.0 - spec.alpha()) /
                                    static_cast<double>(oracle.proposals));
        CHECK(std::fabs(spec.alpha() - oracle.acceptance_rate) <= 3.0 * se);
    }
    SECTION("degenerate truncation is an error") {
        CHECK_THROWS_AS(
            TruncatedAboveSpec(
                GaussianSpec::equicorrelated(Eigen::VectorXd::Zero(1), 1.0, 0.0),
                Eigen::VectorXd::Constant(1, -40.0)),
            degenerate_truncation);
    }
    SECTION("dimension cap") {
        CHECK_THROWS_AS(
            TruncatedAboveSpec(
                GaussianSpec::equicorrelated(Eigen::VectorXd::Zero(26), 1.0, 0.1),
                Eigen::VectorXd::Zero(26)),
            invalid_params);
    }
    SECTION("cached value is stable and equals a fresh CDF evaluation") {
        std::mt19937_64 rng(73);
        const TruncatedAboveSpec spec = random_spec(rng, 4);
        const double first = spec.alpha();
        const double second = spec.alpha();
        CHECK(std::memcmp(&first, &second, sizeof first) == 0);
        const double fresh = mvn_cdf_equicorr(
            Eigen::VectorXd::Zero(4), spec.base().equicorr->indep_var,
            spec.base().equicorr->shared_var, spec.upper() - spec.base().mean);
        CHECK(first == Catch::Approx(fresh).margin(1e-12));
    }
}

TEST_CASE("marginal density") {
    SECTION("univariate closed form") {
        const double omega = 1.7, bound = 0.6;
        TruncatedAboveSpec spec(
            GaussianSpec::equicorrelated(Eigen::VectorXd::Zero(1), omega, 0.0),
            Eigen::VectorXd::Constant(1, bound));
        for (double w : {-2.0, -0.5, 0.0, 0.3, bound}) {
            const double expected =
                norm_pdf(w / std::sqrt(omega)) / std::sqrt(omega) /
                norm_cdf(bound / std::sqrt(omega));
            CHECK(marginal_density(spec, 0, w) == Catch::Approx(expected).epsilon(1e-10));
        }
        CHECK(marginal_density(spec, 0, bound + 1e-9) == 0.0);
    }
    SECTION("vanishes above the bound and is left-continuous at it") {
        std::mt19937_64 rng(79);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 4);
            const TruncatedAboveSpec spec = random_spec(rng, n);
            const int k = static_cast<int>(rng() % n);
            const double bound = spec.centered_bound(k);
            CHECK(marginal_density(spec, k, bound + 1e-12) == 0.0);
            const double at_bound = marginal_density(spec, k, bound);
            CHECK(at_bound > 0.0);
            CHECK(marginal_density(spec, k, bound - 1e-9) ==
                  Catch::Approx(at_bound).epsilon(1e-6));
        }
    }
    SECTION("integrates to one") {
        std::mt19937_64 rng(83);
        for (int trial = 0; trial < 8; ++trial) {
            const int n = 1 + static_cast<int>(rng() % 6);
            const TruncatedAboveSpec spec = random_spec(rng, n);
            const int k = static_cast<int>(rng() % n);
            const double sd = std::sqrt(spec.base().cov(k, k));
            QuadratureConfig outer;
            outer.abs_tol = 1e-9;
            outer.max_nodes = 1 << 16;
            const double mass = integrate_adaptive(
                [&](double w) { return marginal_density(spec, k, w); }, -40.0 * sd,
                spec.centered_bound(k), outer);
            CHECK(mass == Catch::Approx(1.0).margin(1e-6));
        }
    }
    SECTION("exchangeable specs have identical marginals") {
        std::mt19937_64 rng(89);
        for (int trial = 0; trial < 5; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 4);
            const double c = 0.4 + 2.0 * uniform01(rng);
            const double d = 1.5 * uniform01(rng);
            const double theta = uniform01(rng) - 0.5;
            const double bound = theta + std::sqrt(c + d) * (0.4 + uniform01(rng));
            TruncatedAboveSpec spec(
                GaussianSpec::equicorrelated(Eigen::VectorXd::Constant(n, theta), c, d),
                Eigen::VectorXd::Constant(n, bound));
            for (int rep = 0; rep < 20; ++rep) {
                const double w =
                    spec.centered_bound(0) - 3.0 * std::sqrt(c + d) * uniform01(rng);
                const double reference = marginal_density(spec, 0, w);
                for (int k = 1; k < n; ++k)
                    CHECK(marginal_density(spec, k, w) ==
                          Catch::Approx(reference).margin(1e-10));
            }
        }
    }
    SECTION("index bounds are checked") {
        std::mt19937_64 rng(97);
        const TruncatedAboveSpec spec = random_spec(rng, 3);
        CHECK_THROWS_AS(marginal_density(spec, 3, 0.0), dimension_mismatch);
        CHECK_THROWS_AS(marginal_density(spec, -1, 0.0), dimension_mismatch);
    }
}

TEST_CASE("truncated means") {
    SECTION("univariate half-normal value") {
        TruncatedAboveSpec spec(
            GaussianSpec::equicorrelated(Eigen::VectorXd::Zero(1), 1.0, 0.0),
            Eigen::VectorXd::Zero(1));
        // -phi(0)/Phi(0)
        CHECK(truncated_mean(spec)[0] ==
              Catch::Approx(-0.7978845608028654).epsilon(1e-10));
    }
    SECTION("far bounds recover the base mean") {
        Eigen::VectorXd theta(3);
        theta << -0.4, 0.2, 1.1;
        TruncatedAboveSpec spec(GaussianSpec::equicorrelated(theta, 1.2, 0.6),
                                (theta.array() + 1e6).matrix());
        CHECK(truncated_mean(spec).isApprox(theta, 1e-9));
    }
    SECTION("support bound: every mean sits below its truncation point") {
        std::mt19937_64 rng(101);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = 1 + static_cast<int>(rng() % 5);
            const TruncatedAboveSpec spec = random_spec(rng, n);
            const Eigen::VectorXd mean = truncated_mean(spec);
            for (int i = 0; i < n; ++i) CHECK(mean[i] < spec.upper()[i]);
        }
    }
    SECTION("exchangeable specs have equal components") {
        std::mt19937_64 rng(103);
        for (int trial = 0; trial < 10; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 5);
            const double c = 0.4 + 2.0 * uniform01(rng);
            const double d = 1.5 * uniform01(rng);
            const double bound = 0.3 + uniform01(rng);
            TruncatedAboveSpec spec(
                GaussianSpec::equicorrelated(Eigen::VectorXd::Zero(n), c, d),
                Eigen::VectorXd::Constant(n, bound));
            const Eigen::VectorXd mean = truncated_mean(spec);
            for (int i = 1; i < n; ++i)
                CHECK(mean[i] == Catch::Approx(mean[0]).margin(1e-10));
        }
    }
    SECTION("raising all bounds weakly raises every mean") {
        std::mt19937_64 rng(107);
        for (int trial = 0; trial < 25; ++trial) {
            const int n = 1 + static_cast<int>(rng() % 5);
            const double c = 0.4 + 2.0 * uniform01(rng);
            const double d = 1.5 * uniform01(rng);
            Eigen::VectorXd theta(n), upper(n);
            for (int i = 0; i < n; ++i) {
                theta[i] = uniform01(rng) - 0.5;
                upper[i] = theta[i] + std::sqrt(c + d) * (2.0 * uniform01(rng) - 0.3);
            }
            TruncatedAboveSpec lower_spec(GaussianSpec::equicorrelated(theta, c, d), upper);
            TruncatedAboveSpec higher_spec(
                GaussianSpec::equicorrelated(theta, c, d),
                (upper.array() + 0.2 + uniform01(rng)).matrix());
            const Eigen::VectorXd lower_mean = truncated_mean(lower_spec);
            const Eigen::VectorXd higher_mean = truncated_mean(higher_spec);
            for (int i = 0; i < n; ++i) CHECK(higher_mean[i] >= lower_mean[i] - 1e-8);
        }
    }
    SECTION("matches rejection sampling on random specs") {
        std::mt19937_64 rng(109);
        for (int trial = 0; trial < 6; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 4);
            const TruncatedAboveSpec spec = random_spec(rng, n, 0.0);
            const Eigen::VectorXd analytic = truncated_mean(spec);
            const RejectionSummary oracle =
                rejection_sample_truncated(spec, 200000, 7000 + trial);
            for (int i = 0; i < n; ++i)
                CHECK(std::fabs(analytic[i] - oracle.mean[i]) <=
                      3.0 * oracle.std_error[i]);
        }
    }
}

TEST_CASE("general covariance path") {
    // A deliberately non-equicorrelated base, checked against rejection
    // sampling; the inner orthant probabilities run through the QMC engine.
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, 0.6, 0.6, 2.0;
    Eigen::VectorXd theta(2), upper(2);
    theta << 0.3, -0.2;
    upper << 1.0, 0.8;
    TruncatedAboveSpec spec(GaussianSpec(theta, cov), upper);
    const Eigen::VectorXd analytic = truncated_mean(spec);
    const RejectionSummary oracle = rejection_sample_truncated(spec, 400000, 113);
    for (int i = 0; i < 2; ++i)
        CHECK(std::fabs(analytic[i] - oracle.mean[i]) <=
              3.0 * oracle.std_error[i] + 3e-4);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(
        TruncatedAboveSpec(GaussianSpec::equicorrelated(Eigen::VectorXd::Zero(3), 1.0, 0.2),
                           Eigen::VectorXd::Zero(2)),
        dimension_mismatch);
}
