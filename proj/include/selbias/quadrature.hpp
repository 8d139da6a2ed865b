#pragma once

#include <cmath>
#include <queue>

#include "selbias/errors.hpp"

namespace selbias {

struct QuadratureConfig {
    double abs_tol = 1e-10;
    int max_nodes = 4096;               // budget of integrand evaluations
    double integration_halfwidth = 8.5; // in standard deviations, for CDF reductions

    void validate() const {
        if (!(abs_tol > 0.0)) throw invalid_params("QuadratureConfig: abs_tol must be > 0");
        if (max_nodes < 32) throw invalid_params("QuadratureConfig: max_nodes must be >= 32");
    }
};

namespace detail {

// 15-point Kronrod / 7-point Gauss pair on (-1, 1). Abscissae and weights
// from QUADPACK dqk15 (Fullerton's 80-digit evaluations).
inline constexpr double gk15_nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double gk15_kronrod_w[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double gk15_gauss_w[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkEstimate {
    double integral;
    double error;
};

template <class F>
GkEstimate gauss_kronrod_15(const F& f, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = f(center);
    double kronrod = gk15_kronrod_w[7] * fc;
    double gauss = gk15_gauss_w[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = half * gk15_nodes[j];
        const double fsum = f(center - dx) + f(center + dx);
        kronrod += gk15_kronrod_w[j] * fsum;
        if (j % 2 == 1) gauss += gk15_gauss_w[j / 2] * fsum;
    }
    return {kronrod * half, std::fabs(kronrod - gauss) * half};
}

struct Interval {
    double lo, hi, integral, error;
    bool operator<(const Interval& other) const { return error < other.error; }
};

}  // namespace detail

// Adaptive Gauss-Kronrod integration of f over [lo, hi] to absolute tolerance.
// Splits the interval with the largest error estimate until the summed error
// estimate drops below abs_tol or the node budget runs out.
template <class F>
double integrate_adaptive(const F& f, double lo, double hi, const QuadratureConfig& cfg = {}) {
    cfg.validate();
    if (lo >= hi) return 0.0;

    std::priority_queue<detail::Interval> intervals;
    auto first = detail::gauss_kronrod_15(f, lo, hi);
    intervals.push({lo, hi, first.integral, first.error});
    int nodes_used = 15;
    double total_error = first.error;

    while (total_error > cfg.abs_tol) {
        if (nodes_used + 30 > cfg.max_nodes) {
            throw nonconvergence(
                "integrate_adaptive: node budget exhausted before reaching abs_tol");
        }
        detail::Interval worst = intervals.top();
        intervals.pop();
        total_error -= worst.error;
        const double mid = 0.5 * (worst.lo + worst.hi);
        auto left = detail::gauss_kronrod_15(f, worst.lo, mid);
        auto right = detail::gauss_kronrod_15(f, mid, worst.hi);
        nodes_used += 30;
        intervals.push({worst.lo, mid, left.integral, left.error});
        intervals.push({mid, worst.hi, right.integral, right.error});
        total_error += left.error + right.error;
    }

    double sum = 0.0, comp = 0.0;  // Neumaier compensated sum of panel integrals
    while (!intervals.empty()) {
        const double v = intervals.top().integral;
        intervals.pop();
        const double t = sum + v;
        comp += (std::fabs(sum) >= std::fabs(v)) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

}  // namespace selbias
