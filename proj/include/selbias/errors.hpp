#pragma once

#include <stdexcept>
#include <string>

namespace selbias {

// Parameter or dimension violations detected before any numerics run.
struct invalid_params : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct dimension_mismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numeric failures raised while an operation is running.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Adaptive quadrature exhausted its node budget before reaching tolerance.
struct nonconvergence : numeric_error {
    using numeric_error::numeric_error;
};

// Covariance matrix failed a Cholesky factorization.
struct not_positive_definite : numeric_error {
    using numeric_error::numeric_error;
};

// Truncation region carries essentially no probability mass.
struct degenerate_truncation : numeric_error {
    using numeric_error::numeric_error;
};

// Sampler ran out of proposal budget before collecting enough acceptances.
struct budget_exhausted : numeric_error {
    using numeric_error::numeric_error;
};

// Regression design has no variation in the predictor.
struct degenerate_design : numeric_error {
    using numeric_error::numeric_error;
};

}  // namespace selbias
