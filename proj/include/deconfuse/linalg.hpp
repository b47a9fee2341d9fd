#pragma once

#include <vector>

#include "deconfuse/tensor.hpp"

namespace deconfuse {

/// Floor applied to singular values inside the log-det penalty and its
/// gradient. Keeps the objective finite and the gradient bounded for
/// near-singular transforms.
inline constexpr double kSvFloor = 1e-4;

/// Thin SVD A = U * diag(s) * V^T with U (n x r), V (m x r), r = min(n, m),
/// singular values sorted descending.
struct SvdResult {
  std::vector<double> singular_values;
  Matrix left_vectors;
  Matrix right_vectors;
};

/// One-sided Jacobi SVD. Accurate to near machine precision for the small
/// dense matrices used here; columns belonging to numerically zero singular
/// values are left as zero vectors.
SvdResult svd(const Matrix& a);

/// Sum of log(max(sigma_i, floor)) over all singular values of T.
/// Throws DegenerateTransformError for an all-zero matrix.
double logdet_rect(const Matrix& t, double sv_floor = kSvFloor);

/// Analytic gradient U * diag(1 / max(sigma_i, floor)) * V^T. Finite
/// everywhere thanks to the floor; directions with numerically zero
/// singular values contribute nothing.
Matrix logdet_gradient(const Matrix& t, double sv_floor = kSvFloor);

/// Both of the above from one factorization (the optimizer hot path).
struct LogdetValueGrad {
  double value = 0.0;
  Matrix gradient;
};
LogdetValueGrad logdet_value_gradient(const Matrix& t, double sv_floor = kSvFloor);

}  // namespace deconfuse
