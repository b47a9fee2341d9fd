#include "deconfuse/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace deconfuse {

namespace {

// Orthogonalizes the columns of b in place by plane rotations, accumulating
// them into v. Standard one-sided Jacobi; converges in a handful of sweeps
// for the matrix sizes in this project.
void jacobi_sweep_until_converged(Matrix& b, Matrix& v) {
  const std::size_t m = b.cols;
  const std::size_t n = b.rows;
  const double tol = 1e-15;
  const int max_sweeps = 60;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double bp = b.at(i, p), bq = b.at(i, q);
          alpha += bp * bp;
          beta += bq * bq;
          gamma += bp * bq;
        }
        if (alpha == 0.0 && beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        for (std::size_t i = 0; i < n; ++i) {
          const double bp = b.at(i, p), bq = b.at(i, q);
          b.at(i, p) = c * bp - s * bq;
          b.at(i, q) = s * bp + c * bq;
        }
        for (std::size_t i = 0; i < m; ++i) {
          const double vp = v.at(i, p), vq = v.at(i, q);
          v.at(i, p) = c * vp - s * vq;
          v.at(i, q) = s * vp + c * vq;
        }
        rotated = true;
      }
    }
    if (!rotated) break;
  }
}

}  // namespace

SvdResult svd(const Matrix& a) {
  if (a.rows == 0 || a.cols == 0) throw ShapeError("svd: empty matrix");

  // Work with the tall orientation so the rotated side has min(n, m) columns.
  const bool transposed = a.rows < a.cols;
  Matrix b = a;
  if (transposed) {
    b = Matrix(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < a.cols; ++j) b.at(j, i) = a.at(i, j);
  }
  const std::size_t n = b.rows;
  const std::size_t r = b.cols;

  Matrix v = Matrix::identity(r);
  jacobi_sweep_until_converged(b, v);

  std::vector<double> sigma(r, 0.0);
  double sigma_max = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm_sq += b.at(i, j) * b.at(i, j);
    sigma[j] = std::sqrt(norm_sq);
    sigma_max = std::max(sigma_max, sigma[j]);
  }

  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out;
  out.singular_values.resize(r);
  out.left_vectors = Matrix(n, r);
  out.right_vectors = Matrix(r, r);
  const double zero_cutoff = sigma_max * 1e-14;
  for (std::size_t jj = 0; jj < r; ++jj) {
    const std::size_t j = order[jj];
    out.singular_values[jj] = sigma[j];
    if (sigma[j] > zero_cutoff && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < n; ++i) out.left_vectors.at(i, jj) = b.at(i, j) / sigma[j];
    }
    for (std::size_t i = 0; i < r; ++i) out.right_vectors.at(i, jj) = v.at(i, j);
  }

  if (transposed) std::swap(out.left_vectors, out.right_vectors);
  return out;
}

namespace {

bool is_all_zero(const Matrix& t) {
  for (double x : t.v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

double logdet_rect(const Matrix& t, double sv_floor) {
  if (is_all_zero(t)) throw DegenerateTransformError("logdet of an all-zero transform");
  const SvdResult s = svd(t);
  double acc = 0.0;
  for (double sigma : s.singular_values) acc += std::log(std::max(sigma, sv_floor));
  return acc;
}

Matrix logdet_gradient(const Matrix& t, double sv_floor) {
  return logdet_value_gradient(t, sv_floor).gradient;
}

LogdetValueGrad logdet_value_gradient(const Matrix& t, double sv_floor) {
  if (is_all_zero(t)) throw DegenerateTransformError("logdet of an all-zero transform");
  const SvdResult s = svd(t);

  LogdetValueGrad out;
  out.gradient = Matrix(t.rows, t.cols);
  const std::size_t r = s.singular_values.size();
  for (std::size_t j = 0; j < r; ++j) {
    const double sigma = s.singular_values[j];
    out.value += std::log(std::max(sigma, sv_floor));
    if (sigma == 0.0) continue;  // zeroed factor column, no direction to credit
    const double inv = 1.0 / std::max(sigma, sv_floor);
    for (std::size_t i = 0; i < t.rows; ++i) {
      const double ui = s.left_vectors.at(i, j) * inv;
      if (ui == 0.0) continue;
      for (std::size_t k = 0; k < t.cols; ++k)
        out.gradient.at(i, k) += ui * s.right_vectors.at(k, j);
    }
  }
  return out;
}

}  // namespace deconfuse
