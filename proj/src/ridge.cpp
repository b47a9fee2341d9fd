#include "deconfuse/ridge.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace deconfuse {

namespace {

// Solves the SPD system a x = b in place via LDL^T. Returns false when a
// pivot collapses (rank-deficient normal equations).
bool ldlt_solve(Matrix a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = a.rows;
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a.at(i, i)));
  const double pivot_floor = std::max(scale, 1.0) * 1e-12;

  std::vector<double> d(n, 0.0);
  // a's strict lower triangle accumulates L
  for (std::size_t j = 0; j < n; ++j) {
    double dj = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) dj -= a.at(j, k) * a.at(j, k) * d[k];
    if (std::abs(dj) <= pivot_floor) return false;
    d[j] = dj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double lij = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) lij -= a.at(i, k) * a.at(j, k) * d[k];
      a.at(i, j) = lij / dj;
    }
  }

  // forward solve L y = b, diagonal, then back solve L^T x = y
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < i; ++k) b[i] -= a.at(i, k) * b[k];
  for (std::size_t i = 0; i < n; ++i) b[i] /= d[i];
  for (std::size_t ii = n; ii-- > 0;)
    for (std::size_t k = ii + 1; k < n; ++k) b[ii] -= a.at(k, ii) * b[k];

  x = std::move(b);
  return true;
}

}  // namespace

RidgeModel ridge_fit(const Matrix& z, const std::vector<double>& y, double alpha_reg) {
  if (z.rows < 2) throw std::invalid_argument("ridge_fit: need at least two rows");
  if (y.size() != z.rows) throw ShapeError("ridge_fit: target length != row count");
  if (alpha_reg < 0.0) throw std::invalid_argument("ridge_fit: alpha_reg must be >= 0");

  const std::size_t o = z.cols;
  const std::size_t n = o + 1;  // + intercept

  // normal equations on the augmented design [Z 1]
  Matrix gram(n, n);
  std::vector<double> rhs(n, 0.0);
  for (std::size_t k = 0; k < z.rows; ++k) {
    const double* row = z.row(k);
    for (std::size_t i = 0; i < o; ++i) {
      for (std::size_t j = i; j < o; ++j) gram.at(i, j) += row[i] * row[j];
      gram.at(i, o) += row[i];
      rhs[i] += row[i] * y[k];
    }
    rhs[o] += y[k];
  }
  gram.at(o, o) = static_cast<double>(z.rows);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) gram.at(i, j) = gram.at(j, i);
  for (std::size_t i = 0; i < o; ++i) gram.at(i, i) += alpha_reg;  // intercept unpenalized

  RidgeModel model;
  model.alpha_reg = alpha_reg;
  if (!ldlt_solve(std::move(gram), std::move(rhs), model.weights)) {
    if (alpha_reg == 0.0)
      throw IllPosedError(
          "ridge_fit: rank-deficient system with alpha_reg = 0; use alpha_reg > 0");
    throw IllPosedError("ridge_fit: normal equations could not be factorized");
  }
  model.trained = true;
  return model;
}

std::vector<double> ridge_predict(const RidgeModel& model, const Matrix& z) {
  if (!model.trained) throw std::invalid_argument("ridge_predict: model is not trained");
  if (z.cols + 1 != model.weights.size())
    throw ShapeError("ridge_predict: feature width " + std::to_string(z.cols) +
                     " does not match model (" + std::to_string(model.weights.size() - 1) + ")");
  std::vector<double> out(z.rows, model.weights.back());
  for (std::size_t k = 0; k < z.rows; ++k) {
    const double* row = z.row(k);
    for (std::size_t i = 0; i < z.cols; ++i) out[k] += row[i] * model.weights[i];
  }
  return out;
}

double ridge_cv_alpha(const Matrix& z, const std::vector<double>& y,
                      const std::vector<double>& candidates, std::size_t folds) {
  if (candidates.empty()) throw std::invalid_argument("ridge_cv_alpha: no candidates");
  if (folds < 2) throw std::invalid_argument("ridge_cv_alpha: need at least two folds");

  double best_alpha = candidates.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (const double alpha : candidates) {
    double err = 0.0;
    std::size_t count = 0;
    // chronological splits: train on [0, cut), validate on [cut, next)
    for (std::size_t f = 1; f < folds; ++f) {
      const std::size_t cut = z.rows * f / folds;
      const std::size_t end = z.rows * (f + 1) / folds;
      if (cut < 2 || end <= cut) continue;
      Matrix train(cut, z.cols);
      std::copy(z.v.begin(), z.v.begin() + static_cast<std::ptrdiff_t>(cut * z.cols),
                train.v.begin());
      const std::vector<double> y_train(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(cut));
      RidgeModel model;
      try {
        model = ridge_fit(train, y_train, alpha);
      } catch (const IllPosedError&) {
        err = std::numeric_limits<double>::infinity();
        break;
      }
      Matrix val(end - cut, z.cols);
      std::copy(z.v.begin() + static_cast<std::ptrdiff_t>(cut * z.cols),
                z.v.begin() + static_cast<std::ptrdiff_t>(end * z.cols), val.v.begin());
      const std::vector<double> pred = ridge_predict(model, val);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - y[cut + i];
        err += r * r;
        ++count;
      }
    }
    if (count > 0) err /= static_cast<double>(count);
    if (err < best_err || (err == best_err && alpha > best_alpha)) {
      best_err = err;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

}  // namespace deconfuse
