#pragma once

#include <vector>

#include "deconfuse/tensor.hpp"

namespace deconfuse {

/// Ridge regressor with an unpenalized intercept; weights has O+1 entries,
/// intercept last.
struct RidgeModel {
  std::vector<double> weights;
  double alpha_reg = 1.0;
  bool trained = false;
};

/// Minimizes ||Z w - y||^2 + alpha ||w||^2 (intercept excluded from the
/// penalty) by the normal equations with an LDL^T factorization. A rank
/// deficient system with alpha = 0 raises IllPosedError.
RidgeModel ridge_fit(const Matrix& z, const std::vector<double>& y, double alpha_reg);

std::vector<double> ridge_predict(const RidgeModel& model, const Matrix& z);

/// Ridge strength selection by time-ordered cross validation: the candidate
/// with the smallest mean validation error over `folds` chronological splits
/// wins. Ties go to the larger alpha.
double ridge_cv_alpha(const Matrix& z, const std::vector<double>& y,
                      const std::vector<double>& candidates, std::size_t folds = 5);

}  // namespace deconfuse
