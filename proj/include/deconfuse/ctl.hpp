#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "deconfuse/linalg.hpp"
#include "deconfuse/tensor.hpp"

namespace deconfuse {

/// Feature penalty Psi. The two supported training penalties keep the prox
/// in closed form; `none` exists for reference comparisons against plain
/// alternating least squares.
struct Penalty {
  enum class Kind { none, nonneg, nonneg_plus_l1 };
  Kind kind = Kind::nonneg;
  double l1_weight = 0.0;

  static Penalty none() { return {Kind::none, 0.0}; }
  static Penalty nonneg() { return {Kind::nonneg, 0.0}; }
  static Penalty nonneg_plus_l1(double weight) { return {Kind::nonneg_plus_l1, weight}; }

  bool constrains_sign() const { return kind != Kind::none; }

  double prox(double v) const {
    switch (kind) {
      case Kind::none:
        return v;
      case Kind::nonneg:
        return v > 0.0 ? v : 0.0;
      case Kind::nonneg_plus_l1: {
        const double shifted = v - l1_weight;
        return shifted > 0.0 ? shifted : 0.0;
      }
    }
    return v;
  }
};

/// One-layer convolutional transform learning instance: samples S
/// (K x 1 x D), M filters of size P, ridge weight mu and log-det weight
/// lambda. Features use valid convolution (stride 1, no padding).
struct CtlProblem {
  Tensor3 samples;
  std::size_t num_filters = 1;
  std::size_t kernel_size = 1;
  double mu = 0.01;
  double lambda = 0.01;
  Penalty penalty;
  double sv_floor = kSvFloor;

  void validate() const;
  std::size_t feature_length() const { return samples.length - kernel_size + 1; }
};

struct CtlState {
  FilterBank transforms;              // M x 1 x P
  Tensor3 features;                   // K x M x D_out
  std::vector<double> objective_history;
};

/// Objective value with the indicator reported as a feasibility flag rather
/// than an infinite float. `value` contains the smooth terms plus the l1
/// part; `feasible` is false when X has a negative entry.
struct CtlObjective {
  double value = 0.0;
  bool feasible = true;
};

CtlObjective ctl_objective(const CtlState& state, const CtlProblem& problem);

/// Closed-form feature update: prox of Psi applied elementwise to T * S
/// (the exact block minimizer, relu(T * S) for the plain indicator).
Tensor3 x_update(const FilterBank& transforms, const Tensor3& samples, const Penalty& penalty);

/// Proximal point of gamma1 * F(., X) at the current transforms, computed by
/// an inner gradient descent with backtracking (no closed form exists because
/// of the log-det term). Gradient-norm tolerance 1e-6, at most 200 inner
/// iterations; never returns a point worse than the starting one.
FilterBank t_update(const CtlState& state, const CtlProblem& problem, double gamma1);

struct CtlFitOptions {
  std::size_t iters = 50;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  std::uint64_t seed = 0;
  std::ostream* trace = nullptr;  // optional CSV: iteration,objective,residual,logdet
};

/// Alternating proximal minimization of the one-layer objective. The history
/// holds the initial objective followed by one value per iteration and is
/// nonincreasing up to inner-solver tolerance.
CtlState ctl_fit(const CtlProblem& problem, const CtlFitOptions& options);

}  // namespace deconfuse
