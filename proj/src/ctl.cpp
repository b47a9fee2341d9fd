#include "deconfuse/ctl.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "deconfuse/kernels.hpp"
#include "deconfuse/rng.hpp"

namespace deconfuse {

void CtlProblem::validate() const {
  if (samples.samples < 1) throw std::invalid_argument("ctl: need at least one sample");
  if (samples.channels != 1) throw ShapeError("ctl: samples must be single-channel");
  if (num_filters < 1) throw std::invalid_argument("ctl: need at least one filter");
  if (kernel_size < 1 || kernel_size > samples.length)
    throw std::invalid_argument("ctl: kernel size must be in [1, D]");
  if (mu < 0.0 || lambda < 0.0) throw std::invalid_argument("ctl: mu and lambda must be >= 0");
}

namespace {

double penalty_value(const Tensor3& x, const Penalty& penalty) {
  if (penalty.kind != Penalty::Kind::nonneg_plus_l1) return 0.0;
  double acc = 0.0;
  for (double v : x.v) acc += std::abs(v);
  return penalty.l1_weight * acc;
}

bool feasible_features(const Tensor3& x, const Penalty& penalty) {
  if (!penalty.constrains_sign()) return true;
  for (double v : x.v)
    if (v < 0.0) return false;
  return true;
}

double residual_sq(const FilterBank& t, const Tensor3& s, const Tensor3& x) {
  const Tensor3 pred = kernels::conv1d(s, t);
  if (!pred.same_shape(x)) throw ShapeError("ctl: feature tensor does not match T * S");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const double r = pred.v[i] - x.v[i];
    acc += r * r;
  }
  return acc;
}

// Smooth part of F(T, X): 0.5 ||T*S - X||^2 + mu ||T||^2 - lambda logdet(T).
double smooth_objective(const FilterBank& t, const CtlProblem& problem, const Tensor3& x) {
  double value = 0.5 * residual_sq(t, problem.samples, x);
  value += problem.mu * kernels::frobenius_sq(t.w);
  if (problem.lambda != 0.0) value -= problem.lambda * logdet_rect(t.as_matrix(), problem.sv_floor);
  return value;
}

FilterBank smooth_gradient(const FilterBank& t, const CtlProblem& problem, const Tensor3& x) {
  const Tensor3 pred = kernels::conv1d(problem.samples, t);
  Tensor3 residual(pred.samples, pred.channels, pred.length);
  for (std::size_t i = 0; i < pred.v.size(); ++i) residual.v[i] = pred.v[i] - x.v[i];

  FilterBank grad = kernels::conv1d_grad_weights(problem.samples, residual, t);
  for (std::size_t i = 0; i < grad.w.size(); ++i) grad.w[i] += 2.0 * problem.mu * t.w[i];
  if (problem.lambda != 0.0) {
    FilterBank ld(t.out_channels, t.in_channels, t.kernel_size);
    ld.from_matrix(logdet_gradient(t.as_matrix(), problem.sv_floor));
    for (std::size_t i = 0; i < grad.w.size(); ++i) grad.w[i] -= problem.lambda * ld.w[i];
  }
  return grad;
}

double grad_norm(const FilterBank& g) { return std::sqrt(kernels::frobenius_sq(g.w)); }

}  // namespace

CtlObjective ctl_objective(const CtlState& state, const CtlProblem& problem) {
  CtlObjective out;
  out.value = smooth_objective(state.transforms, problem, state.features) +
              penalty_value(state.features, problem.penalty);
  out.feasible = feasible_features(state.features, problem.penalty);
  return out;
}

Tensor3 x_update(const FilterBank& transforms, const Tensor3& samples, const Penalty& penalty) {
  Tensor3 out = kernels::conv1d(samples, transforms);
  for (double& v : out.v) v = penalty.prox(v);
  return out;
}

FilterBank t_update(const CtlState& state, const CtlProblem& problem, double gamma1) {
  if (gamma1 <= 0.0) throw std::invalid_argument("t_update: gamma1 must be positive");
  const FilterBank& anchor = state.transforms;

  // h(T) = gamma1 * F(T, X) + 0.5 ||T - anchor||^2
  const auto h_value = [&](const FilterBank& t) {
    double v = gamma1 * smooth_objective(t, problem, state.features);
    for (std::size_t i = 0; i < t.w.size(); ++i) {
      const double d = t.w[i] - anchor.w[i];
      v += 0.5 * d * d;
    }
    return v;
  };
  const auto h_gradient = [&](const FilterBank& t) {
    FilterBank g = smooth_gradient(t, problem, state.features);
    for (std::size_t i = 0; i < g.w.size(); ++i)
      g.w[i] = gamma1 * g.w[i] + (t.w[i] - anchor.w[i]);
    return g;
  };

  const double tol = 1e-6;
  const std::size_t max_iters = 200;

  FilterBank t = anchor;
  double value = h_value(t);
  double step = 1.0;

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    const FilterBank g = h_gradient(t);
    const double gnorm = grad_norm(g);
    if (!std::isfinite(gnorm) || !std::isfinite(value))
      throw NonConvergenceError("t_update: non-finite iterate at inner iteration " +
                                std::to_string(iter) + " (objective " + std::to_string(value) +
                                ")");
    if (gnorm <= tol) break;

    // Armijo backtracking along the negative gradient.
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      FilterBank trial = t;
      for (std::size_t i = 0; i < trial.w.size(); ++i) trial.w[i] -= step * g.w[i];
      const double trial_value = h_value(trial);
      if (std::isfinite(trial_value) &&
          trial_value <= value - 1e-4 * step * gnorm * gnorm) {
        t = std::move(trial);
        value = trial_value;
        step *= 1.5;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      throw NonConvergenceError("t_update: line search stalled at inner iteration " +
                                std::to_string(iter) + ", gradient norm " +
                                std::to_string(gnorm) + ", objective " + std::to_string(value));
  }
  return t;
}

CtlState ctl_fit(const CtlProblem& problem, const CtlFitOptions& options) {
  problem.validate();
  if (options.iters < 1) throw std::invalid_argument("ctl_fit: iters must be >= 1");

  CtlState state;
  state.transforms = FilterBank(problem.num_filters, 1, problem.kernel_size);
  Rng rng(options.seed);
  const double bound = std::sqrt(6.0 / (static_cast<double>(problem.kernel_size) *
                                        (1.0 + static_cast<double>(problem.num_filters))));
  for (double& w : state.transforms.w) w = rng.uniform(-bound, bound);
  state.features = x_update(state.transforms, problem.samples, problem.penalty);

  const auto record = [&](std::size_t iteration) {
    const CtlObjective obj = ctl_objective(state, problem);
    state.objective_history.push_back(obj.value);
    if (options.trace) {
      const double res = 0.5 * residual_sq(state.transforms, problem.samples, state.features);
      const double ld = problem.lambda != 0.0
                            ? logdet_rect(state.transforms.as_matrix(), problem.sv_floor)
                            : 0.0;
      (*options.trace) << iteration << ',' << obj.value << ',' << res << ',' << ld << '\n';
    }
  };

  if (options.trace) (*options.trace) << "iteration,objective,residual,logdet\n";
  record(0);

  for (std::size_t n = 1; n <= options.iters; ++n) {
    state.transforms = t_update(state, problem, options.gamma1);
    state.features = x_update(state.transforms, problem.samples, problem.penalty);
    record(n);
  }
  return state;
}

}  // namespace deconfuse
