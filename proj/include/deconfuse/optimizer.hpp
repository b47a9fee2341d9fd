#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "deconfuse/model.hpp"

namespace deconfuse {

/// Optimizer and regularization settings. Defaults follow the stock setup:
/// Adam(0.9, 0.999) at 1e-3 with decoupled 5e-5 weight decay on transforms.
struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 5e-5;
  double mu = 0.01;
  double lambda = 0.01;
  double sv_floor = kSvFloor;
  std::size_t epochs = 500;
  std::size_t batch = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  // Optional per-block step size overrides; 0 falls back to learning_rate.
  double learning_rate_transforms = 0.0;
  double learning_rate_features = 0.0;

  void validate() const;
  double transform_rate() const {
    return learning_rate_transforms > 0.0 ? learning_rate_transforms : learning_rate;
  }
  double feature_rate() const {
    return learning_rate_features > 0.0 ? learning_rate_features : learning_rate;
  }
};

/// Trainable state of one joint problem: the model transforms plus the
/// explicit feature variables X^(c) and Z for the training samples.
struct JointInstance {
  DeconfuseModel model;
  std::vector<Tensor3> x;
  Matrix z;
};

/// X = relu of the per-channel pre-activations, Z = relu of the fused sum
/// (the closed-form block optima at the initial transforms).
JointInstance init_instance(DeconfuseModel model, const std::vector<Tensor3>& s);

/// One value per trainable block, in the fixed block order: conv weights
/// [channel][layer], fusion transforms [channel], features X [channel], Z.
struct BlockValues {
  std::vector<std::vector<std::vector<double>>> conv;
  std::vector<std::vector<double>> fusion;
  std::vector<std::vector<double>> x;
  std::vector<double> z;

  static BlockValues zeros_like(const JointInstance& instance);
};

struct BlockGrads {
  BlockValues values;
  double objective = 0.0;
};

/// Reverse-mode gradients of the joint objective for every block, via the
/// tape engine. The reported objective is the tape's forward value.
BlockGrads grad_joint(const JointInstance& instance, const std::vector<Tensor3>& s, double mu,
                      double lambda, double sv_floor = kSvFloor);

struct AdamMoments {
  BlockValues m;
  BlockValues v;
  static AdamMoments zeros_like(const JointInstance& instance);
};

/// One bias-corrected Adam step. Decoupled weight decay touches only the
/// transform blocks; the feature blocks X and Z are projected onto the
/// non-negative orthant after the step.
void projected_adam_step(JointInstance& instance, const BlockGrads& grads, AdamMoments& moments,
                         const TrainConfig& config, std::size_t step_index);

struct TrainResult {
  std::vector<double> loss;             // J, entry 0 is the initial value
  std::vector<double> fusion_residual;  // same indexing as loss
  std::vector<double> conv_residual;
  std::vector<double> regularizers;
};

/// Trains the instance for config.epochs epochs (full-batch steps by
/// default, seeded mini-batches when config.batch > 0). Writes an optional
/// CSV trace (epoch,loss,fusion_residual,conv_residual,regularizers).
/// Raises DivergenceError when the loss exceeds 1000x its initial value for
/// ten consecutive epochs.
TrainResult train(JointInstance& instance, const std::vector<Tensor3>& s,
                  const TrainConfig& config, std::ostream* trace = nullptr);

/// Flat packing of all trainable blocks, used by gradcheck and tests.
struct ParamPack {
  static std::vector<double> pack(const JointInstance& instance);
  static void unpack(JointInstance& instance, std::span<const double> flat);
  static std::vector<double> pack_grads(const BlockGrads& grads);
  /// Human-readable block label for a flat coordinate ("conv[c=1,l=0]", ...).
  static std::string block_of(const JointInstance& instance, std::size_t index);
};

struct GradcheckReport {
  struct Coordinate {
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    std::string block;
  };
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  double tolerance = 0.0;
  std::vector<Coordinate> flagged;  // coordinates that failed every step size
  bool pass() const { return flagged.empty(); }
};

/// Compares an analytic gradient against central finite differences on
/// `samples` random coordinates. A coordinate failing at the base step size
/// is retried with h/8 and h/64 (a genuine adjoint bug stays wrong as h
/// shrinks, a kink crossing goes away); survivors are reported as flagged.
GradcheckReport gradcheck(const std::function<double(std::span<const double>)>& objective,
                          std::span<const double> params, std::span<const double> analytic_grad,
                          std::size_t samples, double tol, std::uint64_t seed);

/// gradcheck applied to the full joint objective of an instance. Finite
/// differences run through the plain objective path, independent of the tape.
GradcheckReport gradcheck_joint(const JointInstance& instance, const std::vector<Tensor3>& s,
                                double mu, double lambda, double sv_floor, std::size_t samples,
                                double tol, std::uint64_t seed);

}  // namespace deconfuse
