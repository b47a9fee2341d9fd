#pragma once

#include <cstdint>
#include <vector>

#include "deconfuse/linalg.hpp"
#include "deconfuse/tensor.hpp"

namespace deconfuse {

enum class Activation : std::uint8_t { identity = 0, relu = 1, selu = 2 };

struct PoolSpec {
  std::size_t kernel = 0;
  std::size_t stride = 0;
  bool enabled() const { return kernel > 0; }
};

/// One stage of a channel pipeline, applied conv -> pool -> activation.
struct PipelineLayer {
  FilterBank bank;
  PoolSpec pool;
  Activation activation = Activation::identity;
};

/// Stacked convolutional transforms for one input channel. The final layer
/// keeps the identity activation: its pre-activation is the explicit
/// feature variable X^(c), and inference applies the closed-form relu on top.
struct ChannelPipeline {
  std::vector<PipelineLayer> layers;
  std::size_t channel_index = 0;

  void validate() const;
  std::size_t output_channels() const { return layers.back().bank.out_channels; }
  std::size_t output_length(std::size_t input_length) const;
};

/// Per-channel fusion maps; matrix c is (I x O).
struct FusionTransform {
  std::vector<Matrix> per_channel;
};

struct DeconfuseModel {
  std::vector<ChannelPipeline> pipelines;
  FusionTransform fusion;
  std::size_t output_dim = 0;

  std::size_t channel_count() const { return pipelines.size(); }
  std::size_t flat_features(std::size_t window) const;
  void validate(std::size_t window) const;
};

struct LatentFeatures {
  std::vector<Tensor3> channel_features;  // X^(c): K x M_L x D_L each
  Matrix fused;                           // Z: K x O
};

/// Layer geometry description used to build models; the defaults reproduce
/// the stock architecture (4 filters of 5 then pool 2/2 and selu, 8 filters
/// of 3, identity).
struct LayerSpec {
  std::size_t filters = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  PoolSpec pool;
  Activation activation = Activation::identity;
};

struct ArchitectureSpec {
  std::vector<LayerSpec> layers;
  double alpha = 0.5;  // fusion width ratio, O = ceil(alpha * I * C)

  static ArchitectureSpec defaults();
};

/// Builds a model with fan-scaled uniform random weights, deterministic in
/// the seed (channel-major, layer-major draw order).
DeconfuseModel make_model(const ArchitectureSpec& spec, std::size_t channels,
                          std::size_t window, std::uint64_t seed);

/// Runs one channel pipeline: conv, optional pooling and activation per
/// layer. The result is the final layer's pre-activation.
Tensor3 pipeline_forward(const ChannelPipeline& pipeline, const Tensor3& s_c);

/// 0.5 || Z - sum_c flat(X^(c)) Ttilde_c ||_F^2
double fusion_residual(const DeconfuseModel& model, const std::vector<Tensor3>& x,
                       const Matrix& z);

struct JointObjectiveValue {
  double value = 0.0;
  bool feasible = true;  // X >= 0 and Z >= 0
};

/// Full joint objective: fusion residual plus per-channel deep CTL terms,
/// with mu ||.||_F^2 - lambda logdet regularization on every transform
/// (convolutional and fusion alike).
JointObjectiveValue joint_objective(const DeconfuseModel& model, const std::vector<Tensor3>& x,
                                    const Matrix& z, const std::vector<Tensor3>& s, double mu,
                                    double lambda, double sv_floor = kSvFloor);

/// Same objective split into its terms (used for loss traces).
struct JointBreakdown {
  double fusion_residual = 0.0;
  double conv_residual = 0.0;   // sum over channels
  double regularizers = 0.0;    // Frobenius and log-det terms together
  bool feasible = true;
  double value() const { return fusion_residual + conv_residual + regularizers; }
};

JointBreakdown joint_terms(const DeconfuseModel& model, const std::vector<Tensor3>& x,
                           const Matrix& z, const std::vector<Tensor3>& s, double mu,
                           double lambda, double sv_floor = kSvFloor);

/// Test-phase forward pass: X^(c) = relu of the final pre-activation,
/// Z = relu of the fused sum. Pure and deterministic.
LatentFeatures infer_features(const DeconfuseModel& model, const std::vector<Tensor3>& s);

/// Operation counts per training step for one input sample, following the
/// per-term accounting (conv layers, fully connected fusion, Frobenius and
/// log-det costs on both).
struct ComplexityReport {
  struct ConvLayerRow {
    std::size_t layer = 0;
    std::size_t kernel = 0;         // P_l
    std::size_t filters = 0;        // M_l
    std::size_t output_length = 0;  // D_l
    std::size_t conv_ops = 0;       // P_l * D_l * M_l * C
    std::size_t frobenius_ops = 0;  // P_l * M_l * C
    std::size_t logdet_ops = 0;     // P_l^2 * M_l * C
  };
  std::size_t channels = 0;
  std::size_t flat_features = 0;  // I
  std::size_t output_dim = 0;     // O
  std::vector<ConvLayerRow> conv_layers;
  std::size_t fusion_ops = 0;            // I^2 * C^2
  std::size_t fusion_frobenius_ops = 0;  // I^2 * C^2
  std::size_t fusion_logdet_ops = 0;     // I^3 * C^2
};

ComplexityReport complexity_report(const DeconfuseModel& model, std::size_t window);

}  // namespace deconfuse
