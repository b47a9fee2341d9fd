#include "deconfuse/model.hpp"

#include <cmath>
#include <stdexcept>

#include "deconfuse/kernels.hpp"
#include "deconfuse/rng.hpp"

namespace deconfuse {

void ChannelPipeline::validate() const {
  if (layers.empty()) throw std::invalid_argument("pipeline: needs at least one layer");
  for (std::size_t l = 1; l < layers.size(); ++l)
    if (layers[l].bank.in_channels != layers[l - 1].bank.out_channels)
      throw ShapeError("pipeline: layer " + std::to_string(l) + " expects " +
                       std::to_string(layers[l].bank.in_channels) + " inputs, previous layer yields " +
                       std::to_string(layers[l - 1].bank.out_channels));
  if (layers.back().activation != Activation::identity)
    throw std::invalid_argument("pipeline: final layer must keep the identity activation");
}

std::size_t ChannelPipeline::output_length(std::size_t input_length) const {
  std::size_t d = input_length;
  for (const PipelineLayer& layer : layers) {
    d = conv_output_length(d, layer.bank.kernel_size, layer.bank.stride, layer.bank.padding);
    if (layer.pool.enabled()) d = pool_output_length(d, layer.pool.kernel, layer.pool.stride);
  }
  return d;
}

std::size_t DeconfuseModel::flat_features(std::size_t window) const {
  const ChannelPipeline& p = pipelines.front();
  return p.output_channels() * p.output_length(window);
}

void DeconfuseModel::validate(std::size_t window) const {
  if (pipelines.empty()) throw std::invalid_argument("model: needs at least one channel");
  if (fusion.per_channel.size() != pipelines.size())
    throw ShapeError("model: fusion transform count != channel count");
  const std::size_t flat = flat_features(window);
  for (std::size_t c = 0; c < pipelines.size(); ++c) {
    pipelines[c].validate();
    const std::size_t i_c =
        pipelines[c].output_channels() * pipelines[c].output_length(window);
    if (i_c != flat) throw ShapeError("model: channel pipelines disagree on feature width I");
    if (fusion.per_channel[c].rows != flat || fusion.per_channel[c].cols != output_dim)
      throw ShapeError("model: fusion transform " + std::to_string(c) + " is not I x O");
  }
}

ArchitectureSpec ArchitectureSpec::defaults() {
  ArchitectureSpec spec;
  LayerSpec layer1;
  layer1.filters = 4;
  layer1.kernel = 5;
  layer1.stride = 1;
  layer1.padding = 2;
  layer1.pool = {2, 2};
  layer1.activation = Activation::selu;
  LayerSpec layer2;
  layer2.filters = 8;
  layer2.kernel = 3;
  layer2.stride = 1;
  layer2.padding = 1;
  layer2.activation = Activation::identity;
  spec.layers = {layer1, layer2};
  spec.alpha = 0.5;
  return spec;
}

DeconfuseModel make_model(const ArchitectureSpec& spec, std::size_t channels,
                          std::size_t window, std::uint64_t seed) {
  if (spec.layers.empty()) throw std::invalid_argument("make_model: no layers");
  if (spec.alpha <= 0.0 || spec.alpha > 1.0)
    throw std::invalid_argument("make_model: alpha must be in (0, 1]");
  if (channels == 0) throw std::invalid_argument("make_model: needs at least one channel");

  Rng rng(seed);
  DeconfuseModel model;
  model.pipelines.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    ChannelPipeline& pipeline = model.pipelines[c];
    pipeline.channel_index = c;
    std::size_t in = 1;
    for (const LayerSpec& ls : spec.layers) {
      PipelineLayer layer;
      layer.bank = FilterBank(ls.filters, in, ls.kernel, ls.stride, ls.padding);
      const double bound = std::sqrt(6.0 / (static_cast<double>(ls.kernel) *
                                            static_cast<double>(in + ls.filters)));
      for (double& w : layer.bank.w) w = rng.uniform(-bound, bound);
      layer.pool = ls.pool;
      layer.activation = ls.activation;
      pipeline.layers.push_back(std::move(layer));
      in = ls.filters;
    }
    pipeline.validate();
  }

  const std::size_t flat = model.flat_features(window);
  model.output_dim = static_cast<std::size_t>(
      std::ceil(spec.alpha * static_cast<double>(flat) * static_cast<double>(channels)));
  model.fusion.per_channel.resize(channels);
  const double bound = std::sqrt(6.0 / static_cast<double>(flat + model.output_dim));
  for (std::size_t c = 0; c < channels; ++c) {
    model.fusion.per_channel[c] = Matrix(flat, model.output_dim);
    for (double& w : model.fusion.per_channel[c].v) w = rng.uniform(-bound, bound);
  }
  model.validate(window);
  return model;
}

Tensor3 pipeline_forward(const ChannelPipeline& pipeline, const Tensor3& s_c) {
  if (s_c.channels != pipeline.layers.front().bank.in_channels)
    throw ShapeError("pipeline_forward: input channel count mismatch");
  Tensor3 current = s_c;
  for (const PipelineLayer& layer : pipeline.layers) {
    current = kernels::conv1d(current, layer.bank);
    if (layer.pool.enabled())
      current = kernels::maxpool1d(current, layer.pool.kernel, layer.pool.stride);
    switch (layer.activation) {
      case Activation::identity:
        break;
      case Activation::relu:
        current = kernels::relu_map(current);
        break;
      case Activation::selu:
        current = kernels::selu_map(current);
        break;
    }
  }
  return current;
}

namespace {

/// sum_c flat(X^(c)) * Ttilde_c, the fused pre-activation (K x O).
Matrix fused_preactivation(const DeconfuseModel& model, const std::vector<Tensor3>& x) {
  if (x.size() != model.channel_count())
    throw ShapeError("fusion: feature list length != channel count");
  Matrix acc;
  for (std::size_t c = 0; c < x.size(); ++c) {
    const Matrix flat = kernels::flatten(x[c]);
    const Matrix term = kernels::matmul(flat, model.fusion.per_channel[c]);
    if (c == 0) {
      acc = term;
    } else {
      if (term.rows != acc.rows || term.cols != acc.cols)
        throw ShapeError("fusion: channel feature tensors disagree on sample count");
      for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += term.v[i];
    }
  }
  return acc;
}

bool all_nonneg(std::span<const double> xs) {
  for (double v : xs)
    if (v < 0.0) return false;
  return true;
}

}  // namespace

double fusion_residual(const DeconfuseModel& model, const std::vector<Tensor3>& x,
                       const Matrix& z) {
  const Matrix pre = fused_preactivation(model, x);
  if (z.rows != pre.rows || z.cols != pre.cols)
    throw ShapeError("fusion_residual: Z must be K x O");
  double acc = 0.0;
  for (std::size_t i = 0; i < z.v.size(); ++i) {
    const double r = z.v[i] - pre.v[i];
    acc += r * r;
  }
  return 0.5 * acc;
}

JointBreakdown joint_terms(const DeconfuseModel& model, const std::vector<Tensor3>& x,
                           const Matrix& z, const std::vector<Tensor3>& s, double mu,
                           double lambda, double sv_floor) {
  if (s.size() != model.channel_count() || x.size() != model.channel_count())
    throw ShapeError("joint_objective: channel count mismatch");

  JointBreakdown out;
  out.fusion_residual = fusion_residual(model, x, z);
  out.feasible = all_nonneg(z.v);

  for (std::size_t c = 0; c < model.channel_count(); ++c) {
    const Tensor3 pre = pipeline_forward(model.pipelines[c], s[c]);
    if (!pre.same_shape(x[c])) throw ShapeError("joint_objective: X^(c) shape mismatch");
    double residual = 0.0;
    for (std::size_t i = 0; i < pre.v.size(); ++i) {
      const double r = pre.v[i] - x[c].v[i];
      residual += r * r;
    }
    out.conv_residual += 0.5 * residual;
    out.feasible = out.feasible && all_nonneg(x[c].v);

    for (const PipelineLayer& layer : model.pipelines[c].layers) {
      out.regularizers += mu * kernels::frobenius_sq(layer.bank.w);
      if (lambda != 0.0)
        out.regularizers -= lambda * logdet_rect(layer.bank.as_matrix(), sv_floor);
    }
    out.regularizers += mu * kernels::frobenius_sq(model.fusion.per_channel[c].v);
    if (lambda != 0.0)
      out.regularizers -= lambda * logdet_rect(model.fusion.per_channel[c], sv_floor);
  }
  return out;
}

JointObjectiveValue joint_objective(const DeconfuseModel& model, const std::vector<Tensor3>& x,
                                    const Matrix& z, const std::vector<Tensor3>& s, double mu,
                                    double lambda, double sv_floor) {
  const JointBreakdown terms = joint_terms(model, x, z, s, mu, lambda, sv_floor);
  return {terms.value(), terms.feasible};
}

LatentFeatures infer_features(const DeconfuseModel& model, const std::vector<Tensor3>& s) {
  if (s.size() != model.channel_count())
    throw ShapeError("infer_features: channel count mismatch");
  LatentFeatures out;
  out.channel_features.resize(model.channel_count());

  const std::int64_t C = static_cast<std::int64_t>(model.channel_count());
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < C; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    out.channel_features[idx] =
        kernels::relu_map(pipeline_forward(model.pipelines[idx], s[idx]));
  }

  out.fused = fused_preactivation(model, out.channel_features);
  for (double& v : out.fused.v) v = relu(v);
  return out;
}

ComplexityReport complexity_report(const DeconfuseModel& model, std::size_t window) {
  model.validate(window);
  const std::size_t channels = model.channel_count();
  ComplexityReport report;
  report.channels = channels;
  report.flat_features = model.flat_features(window);
  report.output_dim = model.output_dim;

  std::size_t d = window;
  const ChannelPipeline& pipeline = model.pipelines.front();
  for (std::size_t l = 0; l < pipeline.layers.size(); ++l) {
    const PipelineLayer& layer = pipeline.layers[l];
    d = conv_output_length(d, layer.bank.kernel_size, layer.bank.stride, layer.bank.padding);

    ComplexityReport::ConvLayerRow row;
    row.layer = l + 1;
    row.kernel = layer.bank.kernel_size;
    row.filters = layer.bank.out_channels;
    row.output_length = d;
    row.conv_ops = row.kernel * d * row.filters * channels;
    row.frobenius_ops = row.kernel * row.filters * channels;
    row.logdet_ops = row.kernel * row.kernel * row.filters * channels;
    report.conv_layers.push_back(row);

    if (layer.pool.enabled()) d = pool_output_length(d, layer.pool.kernel, layer.pool.stride);
  }

  const std::size_t i = report.flat_features;
  report.fusion_ops = i * i * channels * channels;
  report.fusion_frobenius_ops = i * i * channels * channels;
  report.fusion_logdet_ops = i * i * i * channels * channels;
  return report;
}

}  // namespace deconfuse
