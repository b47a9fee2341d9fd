#include <cmath>

#include "deconfuse/ctl.hpp"
#include "deconfuse/kernels.hpp"
#include "deconfuse/model.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace deconfuse;
using oracles::random_tensor;

namespace {

std::vector<Tensor3> random_inputs(Rng& rng, std::size_t channels, std::size_t k,
                                   std::size_t window) {
  std::vector<Tensor3> s;
  for (std::size_t c = 0; c < channels; ++c) s.push_back(random_tensor(rng, k, 1, window));
  return s;
}

}  // namespace

TEST_CASE("default architecture maps W=20 windows to 8 x 10 features") {
  const DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 5, 20, 1);
  Rng rng(2);
  const Tensor3 out = pipeline_forward(model.pipelines[0], random_tensor(rng, 3, 1, 20));
  CHECK(out.channels == 8);
  CHECK(out.length == 10);
  CHECK(model.flat_features(20) == 80);
  CHECK(model.output_dim == 200);  // ceil(0.5 * 80 * 5)
}

TEST_CASE("make_model is deterministic in the seed") {
  const DeconfuseModel a = make_model(ArchitectureSpec::defaults(), 2, 20, 42);
  const DeconfuseModel b = make_model(ArchitectureSpec::defaults(), 2, 20, 42);
  CHECK(a.pipelines[1].layers[1].bank.w == b.pipelines[1].layers[1].bank.w);
  CHECK(a.fusion.per_channel[0].v == b.fusion.per_channel[0].v);
}

TEST_CASE("zero input flows to zero output through selu layers") {
  const DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 1, 20, 3);
  const Tensor3 out = pipeline_forward(model.pipelines[0], Tensor3(2, 1, 20));
  for (double v : out.v) CHECK(v == 0.0);
}

TEST_CASE("a delta-filter single layer pipeline is the identity") {
  ChannelPipeline pipeline;
  PipelineLayer layer;
  layer.bank = FilterBank(1, 1, 3, 1, 1);
  layer.bank.w = {0, 1, 0};
  pipeline.layers.push_back(layer);
  pipeline.validate();
  Rng rng(5);
  const Tensor3 input = random_tensor(rng, 2, 1, 9);
  const Tensor3 out = pipeline_forward(pipeline, input);
  CHECK(out.v == input.v);
}

TEST_CASE("pipeline validation rejects broken chains and non-identity tails") {
  ChannelPipeline pipeline;
  PipelineLayer l1;
  l1.bank = FilterBank(4, 1, 3);
  PipelineLayer l2;
  l2.bank = FilterBank(8, 5, 3);  // expects 5 inputs, gets 4
  pipeline.layers = {l1, l2};
  CHECK_THROWS_AS(pipeline.validate(), ShapeError);

  pipeline.layers[1].bank = FilterBank(8, 4, 3);
  pipeline.layers[1].activation = Activation::selu;
  CHECK_THROWS_AS(pipeline.validate(), std::invalid_argument);
}

TEST_CASE("fusion_residual closed forms") {
  // exact fit
  DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 2, 20, 7);
  Rng rng(11);
  const auto s = random_inputs(rng, 2, 3, 20);
  const LatentFeatures latent = infer_features(model, s);
  std::vector<Tensor3> x = latent.channel_features;
  Matrix z(latent.fused.rows, latent.fused.cols);
  for (std::size_t c = 0; c < 2; ++c) {
    const Matrix term = kernels::matmul(kernels::flatten(x[c]), model.fusion.per_channel[c]);
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] += term.v[i];
  }
  CHECK(fusion_residual(model, x, z) == doctest::Approx(0.0));

  // Z = 0 against an all-ones fused sum of width 4
  DeconfuseModel tiny;
  tiny.pipelines.resize(1);
  PipelineLayer layer;
  layer.bank = FilterBank(1, 1, 1);
  layer.bank.w = {1.0};
  tiny.pipelines[0].layers.push_back(layer);
  tiny.output_dim = 4;
  tiny.fusion.per_channel.push_back(Matrix(2, 4));
  for (std::size_t j = 0; j < 4; ++j) tiny.fusion.per_channel[0].at(0, j) = 1.0;
  Tensor3 xf(1, 1, 2);
  xf.v = {1.0, 0.0};
  CHECK(fusion_residual(tiny, {xf}, Matrix(1, 4)) == doctest::Approx(2.0));
}

TEST_CASE("fusion_residual matches a naive summation oracle") {
  Rng rng(13);
  const DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 3, 8, 17);
  const std::size_t k = 4;
  std::vector<Tensor3> x;
  const std::size_t m = model.pipelines[0].output_channels();
  const std::size_t d = model.pipelines[0].output_length(8);
  for (std::size_t c = 0; c < 3; ++c) x.push_back(random_tensor(rng, k, m, d));
  const Matrix z = oracles::random_matrix(rng, k, model.output_dim);

  double want = 0.0;
  const std::size_t flat_width = m * d;
  for (std::size_t kk = 0; kk < k; ++kk)
    for (std::size_t o = 0; o < model.output_dim; ++o) {
      double fused = 0.0;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < flat_width; ++i)
          fused += x[c].v[kk * flat_width + i] * model.fusion.per_channel[c].at(i, o);
      const double r = z.at(kk, o) - fused;
      want += 0.5 * r * r;
    }
  CHECK(fusion_residual(model, x, z) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("joint objective vanishes on an exactly fitted point") {
  Rng rng(19);
  const DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 2, 12, 23);
  const auto s = random_inputs(rng, 2, 3, 12);
  std::vector<Tensor3> x;
  for (std::size_t c = 0; c < 2; ++c) x.push_back(pipeline_forward(model.pipelines[c], s[c]));

  Matrix z(3, model.output_dim);
  for (std::size_t c = 0; c < 2; ++c) {
    const Matrix term = kernels::matmul(kernels::flatten(x[c]), model.fusion.per_channel[c]);
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] += term.v[i];
  }
  const JointObjectiveValue j = joint_objective(model, x, z, s, 0.0, 0.0);
  CHECK(j.value == doctest::Approx(0.0));
}

TEST_CASE("joint objective reduces to transform energy when all else is zero") {
  const DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 2, 12, 29);
  std::vector<Tensor3> s(2, Tensor3(2, 1, 12));
  const std::size_t m = model.pipelines[0].output_channels();
  const std::size_t d = model.pipelines[0].output_length(12);
  std::vector<Tensor3> x(2, Tensor3(2, m, d));
  const Matrix z(2, model.output_dim);

  double want = 0.0;
  for (const auto& pipeline : model.pipelines)
    for (const auto& layer : pipeline.layers) want += kernels::frobenius_sq(layer.bank.w);
  for (const auto& t : model.fusion.per_channel) want += kernels::frobenius_sq(t.v);

  const JointObjectiveValue j = joint_objective(model, x, z, s, 1.0, 0.0);
  CHECK(j.value == doctest::Approx(want).epsilon(1e-12));
  CHECK(j.feasible);
}

TEST_CASE("joint objective composes per-channel shallow objectives plus fusion") {
  Rng rng(31);
  const std::size_t k = 2, w = 10, p = 3, m = 2, channels = 2;

  DeconfuseModel model;
  model.pipelines.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    PipelineLayer layer;
    layer.bank = oracles::random_bank(rng, m, 1, p);
    model.pipelines[c].channel_index = c;
    model.pipelines[c].layers.push_back(layer);
  }
  const std::size_t flat = m * (w - p + 1);
  model.output_dim = 5;
  for (std::size_t c = 0; c < channels; ++c)
    model.fusion.per_channel.push_back(oracles::random_matrix(rng, flat, 5));

  const auto s = random_inputs(rng, channels, k, w);
  std::vector<Tensor3> x;
  for (std::size_t c = 0; c < channels; ++c)
    x.push_back(x_update(model.pipelines[c].layers[0].bank, s[c], Penalty::nonneg()));
  const Matrix z = oracles::random_matrix(rng, k, 5, 0.0, 1.0);

  const double mu = 0.03, lambda = 0.02;
  double want = fusion_residual(model, x, z);
  for (std::size_t c = 0; c < channels; ++c) {
    CtlProblem problem;
    problem.samples = s[c];
    problem.num_filters = m;
    problem.kernel_size = p;
    problem.mu = mu;
    problem.lambda = lambda;
    CtlState state;
    state.transforms = model.pipelines[c].layers[0].bank;
    state.features = x[c];
    want += ctl_objective(state, problem).value;
    want += mu * kernels::frobenius_sq(model.fusion.per_channel[c].v);
    want -= lambda * logdet_rect(model.fusion.per_channel[c]);
  }

  const JointObjectiveValue j = joint_objective(model, x, z, s, mu, lambda);
  CHECK(j.value == doctest::Approx(want).epsilon(1e-12));
  CHECK(j.feasible);
}

TEST_CASE("joint objective is invariant to paired filter and fusion-row permutation") {
  Rng rng(37);
  const std::size_t channels = 2, k = 3, w = 12;
  DeconfuseModel model = make_model(ArchitectureSpec::defaults(), channels, w, 41);
  const auto s = random_inputs(rng, channels, k, w);
  const std::size_t m = model.pipelines[0].output_channels();
  const std::size_t d = model.pipelines[0].output_length(w);
  std::vector<Tensor3> x;
  for (std::size_t c = 0; c < channels; ++c) x.push_back(random_tensor(rng, k, m, d, 0.0, 1.0));
  const Matrix z = oracles::random_matrix(rng, k, model.output_dim, 0.0, 1.0);

  const double before = joint_objective(model, x, z, s, 0.01, 0.01).value;

  // Swap filters 0 and 1 in the last layer of channel 0, the matching maps
  // of X^(0), and the matching row blocks of the fusion transform.
  DeconfuseModel permuted = model;
  FilterBank& bank = permuted.pipelines[0].layers.back().bank;
  for (std::size_t ci = 0; ci < bank.in_channels; ++ci)
    for (std::size_t p = 0; p < bank.kernel_size; ++p)
      std::swap(bank.at(0, ci, p), bank.at(1, ci, p));
  std::vector<Tensor3> x_perm = x;
  for (std::size_t kk = 0; kk < k; ++kk)
    for (std::size_t dd = 0; dd < d; ++dd)
      std::swap(x_perm[0].at(kk, 0, dd), x_perm[0].at(kk, 1, dd));
  Matrix& fusion = permuted.fusion.per_channel[0];
  for (std::size_t dd = 0; dd < d; ++dd)
    for (std::size_t o = 0; o < model.output_dim; ++o)
      std::swap(fusion.at(0 * d + dd, o), fusion.at(1 * d + dd, o));

  const double after = joint_objective(permuted, x_perm, z, s, 0.01, 0.01).value;
  CHECK(after == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("infer_features basics") {
  const DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 2, 16, 43);
  std::vector<Tensor3> zero(2, Tensor3(2, 1, 16));
  const LatentFeatures a = infer_features(model, zero);
  for (double v : a.fused.v) CHECK(v == 0.0);

  Rng rng(47);
  const auto s = random_inputs(rng, 2, 4, 16);
  const LatentFeatures b = infer_features(model, s);
  const LatentFeatures c = infer_features(model, s);
  CHECK(b.fused.v == c.fused.v);  // bitwise determinism
  for (double v : b.fused.v) CHECK(v >= 0.0);
  for (const Tensor3& t : b.channel_features)
    for (double v : t.v) CHECK(v >= 0.0);
}

TEST_CASE("identity fusion passes flattened features through") {
  DeconfuseModel model;
  model.pipelines.resize(1);
  PipelineLayer layer;
  layer.bank = FilterBank(1, 1, 1);
  layer.bank.w = {1.0};
  model.pipelines[0].layers.push_back(layer);
  model.output_dim = 6;
  model.fusion.per_channel.push_back(Matrix::identity(6));

  Rng rng(53);
  const Tensor3 s = random_tensor(rng, 2, 1, 6);
  const LatentFeatures latent = infer_features(model, {s});
  const Matrix flat = kernels::flatten(latent.channel_features[0]);
  CHECK(latent.fused.v == flat.v);
}

TEST_CASE("complexity report instantiates the per-term counts") {
  const DeconfuseModel model = make_model(ArchitectureSpec::defaults(), 5, 20, 59);
  const ComplexityReport report = complexity_report(model, 20);
  REQUIRE(report.conv_layers.size() == 2);
  CHECK(report.conv_layers[0].conv_ops == 2000);  // 5 * (5 * 20 * 4)
  CHECK(report.conv_layers[0].frobenius_ops == 5 * 4 * 5);
  CHECK(report.conv_layers[0].logdet_ops == 25 * 4 * 5);
  CHECK(report.flat_features == 80);
  CHECK(report.fusion_ops == 80ull * 80ull * 25ull);
  CHECK(report.fusion_frobenius_ops == report.fusion_ops);
  CHECK(report.fusion_logdet_ops == 80ull * 80ull * 80ull * 25ull);

  // L=1 with a single length-1 filter degenerates to D*C conv ops.
  ArchitectureSpec tiny;
  LayerSpec only;
  only.filters = 1;
  only.kernel = 1;
  tiny.layers = {only};
  const DeconfuseModel small = make_model(tiny, 3, 10, 61);
  const ComplexityReport r2 = complexity_report(small, 10);
  CHECK(r2.conv_layers[0].conv_ops == 10 * 3);
}
