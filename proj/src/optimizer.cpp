#include "deconfuse/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "deconfuse/autodiff.hpp"
#include "deconfuse/kernels.hpp"
#include "deconfuse/rng.hpp"

namespace deconfuse {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be positive");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("train: betas must lie in (0, 1)");
  if (adam_epsilon <= 0.0) throw std::invalid_argument("train: adam epsilon must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("train: weight decay must be >= 0");
  if (mu < 0.0 || lambda < 0.0) throw std::invalid_argument("train: mu and lambda must be >= 0");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
}

JointInstance init_instance(DeconfuseModel model, const std::vector<Tensor3>& s) {
  JointInstance instance;
  const LatentFeatures latent = infer_features(model, s);
  instance.model = std::move(model);
  instance.x = latent.channel_features;
  instance.z = latent.fused;
  return instance;
}

BlockValues BlockValues::zeros_like(const JointInstance& instance) {
  BlockValues out;
  out.conv.resize(instance.model.channel_count());
  for (std::size_t c = 0; c < instance.model.channel_count(); ++c)
    for (const PipelineLayer& layer : instance.model.pipelines[c].layers)
      out.conv[c].emplace_back(layer.bank.w.size(), 0.0);
  for (const Matrix& t : instance.model.fusion.per_channel)
    out.fusion.emplace_back(t.v.size(), 0.0);
  for (const Tensor3& x : instance.x) out.x.emplace_back(x.v.size(), 0.0);
  out.z.assign(instance.z.v.size(), 0.0);
  return out;
}

AdamMoments AdamMoments::zeros_like(const JointInstance& instance) {
  return {BlockValues::zeros_like(instance), BlockValues::zeros_like(instance)};
}

namespace {

struct GraphRefs {
  ad::NodeId objective = -1;
  std::vector<std::vector<ad::NodeId>> conv_weights;
  std::vector<ad::NodeId> fusion_weights;
  std::vector<ad::NodeId> x_nodes;
  ad::NodeId z_node = -1;
};

GraphRefs build_joint_graph(ad::Tape& tape, const JointInstance& instance,
                            const std::vector<Tensor3>& s, double mu, double lambda,
                            double sv_floor) {
  const DeconfuseModel& model = instance.model;
  if (s.size() != model.channel_count())
    throw ShapeError("grad: channel count mismatch between model and data");

  GraphRefs refs;
  std::vector<ad::NodeId> terms;
  ad::NodeId fused = -1;

  refs.conv_weights.resize(model.channel_count());
  for (std::size_t c = 0; c < model.channel_count(); ++c) {
    ad::NodeId current = tape.leaf_tensor(s[c]);
    for (const PipelineLayer& layer : model.pipelines[c].layers) {
      const ad::NodeId w = tape.leaf_weights(layer.bank);
      refs.conv_weights[c].push_back(w);
      current = tape.conv1d(current, w);
      if (layer.pool.enabled())
        current = tape.maxpool1d(current, layer.pool.kernel, layer.pool.stride);
      switch (layer.activation) {
        case Activation::identity:
          break;
        case Activation::relu:
          current = tape.relu(current);
          break;
        case Activation::selu:
          current = tape.selu(current);
          break;
      }
    }

    const ad::NodeId x_node = tape.leaf_tensor(instance.x[c]);
    refs.x_nodes.push_back(x_node);
    terms.push_back(tape.scale(tape.frobenius_sq(tape.sub(current, x_node)), 0.5));

    for (const ad::NodeId w : refs.conv_weights[c]) {
      if (mu != 0.0) terms.push_back(tape.scale(tape.frobenius_sq(w), mu));
      if (lambda != 0.0)
        terms.push_back(
            tape.scale(tape.logdet_rect(tape.filters_as_matrix(w), sv_floor), -lambda));
    }

    const ad::NodeId fusion_w = tape.leaf_matrix(model.fusion.per_channel[c]);
    refs.fusion_weights.push_back(fusion_w);
    const ad::NodeId contribution = tape.matmul(tape.flatten(x_node), fusion_w);
    fused = c == 0 ? contribution : tape.add(fused, contribution);

    if (mu != 0.0) terms.push_back(tape.scale(tape.frobenius_sq(fusion_w), mu));
    if (lambda != 0.0)
      terms.push_back(tape.scale(tape.logdet_rect(fusion_w, sv_floor), -lambda));
  }

  refs.z_node = tape.leaf_matrix(instance.z);
  terms.push_back(tape.scale(tape.frobenius_sq(tape.sub(refs.z_node, fused)), 0.5));

  refs.objective = tape.sum(terms);
  return refs;
}

}  // namespace

BlockGrads grad_joint(const JointInstance& instance, const std::vector<Tensor3>& s, double mu,
                      double lambda, double sv_floor) {
  ad::Tape tape;
  const GraphRefs refs = build_joint_graph(tape, instance, s, mu, lambda, sv_floor);
  tape.backward(refs.objective);

  BlockGrads out;
  out.objective = tape.scalar(refs.objective);
  out.values.conv.resize(instance.model.channel_count());
  for (std::size_t c = 0; c < instance.model.channel_count(); ++c)
    for (const ad::NodeId w : refs.conv_weights[c]) out.values.conv[c].push_back(tape.grad(w));
  for (const ad::NodeId w : refs.fusion_weights) out.values.fusion.push_back(tape.grad(w));
  for (const ad::NodeId x : refs.x_nodes) out.values.x.push_back(tape.grad(x));
  out.values.z = tape.grad(refs.z_node);
  return out;
}

namespace {

// theta -= rate * mhat / (sqrt(vhat) + eps), plus optional decoupled decay
// and optional projection onto the non-negative orthant.
void adam_update(std::span<double> theta, std::span<const double> grad, std::vector<double>& m,
                 std::vector<double>& v, const TrainConfig& config, double rate,
                 double bias1, double bias2, bool decay, bool project) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    theta[i] -= rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
    if (decay) theta[i] -= rate * config.weight_decay * theta[i];
    if (project && theta[i] < 0.0) theta[i] = 0.0;
  }
}

}  // namespace

void projected_adam_step(JointInstance& instance, const BlockGrads& grads, AdamMoments& moments,
                         const TrainConfig& config, std::size_t step_index) {
  if (step_index < 1) throw std::invalid_argument("projected_adam_step: step index starts at 1");
  const double t = static_cast<double>(step_index);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t c = 0; c < instance.model.channel_count(); ++c) {
    for (std::size_t l = 0; l < instance.model.pipelines[c].layers.size(); ++l)
      adam_update(instance.model.pipelines[c].layers[l].bank.w, grads.values.conv[c][l],
                  moments.m.conv[c][l], moments.v.conv[c][l], config, config.transform_rate(),
                  bias1, bias2, /*decay=*/true, /*project=*/false);
    adam_update(instance.model.fusion.per_channel[c].v, grads.values.fusion[c],
                moments.m.fusion[c], moments.v.fusion[c], config, config.transform_rate(), bias1,
                bias2, /*decay=*/true, /*project=*/false);
    adam_update(instance.x[c].v, grads.values.x[c], moments.m.x[c], moments.v.x[c], config,
                config.feature_rate(), bias1, bias2, /*decay=*/false, /*project=*/true);
  }
  adam_update(instance.z.v, grads.values.z, moments.m.z, moments.v.z, config,
              config.feature_rate(), bias1, bias2, /*decay=*/false, /*project=*/true);
}

namespace {

// Gradient step over a mini-batch: rebuilds the graph on the sample subset
// and scatters the feature gradients back into the full-size blocks.
// Regularizer terms enter every batch step, matching the objective as the
// tape sees it on the subset.
struct BatchView {
  JointInstance slice;
  std::vector<std::size_t> rows;
};

BatchView make_batch(const JointInstance& instance, const std::vector<Tensor3>& s,
                     std::span<const std::size_t> rows, std::vector<Tensor3>& s_out) {
  BatchView view;
  view.rows.assign(rows.begin(), rows.end());
  view.slice.model = instance.model;

  const std::size_t kb = rows.size();
  s_out.clear();
  for (std::size_t c = 0; c < s.size(); ++c) {
    Tensor3 sc(kb, s[c].channels, s[c].length);
    Tensor3 xc(kb, instance.x[c].channels, instance.x[c].length);
    for (std::size_t r = 0; r < kb; ++r) {
      std::copy(s[c].row(rows[r], 0), s[c].row(rows[r], 0) + s[c].channels * s[c].length,
                sc.row(r, 0));
      std::copy(instance.x[c].row(rows[r], 0),
                instance.x[c].row(rows[r], 0) + instance.x[c].channels * instance.x[c].length,
                xc.row(r, 0));
    }
    s_out.push_back(std::move(sc));
    view.slice.x.push_back(std::move(xc));
  }
  view.slice.z = Matrix(kb, instance.z.cols);
  for (std::size_t r = 0; r < kb; ++r)
    std::copy(instance.z.row(rows[r]), instance.z.row(rows[r]) + instance.z.cols,
              view.slice.z.row(r));
  return view;
}

}  // namespace

TrainResult train(JointInstance& instance, const std::vector<Tensor3>& s,
                  const TrainConfig& config, std::ostream* trace) {
  config.validate();
  if (s.empty() || s[0].samples == 0) throw std::invalid_argument("train: empty sample set");
  instance.model.validate(s[0].length);

  AdamMoments moments = AdamMoments::zeros_like(instance);
  TrainResult result;

  const auto record = [&](std::size_t epoch) {
    const JointBreakdown terms =
        joint_terms(instance.model, instance.x, instance.z, s, config.mu, config.lambda,
                    config.sv_floor);
    result.loss.push_back(terms.value());
    result.fusion_residual.push_back(terms.fusion_residual);
    result.conv_residual.push_back(terms.conv_residual);
    result.regularizers.push_back(terms.regularizers);
    if (trace)
      (*trace) << epoch << ',' << terms.value() << ',' << terms.fusion_residual << ','
               << terms.conv_residual << ',' << terms.regularizers << '\n';
    return terms;
  };

  if (trace) (*trace) << "epoch,loss,fusion_residual,conv_residual,regularizers\n";
  record(0);
  const double initial = result.loss.front();

  const std::size_t k = s[0].samples;
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);

  std::size_t step = 0;
  std::size_t over_budget_streak = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.batch == 0 || config.batch >= k) {
      const BlockGrads grads =
          grad_joint(instance, s, config.mu, config.lambda, config.sv_floor);
      projected_adam_step(instance, grads, moments, config, ++step);
    } else {
      Rng shuffle(derive_seed(config.seed, "epoch-" + std::to_string(epoch)));
      for (std::size_t i = k; i > 1; --i)
        std::swap(order[i - 1], order[shuffle.index(i)]);
      for (std::size_t start = 0; start < k; start += config.batch) {
        const std::size_t count = std::min(config.batch, k - start);
        std::vector<Tensor3> s_batch;
        BatchView batch = make_batch(instance, s,
                                     std::span<const std::size_t>(order.data() + start, count),
                                     s_batch);
        const BlockGrads grads =
            grad_joint(batch.slice, s_batch, config.mu, config.lambda, config.sv_floor);

        // transforms see the batch gradient directly; feature gradients are
        // scattered into full-size blocks so Adam moments stay per-row
        BlockGrads full;
        full.objective = grads.objective;
        full.values = BlockValues::zeros_like(instance);
        full.values.conv = grads.values.conv;
        full.values.fusion = grads.values.fusion;
        for (std::size_t c = 0; c < instance.x.size(); ++c) {
          const std::size_t row_width = instance.x[c].channels * instance.x[c].length;
          for (std::size_t r = 0; r < batch.rows.size(); ++r)
            std::copy(grads.values.x[c].begin() + static_cast<std::ptrdiff_t>(r * row_width),
                      grads.values.x[c].begin() + static_cast<std::ptrdiff_t>((r + 1) * row_width),
                      full.values.x[c].begin() + static_cast<std::ptrdiff_t>(batch.rows[r] * row_width));
        }
        for (std::size_t r = 0; r < batch.rows.size(); ++r)
          std::copy(grads.values.z.begin() + static_cast<std::ptrdiff_t>(r * instance.z.cols),
                    grads.values.z.begin() + static_cast<std::ptrdiff_t>((r + 1) * instance.z.cols),
                    full.values.z.begin() + static_cast<std::ptrdiff_t>(batch.rows[r] * instance.z.cols));
        projected_adam_step(instance, full, moments, config, ++step);
      }
    }

    const JointBreakdown terms = record(epoch);
    if (!terms.feasible)
      throw NumericOverflowError("train: infeasible features after projection (internal error)");
    if (terms.value() > 1e3 * std::max(std::abs(initial), 1e-12)) {
      if (++over_budget_streak >= 10)
        throw DivergenceError(
            "train: loss exceeded 1000x its initial value for 10 consecutive epochs; "
            "try a smaller learning rate");
    } else {
      over_budget_streak = 0;
    }
  }
  return result;
}

std::vector<double> ParamPack::pack(const JointInstance& instance) {
  std::vector<double> flat;
  for (const auto& pipeline : instance.model.pipelines)
    for (const auto& layer : pipeline.layers)
      flat.insert(flat.end(), layer.bank.w.begin(), layer.bank.w.end());
  for (const auto& t : instance.model.fusion.per_channel)
    flat.insert(flat.end(), t.v.begin(), t.v.end());
  for (const auto& x : instance.x) flat.insert(flat.end(), x.v.begin(), x.v.end());
  flat.insert(flat.end(), instance.z.v.begin(), instance.z.v.end());
  return flat;
}

void ParamPack::unpack(JointInstance& instance, std::span<const double> flat) {
  std::size_t pos = 0;
  const auto take = [&](std::vector<double>& dst) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
    pos += dst.size();
  };
  for (auto& pipeline : instance.model.pipelines)
    for (auto& layer : pipeline.layers) take(layer.bank.w);
  for (auto& t : instance.model.fusion.per_channel) take(t.v);
  for (auto& x : instance.x) take(x.v);
  take(instance.z.v);
  if (pos != flat.size()) throw ShapeError("unpack: parameter count mismatch");
}

std::vector<double> ParamPack::pack_grads(const BlockGrads& grads) {
  std::vector<double> flat;
  for (const auto& channel : grads.values.conv)
    for (const auto& layer : channel) flat.insert(flat.end(), layer.begin(), layer.end());
  for (const auto& t : grads.values.fusion) flat.insert(flat.end(), t.begin(), t.end());
  for (const auto& x : grads.values.x) flat.insert(flat.end(), x.begin(), x.end());
  flat.insert(flat.end(), grads.values.z.begin(), grads.values.z.end());
  return flat;
}

std::string ParamPack::block_of(const JointInstance& instance, std::size_t index) {
  std::size_t pos = 0;
  for (std::size_t c = 0; c < instance.model.pipelines.size(); ++c)
    for (std::size_t l = 0; l < instance.model.pipelines[c].layers.size(); ++l) {
      pos += instance.model.pipelines[c].layers[l].bank.w.size();
      if (index < pos)
        return "conv[c=" + std::to_string(c) + ",l=" + std::to_string(l) + "]";
    }
  for (std::size_t c = 0; c < instance.model.fusion.per_channel.size(); ++c) {
    pos += instance.model.fusion.per_channel[c].v.size();
    if (index < pos) return "fusion[c=" + std::to_string(c) + "]";
  }
  for (std::size_t c = 0; c < instance.x.size(); ++c) {
    pos += instance.x[c].v.size();
    if (index < pos) return "x[c=" + std::to_string(c) + "]";
  }
  return "z";
}

GradcheckReport gradcheck(const std::function<double(std::span<const double>)>& objective,
                          std::span<const double> params, std::span<const double> analytic_grad,
                          std::size_t samples, double tol, std::uint64_t seed) {
  if (params.size() != analytic_grad.size())
    throw ShapeError("gradcheck: gradient size does not match parameter size");

  GradcheckReport report;
  report.tolerance = tol;
  Rng rng(seed);
  std::vector<double> work(params.begin(), params.end());

  for (std::size_t n = 0; n < samples; ++n) {
    const std::size_t i = rng.index(params.size());
    const double x0 = work[i];
    const double ad = analytic_grad[i];

    double best_err = std::numeric_limits<double>::infinity();
    double best_fd = 0.0;
    double h = 6e-6 * std::max(1.0, std::abs(x0));
    for (int attempt = 0; attempt < 3; ++attempt, h /= 8.0) {
      work[i] = x0 + h;
      const double fp = objective(work);
      work[i] = x0 - h;
      const double fm = objective(work);
      work[i] = x0;
      const double fd = (fp - fm) / (2.0 * h);
      const double err = std::abs(fd - ad) / std::max({1.0, std::abs(fd), std::abs(ad)});
      if (err < best_err) {
        best_err = err;
        best_fd = fd;
      }
      if (best_err <= tol) break;
    }

    ++report.checked;
    report.max_rel_error = std::max(report.max_rel_error, best_err);
    if (best_err > tol)
      report.flagged.push_back({i, ad, best_fd, best_err, ""});
  }
  return report;
}

GradcheckReport gradcheck_joint(const JointInstance& instance, const std::vector<Tensor3>& s,
                                double mu, double lambda, double sv_floor, std::size_t samples,
                                double tol, std::uint64_t seed) {
  const std::vector<double> params = ParamPack::pack(instance);
  const BlockGrads grads = grad_joint(instance, s, mu, lambda, sv_floor);
  const std::vector<double> analytic = ParamPack::pack_grads(grads);

  JointInstance scratch = instance;
  const auto objective = [&](std::span<const double> flat) {
    ParamPack::unpack(scratch, flat);
    return joint_objective(scratch.model, scratch.x, scratch.z, s, mu, lambda, sv_floor).value;
  };

  GradcheckReport report = gradcheck(objective, params, analytic, samples, tol, seed);
  for (auto& flagged : report.flagged)
    flagged.block = ParamPack::block_of(instance, flagged.index);
  return report;
}

}  // namespace deconfuse
