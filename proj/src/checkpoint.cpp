#include "deconfuse/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace deconfuse {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'F', 'C', 'H', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

struct Writer {
  std::string buffer;

  void bytes(const void* data, std::size_t n) {
    buffer.append(static_cast<const char*>(data), n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void f64s(const std::vector<double>& vs) { bytes(vs.data(), vs.size() * sizeof(double)); }
};

struct Reader {
  const std::string& buffer;
  std::size_t pos = 0;

  void bytes(void* data, std::size_t n) {
    if (pos + n > buffer.size()) throw CheckpointError("checkpoint: truncated payload");
    std::memcpy(data, buffer.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> vs(n);
    bytes(vs.data(), n * sizeof(double));
    return vs;
  }
};

std::string encode_model(const DeconfuseModel& model) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(model.pipelines.size()));
  w.u32(static_cast<std::uint32_t>(model.pipelines.front().layers.size()));
  for (const ChannelPipeline& pipeline : model.pipelines) {
    for (const PipelineLayer& layer : pipeline.layers) {
      w.u32(static_cast<std::uint32_t>(layer.bank.out_channels));
      w.u32(static_cast<std::uint32_t>(layer.bank.in_channels));
      w.u32(static_cast<std::uint32_t>(layer.bank.kernel_size));
      w.u32(static_cast<std::uint32_t>(layer.bank.stride));
      w.u32(static_cast<std::uint32_t>(layer.bank.padding));
      w.u32(static_cast<std::uint32_t>(layer.activation));
      w.u32(static_cast<std::uint32_t>(layer.pool.kernel));
      w.u32(static_cast<std::uint32_t>(layer.pool.stride));
      w.f64s(layer.bank.w);
    }
  }
  for (const Matrix& t : model.fusion.per_channel) {
    w.u32(static_cast<std::uint32_t>(t.rows));
    w.u32(static_cast<std::uint32_t>(t.cols));
    w.f64s(t.v);
  }
  return std::move(w.buffer);
}

DeconfuseModel decode_model(const std::string& payload) {
  Reader r{payload};
  DeconfuseModel model;
  const std::uint32_t channels = r.u32();
  const std::uint32_t layers = r.u32();
  if (channels == 0 || layers == 0) throw CheckpointError("checkpoint: empty model section");
  model.pipelines.resize(channels);
  for (std::uint32_t c = 0; c < channels; ++c) {
    model.pipelines[c].channel_index = c;
    for (std::uint32_t l = 0; l < layers; ++l) {
      PipelineLayer layer;
      const std::uint32_t m = r.u32();
      const std::uint32_t in = r.u32();
      const std::uint32_t p = r.u32();
      const std::uint32_t stride = r.u32();
      const std::uint32_t pad = r.u32();
      layer.bank = FilterBank(m, in, p, stride, pad);
      const std::uint32_t act = r.u32();
      if (act > 2) throw CheckpointError("checkpoint: unknown activation code");
      layer.activation = static_cast<Activation>(act);
      layer.pool.kernel = r.u32();
      layer.pool.stride = r.u32();
      layer.bank.w = r.f64s(static_cast<std::size_t>(m) * in * p);
      model.pipelines[c].layers.push_back(std::move(layer));
    }
    model.pipelines[c].validate();
  }
  for (std::uint32_t c = 0; c < channels; ++c) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix t(rows, cols);
    t.v = r.f64s(static_cast<std::size_t>(rows) * cols);
    model.fusion.per_channel.push_back(std::move(t));
  }
  model.output_dim = model.fusion.per_channel.front().cols;
  return model;
}

std::string encode_ridge(const std::vector<std::pair<std::size_t, RidgeModel>>& heads) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(heads.size()));
  for (const auto& [channel, head] : heads) {
    w.u32(static_cast<std::uint32_t>(channel));
    w.u32(static_cast<std::uint32_t>(head.weights.size()));
    w.f64(head.alpha_reg);
    w.f64s(head.weights);
  }
  return std::move(w.buffer);
}

std::vector<std::pair<std::size_t, RidgeModel>> decode_ridge(const std::string& payload) {
  Reader r{payload};
  std::vector<std::pair<std::size_t, RidgeModel>> heads;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t channel = r.u32();
    const std::uint32_t weights = r.u32();
    RidgeModel head;
    head.alpha_reg = r.f64();
    head.weights = r.f64s(weights);
    head.trained = true;
    heads.emplace_back(channel, std::move(head));
  }
  return heads;
}

std::string encode_forest(const ForestModel& forest) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(forest.trees.size()));
  w.u32(static_cast<std::uint32_t>(forest.feature_dim));
  w.u32(static_cast<std::uint32_t>(forest.options.max_depth));
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    w.u64(forest.tree_seeds[t]);
    w.u32(static_cast<std::uint32_t>(forest.inbag[t].size()));
    for (const std::size_t i : forest.inbag[t]) w.u64(i);
    const DecisionTree& tree = forest.trees[t];
    w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    for (const DecisionTree::Node& node : tree.nodes) {
      w.u32(node.leaf ? 1 : 0);
      w.u32(static_cast<std::uint32_t>(node.feature));
      w.f64(node.threshold);
      w.u32(static_cast<std::uint32_t>(node.left));
      w.u32(static_cast<std::uint32_t>(node.right));
      w.f64(node.p0);
      w.f64(node.p1);
    }
  }
  return std::move(w.buffer);
}

ForestModel decode_forest(const std::string& payload) {
  Reader r{payload};
  ForestModel forest;
  const std::uint32_t trees = r.u32();
  forest.feature_dim = r.u32();
  forest.options.trees = trees;
  forest.options.max_depth = r.u32();
  for (std::uint32_t t = 0; t < trees; ++t) {
    forest.tree_seeds.push_back(r.u64());
    const std::uint32_t bag = r.u32();
    std::vector<std::size_t> indices(bag);
    for (std::uint32_t i = 0; i < bag; ++i) indices[i] = r.u64();
    forest.inbag.push_back(std::move(indices));
    DecisionTree tree;
    const std::uint32_t nodes = r.u32();
    for (std::uint32_t i = 0; i < nodes; ++i) {
      DecisionTree::Node node;
      node.leaf = r.u32() == 1;
      node.feature = r.u32();
      node.threshold = r.f64();
      node.left = static_cast<std::int32_t>(r.u32());
      node.right = static_cast<std::int32_t>(r.u32());
      node.p0 = r.f64();
      node.p1 = r.f64();
      tree.nodes.push_back(node);
    }
    forest.trees.push_back(std::move(tree));
  }
  forest.trained = true;
  return forest;
}

nlohmann::json sidecar_json(const Checkpoint& checkpoint) {
  nlohmann::json j;
  j["format_version"] = kVersion;
  if (checkpoint.model) {
    const DeconfuseModel& model = *checkpoint.model;
    nlohmann::json m;
    m["channels"] = model.pipelines.size();
    m["layers"] = model.pipelines.front().layers.size();
    m["output_dim"] = model.output_dim;
    nlohmann::json layers = nlohmann::json::array();
    for (const PipelineLayer& layer : model.pipelines.front().layers) {
      layers.push_back({{"filters", layer.bank.out_channels},
                        {"in_channels", layer.bank.in_channels},
                        {"kernel", layer.bank.kernel_size},
                        {"stride", layer.bank.stride},
                        {"padding", layer.bank.padding},
                        {"activation", static_cast<int>(layer.activation)},
                        {"pool_kernel", layer.pool.kernel},
                        {"pool_stride", layer.pool.stride}});
    }
    m["layer_geometry"] = layers;
    m["fusion_rows"] = model.fusion.per_channel.front().rows;
    j["model"] = m;
  }
  if (!checkpoint.ridge_heads.empty()) {
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& [channel, head] : checkpoint.ridge_heads)
      heads.push_back({{"target_channel", channel},
                       {"weights", head.weights.size()},
                       {"alpha_reg", head.alpha_reg}});
    j["ridge_heads"] = heads;
  }
  if (checkpoint.forest)
    j["forest"] = {{"trees", checkpoint.forest->trees.size()},
                   {"max_depth", checkpoint.forest->options.max_depth},
                   {"feature_dim", checkpoint.forest->feature_dim}};
  return j;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::vector<std::pair<std::string, std::string>> sections;
  if (checkpoint.model) sections.emplace_back("MODL", encode_model(*checkpoint.model));
  if (!checkpoint.ridge_heads.empty())
    sections.emplace_back("RIDG", encode_ridge(checkpoint.ridge_heads));
  if (checkpoint.forest) sections.emplace_back("FRST", encode_forest(*checkpoint.forest));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError("checkpoint: cannot write " + path);
  file.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kVersion;
  file.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint32_t count = static_cast<std::uint32_t>(sections.size());
  file.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto& [tag, payload] : sections) {
    file.write(tag.data(), 4);
    const std::uint64_t size = payload.size();
    file.write(reinterpret_cast<const char*>(&size), sizeof size);
    file.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!file) throw CheckpointError("checkpoint: write failed for " + path);

  std::ofstream sidecar(path + ".json", std::ios::trunc);
  sidecar << sidecar_json(checkpoint).dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("checkpoint: cannot open " + path);

  char magic[8];
  file.read(magic, sizeof magic);
  if (!file || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  file.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  std::uint32_t count = 0;
  file.read(reinterpret_cast<char*>(&count), sizeof count);

  Checkpoint checkpoint;
  for (std::uint32_t i = 0; i < count; ++i) {
    char tag[5] = {};
    file.read(tag, 4);
    std::uint64_t size = 0;
    file.read(reinterpret_cast<char*>(&size), sizeof size);
    std::string payload(size, '\0');
    file.read(payload.data(), static_cast<std::streamsize>(size));
    if (!file) throw CheckpointError("checkpoint: truncated section " + std::string(tag));

    const std::string name(tag);
    if (name == "MODL")
      checkpoint.model = decode_model(payload);
    else if (name == "RIDG")
      checkpoint.ridge_heads = decode_ridge(payload);
    else if (name == "FRST")
      checkpoint.forest = decode_forest(payload);
    else
      throw CheckpointError("checkpoint: unknown section tag " + name);
  }
  return checkpoint;
}

void save_model_checkpoint(const std::string& path, const DeconfuseModel& model) {
  Checkpoint checkpoint;
  checkpoint.model = model;
  save_checkpoint(path, checkpoint);
}

DeconfuseModel load_model_checkpoint(const std::string& path) {
  Checkpoint checkpoint = load_checkpoint(path);
  if (!checkpoint.model) throw CheckpointError("checkpoint: " + path + " has no model section");
  return std::move(*checkpoint.model);
}

}  // namespace deconfuse
