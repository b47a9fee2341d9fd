#include "deconfuse/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

namespace deconfuse {

namespace {

using nlohmann::json;

void reject_unknown(const json& object, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : object.items())
    if (!known.contains(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& object, const std::string& key, T fallback) {
  if (!object.contains(key)) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + key + "'");
  }
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "selu") return Activation::selu;
  throw ConfigError("config: unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::selu:
      return "selu";
  }
  return "identity";
}

ArchitectureSpec parse_architecture(const json& object) {
  reject_unknown(object, {"layers", "alpha"}, "architecture");
  ArchitectureSpec spec = ArchitectureSpec::defaults();
  spec.alpha = get_or(object, "alpha", spec.alpha);
  if (object.contains("layers")) {
    if (!object.at("layers").is_array() || object.at("layers").empty())
      throw ConfigError("config: architecture.layers must be a non-empty array");
    spec.layers.clear();
    for (const json& jl : object.at("layers")) {
      reject_unknown(jl, {"filters", "kernel", "stride", "padding", "pool", "activation"},
                     "architecture.layers[]");
      LayerSpec layer;
      layer.filters = get_or<std::size_t>(jl, "filters", 1);
      layer.kernel = get_or<std::size_t>(jl, "kernel", 1);
      layer.stride = get_or<std::size_t>(jl, "stride", 1);
      layer.padding = get_or<std::size_t>(jl, "padding", 0);
      if (jl.contains("pool") && !jl.at("pool").is_null()) {
        reject_unknown(jl.at("pool"), {"kernel", "stride"}, "architecture.layers[].pool");
        layer.pool.kernel = get_or<std::size_t>(jl.at("pool"), "kernel", 2);
        layer.pool.stride = get_or<std::size_t>(jl.at("pool"), "stride", 2);
      }
      layer.activation = parse_activation(get_or<std::string>(jl, "activation", "identity"));
      spec.layers.push_back(layer);
    }
  }
  return spec;
}

TrainConfig parse_train(const json& object) {
  reject_unknown(object,
                 {"learning_rate", "beta1", "beta2", "adam_epsilon", "weight_decay", "mu",
                  "lambda", "sv_floor", "epochs", "batch", "learning_rate_transforms",
                  "learning_rate_features"},
                 "train");
  TrainConfig train;
  train.learning_rate = get_or(object, "learning_rate", train.learning_rate);
  train.beta1 = get_or(object, "beta1", train.beta1);
  train.beta2 = get_or(object, "beta2", train.beta2);
  train.adam_epsilon = get_or(object, "adam_epsilon", train.adam_epsilon);
  train.weight_decay = get_or(object, "weight_decay", train.weight_decay);
  train.mu = get_or(object, "mu", train.mu);
  train.lambda = get_or(object, "lambda", train.lambda);
  train.sv_floor = get_or(object, "sv_floor", train.sv_floor);
  train.epochs = get_or(object, "epochs", train.epochs);
  train.batch = get_or(object, "batch", train.batch);
  train.learning_rate_transforms =
      get_or(object, "learning_rate_transforms", train.learning_rate_transforms);
  train.learning_rate_features =
      get_or(object, "learning_rate_features", train.learning_rate_features);
  return train;
}

}  // namespace

void RunConfig::validate() const {
  if (window < 2) throw ConfigError("config: window must be >= 2");
  if (split_fraction <= 0.0 || split_fraction >= 1.0)
    throw ConfigError("config: split_fraction must lie in (0, 1)");
  if (capital0 <= 0.0) throw ConfigError("config: capital0 must be positive");
  if (charge < 0.0) throw ConfigError("config: charge must be >= 0");
  if (trading_days_per_year <= 0.0)
    throw ConfigError("config: trading_days_per_year must be positive");
  if (ridge_alpha < 0.0) throw ConfigError("config: ridge_alpha must be >= 0");
  if (forest_trees < 1 || forest_depth < 1)
    throw ConfigError("config: forest needs at least one tree and depth 1");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  if (architecture.alpha <= 0.0 || architecture.alpha > 1.0)
    throw ConfigError("config: architecture alpha must lie in (0, 1]");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  reject_unknown(root,
                 {"schema_version", "data_dir", "symbols", "window", "architecture", "train",
                  "head", "eval", "seed", "workers", "output_dir"},
                 "the top level");
  const int version = get_or(root, "schema_version", kSchemaVersion);
  if (version != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));

  RunConfig config;
  config.data_dir = get_or<std::string>(root, "data_dir", "");
  config.symbols = get_or<std::vector<std::string>>(root, "symbols", {});
  config.window = get_or(root, "window", config.window);
  if (root.contains("architecture")) config.architecture = parse_architecture(root.at("architecture"));
  if (root.contains("train")) config.train = parse_train(root.at("train"));

  if (root.contains("head")) {
    const json& head = root.at("head");
    reject_unknown(head, {"ridge_alpha", "ridge_cv", "forest_trees", "forest_depth"}, "head");
    config.ridge_alpha = get_or(head, "ridge_alpha", config.ridge_alpha);
    config.ridge_cv = get_or(head, "ridge_cv", config.ridge_cv);
    config.forest_trees = get_or(head, "forest_trees", config.forest_trees);
    config.forest_depth = get_or(head, "forest_depth", config.forest_depth);
  }
  if (root.contains("eval")) {
    const json& eval = root.at("eval");
    reject_unknown(eval, {"split_fraction", "capital0", "charge", "trading_days_per_year"},
                   "eval");
    config.split_fraction = get_or(eval, "split_fraction", config.split_fraction);
    config.capital0 = get_or(eval, "capital0", config.capital0);
    config.charge = get_or(eval, "charge", config.charge);
    config.trading_days_per_year =
        get_or(eval, "trading_days_per_year", config.trading_days_per_year);
  }
  config.seed = get_or(root, "seed", config.seed);
  config.workers = get_or(root, "workers", config.workers);
  config.output_dir = get_or(root, "output_dir", config.output_dir);

  config.validate();
  return config;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
  json layers = json::array();
  for (const LayerSpec& layer : architecture.layers) {
    json jl = {{"filters", layer.filters},
               {"kernel", layer.kernel},
               {"stride", layer.stride},
               {"padding", layer.padding},
               {"activation", activation_name(layer.activation)}};
    if (layer.pool.enabled())
      jl["pool"] = {{"kernel", layer.pool.kernel}, {"stride", layer.pool.stride}};
    else
      jl["pool"] = nullptr;
    layers.push_back(jl);
  }

  const json root = {
      {"schema_version", kSchemaVersion},
      {"data_dir", data_dir},
      {"symbols", symbols},
      {"window", window},
      {"architecture", {{"layers", layers}, {"alpha", architecture.alpha}}},
      {"train",
       {{"learning_rate", train.learning_rate},
        {"beta1", train.beta1},
        {"beta2", train.beta2},
        {"adam_epsilon", train.adam_epsilon},
        {"weight_decay", train.weight_decay},
        {"mu", train.mu},
        {"lambda", train.lambda},
        {"sv_floor", train.sv_floor},
        {"epochs", train.epochs},
        {"batch", train.batch},
        {"learning_rate_transforms", train.learning_rate_transforms},
        {"learning_rate_features", train.learning_rate_features}}},
      {"head",
       {{"ridge_alpha", ridge_alpha},
        {"ridge_cv", ridge_cv},
        {"forest_trees", forest_trees},
        {"forest_depth", forest_depth}}},
      {"eval",
       {{"split_fraction", split_fraction},
        {"capital0", capital0},
        {"charge", charge},
        {"trading_days_per_year", trading_days_per_year}}},
      {"seed", seed},
      {"workers", workers},
      {"output_dir", output_dir},
  };
  return root.dump(2) + "\n";
}

void RunConfig::save(const std::string& path) const {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw ConfigError("config: cannot write " + path);
  file << to_json_text();
}

}  // namespace deconfuse
