#include "deconfuse/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "deconfuse/backtest.hpp"
#include "deconfuse/checkpoint.hpp"
#include "deconfuse/metrics.hpp"
#include "deconfuse/rng.hpp"
#include "deconfuse/stock_data.hpp"

namespace deconfuse {

namespace fs = std::filesystem;

namespace {

// Round-trip-exact float formatting so reruns are byte-identical.
std::string fmt(double x) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

std::vector<std::string> resolve_symbols(const RunConfig& config) {
  if (!config.symbols.empty()) {
    std::vector<std::string> symbols = config.symbols;
    std::sort(symbols.begin(), symbols.end());
    return symbols;
  }
  std::vector<std::string> symbols;
  if (!fs::is_directory(config.data_dir))
    throw ConfigError("config: data_dir '" + config.data_dir + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(config.data_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      symbols.push_back(entry.path().stem().string());
  std::sort(symbols.begin(), symbols.end());
  if (symbols.empty())
    throw ConfigError("config: no .csv files under '" + config.data_dir + "'");
  return symbols;
}

std::string symbol_dir(const RunConfig& config, const std::string& symbol) {
  return (fs::path(config.output_dir) / symbol).string();
}

SampleSet load_samples(const RunConfig& config, const std::string& symbol) {
  const std::string path = (fs::path(config.data_dir) / (symbol + ".csv")).string();
  const StockSeries series = ingest_csv(path, config.window + 1);
  return windowize(series, config.window, config.split_fraction);
}

std::vector<Tensor3> channel_windows(const SampleSet& set, bool train_only) {
  std::vector<Tensor3> s;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    s.push_back(train_only ? set.split_windows(c, true) : set.windows[c]);
  return s;
}

DeconfuseModel load_compatible_model(const RunConfig& config, const std::string& symbol) {
  const std::string path = (fs::path(symbol_dir(config, symbol)) / "checkpoint.bin").string();
  DeconfuseModel model = load_model_checkpoint(path);
  try {
    model.validate(config.window);
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint for " + symbol +
                          " is incompatible with the configuration: " + e.what());
  }
  if (model.channel_count() != kChannelCount)
    throw CheckpointError("checkpoint for " + symbol + " has " +
                          std::to_string(model.channel_count()) + " channels, expected " +
                          std::to_string(kChannelCount));
  return model;
}

/// Runs fn per symbol with worker parallelism and per-symbol failure
/// isolation; outputs stay deterministic because every symbol's work and
/// files are independent and results are sorted afterwards.
template <typename Fn>
BatchOutcome run_per_symbol(const RunConfig& config, Fn&& fn) {
  config.validate();
  const std::vector<std::string> symbols = resolve_symbols(config);
  BatchOutcome outcome;

  const std::int64_t n = static_cast<std::int64_t>(symbols.size());
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(config.workers))
  for (std::int64_t i = 0; i < n; ++i) {
    const std::string& symbol = symbols[static_cast<std::size_t>(i)];
    std::string failure;
    try {
      fn(symbol);
    } catch (const std::exception& e) {
      failure = e.what();
    }
#pragma omp critical(deconfuse_outcome)
    {
      if (failure.empty())
        outcome.completed.push_back(symbol);
      else
        outcome.failures.emplace_back(symbol, failure);
    }
  }
  std::sort(outcome.completed.begin(), outcome.completed.end());
  std::sort(outcome.failures.begin(), outcome.failures.end());
  return outcome;
}

struct FeatureSplit {
  Matrix train;
  Matrix test;
};

FeatureSplit split_rows(const Matrix& all, std::size_t train_count) {
  FeatureSplit split;
  split.train = Matrix(train_count, all.cols);
  split.test = Matrix(all.rows - train_count, all.cols);
  std::copy(all.v.begin(), all.v.begin() + static_cast<std::ptrdiff_t>(train_count * all.cols),
            split.train.v.begin());
  std::copy(all.v.begin() + static_cast<std::ptrdiff_t>(train_count * all.cols), all.v.end(),
            split.test.v.begin());
  return split;
}

constexpr std::array<std::size_t, kChannelCount> kReportChannelOrder = {3, 0, 1, 2, 4};
// close, open, high, low, nav

}  // namespace

BatchOutcome cmd_train(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  config.save((fs::path(config.output_dir) / "config.resolved.json").string());

  return run_per_symbol(config, [&](const std::string& symbol) {
    const SampleSet set = load_samples(config, symbol);
    const std::vector<Tensor3> s_train = channel_windows(set, /*train_only=*/true);

    const std::uint64_t symbol_seed = derive_seed(config.seed, symbol);
    DeconfuseModel model =
        make_model(config.architecture, kChannelCount, config.window, symbol_seed);
    JointInstance instance = init_instance(std::move(model), s_train);

    TrainConfig train_config = config.train;
    train_config.seed = symbol_seed;

    const std::string dir = symbol_dir(config, symbol);
    fs::create_directories(dir);
    std::ofstream trace((fs::path(dir) / "loss.csv").string(), std::ios::trunc);
    train(instance, s_train, train_config, &trace);

    save_model_checkpoint((fs::path(dir) / "checkpoint.bin").string(), instance.model);
  });
}

BatchOutcome cmd_features(const RunConfig& config) {
  return run_per_symbol(config, [&](const std::string& symbol) {
    const SampleSet set = load_samples(config, symbol);
    const DeconfuseModel model = load_compatible_model(config, symbol);
    const LatentFeatures latent = infer_features(model, channel_windows(set, false));

    std::ofstream out((fs::path(symbol_dir(config, symbol)) / "features.csv").string(),
                      std::ios::trunc);
    out << "date,split";
    for (std::size_t o = 0; o < latent.fused.cols; ++o) out << ",z" << o;
    out << '\n';
    for (std::size_t k = 0; k < latent.fused.rows; ++k) {
      out << set.end_dates[k] << ',' << (k < set.train_count ? "train" : "test");
      for (std::size_t o = 0; o < latent.fused.cols; ++o)
        out << ',' << fmt(latent.fused.at(k, o));
      out << '\n';
    }
  });
}

BatchOutcome cmd_forecast(const RunConfig& config) {
  return run_per_symbol(config, [&](const std::string& symbol) {
    const SampleSet set = load_samples(config, symbol);
    const DeconfuseModel model = load_compatible_model(config, symbol);
    const LatentFeatures latent = infer_features(model, channel_windows(set, false));
    const FeatureSplit features = split_rows(latent.fused, set.train_count);

    Checkpoint heads;
    std::array<double, kChannelCount> mae_norm{}, mae_raw{};
    std::vector<double> predicted_close_raw;

    for (std::size_t c = 0; c < kChannelCount; ++c) {
      std::vector<double> y_train(set.train_count);
      for (std::size_t k = 0; k < set.train_count; ++k)
        y_train[k] = set.stats[c].normalize(set.targets.at(k, c));

      double alpha = config.ridge_alpha;
      if (config.ridge_cv)
        alpha = ridge_cv_alpha(features.train, y_train, {0.01, 0.1, 1.0, 10.0, 100.0});
      const RidgeModel head = ridge_fit(features.train, y_train, alpha);
      heads.ridge_heads.emplace_back(c, head);

      const std::vector<double> pred_norm = ridge_predict(head, features.test);
      std::vector<double> truth_norm(pred_norm.size());
      std::vector<double> pred_denorm(pred_norm.size());
      std::vector<double> truth_raw(pred_norm.size());
      for (std::size_t k = 0; k < pred_norm.size(); ++k) {
        const double raw = set.targets.at(set.train_count + k, c);
        truth_norm[k] = set.stats[c].normalize(raw);
        truth_raw[k] = raw;
        pred_denorm[k] = set.stats[c].denormalize(pred_norm[k]);
      }
      mae_norm[c] = mae(pred_norm, truth_norm);
      mae_raw[c] = mae(pred_denorm, truth_raw);
      if (c == kCloseChannel) predicted_close_raw = pred_denorm;
    }

    const std::string dir = symbol_dir(config, symbol);
    save_checkpoint((fs::path(dir) / "ridge.bin").string(), heads);

    std::ofstream out((fs::path(dir) / "forecast.csv").string(), std::ios::trunc);
    out << "symbol";
    for (const std::size_t c : kReportChannelOrder) out << ",mae_" << kChannelNames[c];
    for (const std::size_t c : kReportChannelOrder) out << ",mae_" << kChannelNames[c] << "_raw";
    out << '\n' << symbol;
    for (const std::size_t c : kReportChannelOrder) out << ',' << fmt(mae_norm[c]);
    for (const std::size_t c : kReportChannelOrder) out << ',' << fmt(mae_raw[c]);
    out << '\n';

    std::ofstream plot((fs::path(dir) / "plot_close.csv").string(), std::ios::trunc);
    plot << "date,predicted_close,true_close\n";
    for (std::size_t k = 0; k < predicted_close_raw.size(); ++k)
      plot << set.end_dates[set.train_count + k] << ',' << fmt(predicted_close_raw[k]) << ','
           << fmt(set.targets.at(set.train_count + k, kCloseChannel)) << '\n';
  });
}

BatchOutcome cmd_trade(const RunConfig& config) {
  return run_per_symbol(config, [&](const std::string& symbol) {
    const SampleSet set = load_samples(config, symbol);
    const DeconfuseModel model = load_compatible_model(config, symbol);
    const LatentFeatures latent = infer_features(model, channel_windows(set, false));
    const FeatureSplit features = split_rows(latent.fused, set.train_count);

    const std::vector<int> labels_train(set.labels.begin(),
                                        set.labels.begin() + static_cast<std::ptrdiff_t>(set.train_count));
    const std::vector<int> labels_test(set.labels.begin() + static_cast<std::ptrdiff_t>(set.train_count),
                                       set.labels.end());

    ForestOptions options;
    options.trees = config.forest_trees;
    options.max_depth = config.forest_depth;
    const ForestModel forest =
        forest_fit(features.train, labels_train, derive_seed(config.seed, symbol), options);

    const std::vector<double> scores = forest_predict_proba(forest, features.test);
    std::vector<int> predicted(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = scores[i] >= 0.5 ? 1 : 0;

    const ClassificationMetrics metrics =
        classification_metrics(predicted, scores, labels_test);

    const std::vector<double> closes_test(set.end_closes.begin() + static_cast<std::ptrdiff_t>(set.train_count),
                                          set.end_closes.end());
    const BacktestResult predicted_ar = backtest_ar(predicted, closes_test, config.capital0,
                                                    config.charge, config.trading_days_per_year);
    const BacktestResult true_ar = backtest_ar(labels_test, closes_test, config.capital0,
                                               config.charge, config.trading_days_per_year);

    const std::string dir = symbol_dir(config, symbol);
    Checkpoint heads;
    heads.forest = forest;
    save_checkpoint((fs::path(dir) / "forest.bin").string(), heads);

    std::ofstream out((fs::path(dir) / "trade.csv").string(), std::ios::trunc);
    out << "symbol,precision,recall,f1,auc,predicted_ar,true_ar\n";
    out << symbol << ',' << fmt(metrics.precision) << ',' << fmt(metrics.recall) << ','
        << fmt(metrics.f1) << ',' << (metrics.auc ? fmt(*metrics.auc) : "") << ','
        << fmt(predicted_ar.ar_percent) << ',' << fmt(true_ar.ar_percent) << '\n';

    std::ofstream roc((fs::path(dir) / "roc.csv").string(), std::ios::trunc);
    roc << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : roc_points(scores, labels_test))
      roc << fmt(fpr) << ',' << fmt(tpr) << '\n';
  });
}

namespace {

std::map<std::string, std::string> read_single_row_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) return {};
  std::string header, row;
  if (!std::getline(file, header) || !std::getline(file, row)) return {};
  std::map<std::string, std::string> out;
  std::stringstream hs(header), rs(row);
  std::string h, r;
  while (std::getline(hs, h, ',')) {
    if (!std::getline(rs, r, ',')) r = "";
    out[h] = r;
  }
  return out;
}

struct MeanAccumulator {
  double sum = 0.0;
  std::size_t count = 0;
  void add(const std::string& text) {
    if (text.empty()) return;
    sum += std::stod(text);
    ++count;
  }
  bool complete(std::size_t expected) const { return count == expected; }
  nlohmann::json json() const {
    if (count == 0) return nullptr;
    return sum / static_cast<double>(count);
  }
};

}  // namespace

std::size_t cmd_report(const std::string& output_dir) {
  if (!fs::is_directory(output_dir))
    throw ConfigError("report: '" + output_dir + "' is not a directory");

  std::vector<std::string> symbols;
  for (const auto& entry : fs::directory_iterator(output_dir))
    if (entry.is_directory() &&
        (fs::exists(entry.path() / "forecast.csv") || fs::exists(entry.path() / "trade.csv")))
      symbols.push_back(entry.path().filename().string());
  std::sort(symbols.begin(), symbols.end());
  if (symbols.empty()) throw ConfigError("report: no completed symbol runs under " + output_dir);

  const std::vector<std::string> forecast_cols = {"mae_close", "mae_open", "mae_high",
                                                  "mae_low", "mae_nav"};
  const std::vector<std::string> forecast_raw_cols = {"mae_close_raw", "mae_open_raw",
                                                      "mae_high_raw", "mae_low_raw",
                                                      "mae_nav_raw"};
  const std::vector<std::string> trade_cols = {"precision", "recall", "f1",
                                               "auc", "predicted_ar", "true_ar"};

  std::map<std::string, MeanAccumulator> means;
  std::vector<std::string> incomplete;

  std::ofstream summary((fs::path(output_dir) / "summary.csv").string(), std::ios::trunc);
  summary << "symbol";
  for (const auto& c : forecast_cols) summary << ',' << c;
  for (const auto& c : trade_cols) summary << ',' << c;
  for (const auto& c : forecast_raw_cols) summary << ',' << c;
  summary << '\n';

  for (const std::string& symbol : symbols) {
    const auto forecast =
        read_single_row_csv((fs::path(output_dir) / symbol / "forecast.csv").string());
    const auto trade = read_single_row_csv((fs::path(output_dir) / symbol / "trade.csv").string());

    summary << symbol;
    bool missing = false;
    const auto emit = [&](const std::map<std::string, std::string>& row,
                          const std::string& column) {
      const auto it = row.find(column);
      const std::string value = it == row.end() ? "" : it->second;
      summary << ',' << value;
      if (value.empty()) missing = true;
      means[column].add(value);
    };
    for (const auto& c : forecast_cols) emit(forecast, c);
    for (const auto& c : trade_cols) emit(trade, c);
    for (const auto& c : forecast_raw_cols) emit(forecast, c);
    summary << '\n';
    if (missing) incomplete.push_back(symbol);
  }

  nlohmann::json j;
  j["symbols"] = symbols.size();
  j["incomplete"] = incomplete;
  nlohmann::json forecasting_norm, forecasting_raw, trading;
  for (const auto& c : forecast_cols) forecasting_norm[c] = means[c].json();
  for (const auto& c : forecast_raw_cols) forecasting_raw[c] = means[c].json();
  for (const auto& c : trade_cols) {
    trading[c] = means[c].json();
    trading[c + "_symbols"] = means[c].count;
  }
  j["forecasting"] = {{"normalized", forecasting_norm}, {"raw", forecasting_raw}};
  j["trading"] = trading;
  std::ofstream json_out((fs::path(output_dir) / "summary.json").string(), std::ios::trunc);
  json_out << j.dump(2) << '\n';

  return symbols.size();
}

GradcheckReport cmd_gradcheck(const RunConfig& config, std::size_t samples, double tol) {
  config.validate();
  Rng rng(derive_seed(config.seed, "gradcheck-data"));
  std::vector<Tensor3> s;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    Tensor3 windows(8, 1, config.window);
    for (double& v : windows.v) v = rng.normal();
    s.push_back(std::move(windows));
  }
  const DeconfuseModel model = make_model(config.architecture, kChannelCount, config.window,
                                          derive_seed(config.seed, "gradcheck-model"));
  const JointInstance instance = init_instance(model, s);
  return gradcheck_joint(instance, s, config.train.mu, config.train.lambda,
                         config.train.sv_floor, samples, tol,
                         derive_seed(config.seed, "gradcheck"));
}

void write_synthetic_csv(const std::string& path, std::uint64_t seed, std::size_t days,
                         double base_price) {
  Rng rng(seed);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path);
  out << "date,open,high,low,close,nav\n";

  int year = 2015, month = 1, day = 1;
  const auto advance_day = [&] {
    static const int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int limit = lengths[month - 1];
    if (month == 2 && (year % 4 == 0 && (year % 100 != 0 || year % 400 == 0))) limit = 29;
    if (++day > limit) {
      day = 1;
      if (++month > 12) {
        month = 1;
        ++year;
      }
    }
  };

  double close = base_price;
  double nav = base_price / 10.0;
  for (std::size_t d = 0; d < days; ++d) {
    const double trend = 0.015 * std::sin(static_cast<double>(d) / 9.0) +
                         0.008 * std::sin(static_cast<double>(d) / 23.0);
    const double shock = 0.01 * rng.normal();
    const double prev_close = close;
    close = std::max(1.0, close * (1.0 + trend + shock));
    const double open = std::max(1.0, prev_close * (1.0 + 0.004 * rng.normal()));
    const double high = std::max(open, close) * (1.0 + 0.003 * std::abs(rng.normal()));
    const double low = std::min(open, close) / (1.0 + 0.003 * std::abs(rng.normal()));
    nav = std::max(0.5, 0.98 * nav + 0.02 * close / 10.0 + 0.01 * rng.normal());

    char date[16];
    std::snprintf(date, sizeof date, "%04d-%02d-%02d", year, month, day);
    out << date << ',' << fmt(open) << ',' << fmt(high) << ',' << fmt(low) << ',' << fmt(close)
        << ',' << fmt(nav) << '\n';
    advance_day();
  }
}

}  // namespace deconfuse
