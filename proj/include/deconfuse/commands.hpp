#pragma once

#include <string>
#include <vector>

#include "deconfuse/optimizer.hpp"
#include "deconfuse/run_config.hpp"

namespace deconfuse {

/// Outcome of a per-symbol batch command. One symbol's failure never aborts
/// the batch; the exit code reflects any failure.
struct BatchOutcome {
  std::vector<std::string> completed;
  std::vector<std::pair<std::string, std::string>> failures;  // (symbol, reason)

  bool ok() const { return failures.empty(); }
  int exit_code() const { return failures.empty() ? 0 : 1; }
};

/// Trains one model per symbol; writes output_dir/<symbol>/checkpoint.bin
/// (+ JSON sidecar) and loss.csv, and the resolved config next to them.
BatchOutcome cmd_train(const RunConfig& config);

/// Writes date-indexed fused features (train/test flagged) for every symbol
/// with a checkpoint, to output_dir/<symbol>/features.csv.
BatchOutcome cmd_features(const RunConfig& config);

/// Fits the ridge heads on training features, evaluates next-day forecasts
/// on the test split; writes forecast.csv, plot_close.csv and ridge.bin.
BatchOutcome cmd_forecast(const RunConfig& config);

/// Fits the trading forest on training features, evaluates the test split;
/// writes trade.csv, roc.csv and forest.bin.
BatchOutcome cmd_trade(const RunConfig& config);

/// Consolidates per-symbol metric files under output_dir into summary.csv
/// (one row per symbol) and summary.json (cross-symbol means); returns the
/// number of symbols included.
std::size_t cmd_report(const std::string& output_dir);

/// Gradient verification on a synthetic instance shaped by the config.
GradcheckReport cmd_gradcheck(const RunConfig& config, std::size_t samples, double tol);

/// Deterministic synthetic OHLC+NAV series writer (demo and test data).
void write_synthetic_csv(const std::string& path, std::uint64_t seed, std::size_t days,
                         double base_price = 100.0);

}  // namespace deconfuse
