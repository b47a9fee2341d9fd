#pragma once

#include <array>
#include <string>
#include <vector>

#include "deconfuse/tensor.hpp"

namespace deconfuse {

/// Input channel order, matching the CSV column order after the date.
inline constexpr std::array<const char*, 5> kChannelNames = {"open", "high", "low", "close",
                                                             "nav"};
inline constexpr std::size_t kChannelCount = 5;
inline constexpr std::size_t kCloseChannel = 3;

/// One stock's validated daily history. Dates are ISO-8601 and strictly
/// increasing; all values are positive (offending rows were dropped at
/// ingestion and counted).
struct StockSeries {
  std::string symbol;
  std::vector<std::string> dates;
  std::array<std::vector<double>, kChannelCount> values;  // open, high, low, close, nav

  std::size_t dropped_rows = 0;

  std::size_t size() const { return dates.size(); }
  const std::vector<double>& close() const { return values[kCloseChannel]; }
};

/// Reads a `date,open,high,low,close,nav` CSV. Rows with missing or
/// non-positive fields are dropped (and counted); duplicate or out-of-order
/// dates and malformed rows raise IngestionError with the line number.
/// Fewer than min_rows surviving rows raises InsufficientDataError.
StockSeries ingest_csv(const std::string& path, std::size_t min_rows = 0);

/// Per-channel z-score parameters, always estimated on the training day
/// range only (leakage-safe provenance is part of the record).
struct NormStats {
  double mean = 0.0;
  double stddev = 1.0;
  std::size_t train_days = 0;  // number of leading days the stats were fit on

  double normalize(double raw) const { return (raw - mean) / stddev; }
  double denormalize(double scaled) const { return scaled * stddev + mean; }
};

/// Windowed multi-channel samples with next-day targets and trading labels.
/// Window k covers days [k, k+W-1]; its target and label belong to day k+W.
struct SampleSet {
  std::size_t window = 0;
  std::vector<Tensor3> windows;  // per channel: K x 1 x W, z-scored
  Matrix targets;                // K x 5, raw next-day values
  std::vector<int> labels;       // buy=1 / sell=0 per window
  std::size_t train_count = 0;   // chronological split boundary
  std::array<NormStats, kChannelCount> stats;
  std::vector<std::string> end_dates;  // date each window ends on
  std::vector<double> end_closes;      // raw close on that date (trading executes here)

  std::size_t sample_count() const { return labels.size(); }
  std::size_t test_count() const { return sample_count() - train_count; }

  /// Feature/target matrices restricted to one split.
  Tensor3 split_windows(std::size_t channel, bool train) const;
};

/// Builds the sample set: K = len - W windows, z-scored with training-range
/// statistics applied to both splits, raw targets kept alongside the stats.
/// A constant channel on the training range raises ConstantChannelError.
SampleSet windowize(const StockSeries& series, std::size_t w, double split_fraction);

/// label(d) = buy when close(d+1) > close(d), else sell. Length is size-1.
std::vector<int> make_labels(const StockSeries& series);

}  // namespace deconfuse
