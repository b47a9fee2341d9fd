#include "deconfuse/stock_data.hpp"

#include <cmath>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace deconfuse {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool valid_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (const std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (s[i] < '0' || s[i] > '9') return false;
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  const int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

StockSeries ingest_csv(const std::string& path, std::size_t min_rows) {
  std::ifstream file(path);
  if (!file) throw IngestionError("cannot open " + path);

  StockSeries series;
  series.symbol = std::filesystem::path(path).stem().string();

  std::string line;
  if (!std::getline(file, line))
    throw IngestionError(path + ": empty file");
  if (trim(line) != "date,open,high,low,close,nav")
    throw IngestionError(path + ": line 1: expected header date,open,high,low,close,nav");

  std::size_t line_number = 1;
  while (std::getline(file, line)) {
    ++line_number;
    if (trim(line).empty()) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (line.back() == ',') fields.push_back("");
    if (fields.size() != 1 + kChannelCount)
      throw IngestionError(path + ": line " + std::to_string(line_number) + ": expected " +
                           std::to_string(1 + kChannelCount) + " fields, got " +
                           std::to_string(fields.size()));

    const std::string& date = fields[0];
    if (!valid_iso_date(date))
      throw IngestionError(path + ": line " + std::to_string(line_number) +
                           ": unparseable ISO-8601 date '" + date + "'");
    if (!series.dates.empty()) {
      if (date == series.dates.back())
        throw IngestionError(path + ": line " + std::to_string(line_number) +
                             ": duplicate date " + date);
      if (date < series.dates.back())
        throw IngestionError(path + ": line " + std::to_string(line_number) +
                             ": dates out of order at " + date);
    }

    std::array<double, kChannelCount> row{};
    bool usable = true;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      if (fields[c + 1].empty()) {
        usable = false;  // missing value, drop the row
        break;
      }
      if (!parse_double(fields[c + 1], row[c]))
        throw IngestionError(path + ": line " + std::to_string(line_number) +
                             ": unparseable number '" + fields[c + 1] + "'");
      if (!std::isfinite(row[c]) || row[c] <= 0.0) {
        usable = false;
        break;
      }
    }
    if (!usable) {
      ++series.dropped_rows;
      continue;
    }

    series.dates.push_back(date);
    for (std::size_t c = 0; c < kChannelCount; ++c) series.values[c].push_back(row[c]);
  }

  if (series.size() < min_rows)
    throw InsufficientDataError(path + ": only " + std::to_string(series.size()) +
                                " valid rows, need " + std::to_string(min_rows));
  return series;
}

std::vector<int> make_labels(const StockSeries& series) {
  if (series.size() < 2) throw std::invalid_argument("make_labels: need at least two days");
  const std::vector<double>& close = series.close();
  std::vector<int> labels(series.size() - 1);
  for (std::size_t d = 0; d + 1 < series.size(); ++d)
    labels[d] = close[d + 1] > close[d] ? 1 : 0;
  return labels;
}

Tensor3 SampleSet::split_windows(std::size_t channel, bool train) const {
  const std::size_t begin = train ? 0 : train_count;
  const std::size_t count = train ? train_count : test_count();
  Tensor3 out(count, 1, window);
  for (std::size_t k = 0; k < count; ++k)
    std::copy(windows[channel].row(begin + k, 0), windows[channel].row(begin + k, 0) + window,
              out.row(k, 0));
  return out;
}

SampleSet windowize(const StockSeries& series, std::size_t w, double split_fraction) {
  if (w < 2) throw std::invalid_argument("windowize: window must be >= 2");
  if (split_fraction <= 0.0 || split_fraction >= 1.0)
    throw std::invalid_argument("windowize: split fraction must lie in (0, 1)");
  if (series.size() < w + 1)
    throw InsufficientDataError("windowize: " + std::to_string(series.size()) +
                                " days cannot produce a window of " + std::to_string(w) +
                                " plus a target");

  SampleSet set;
  set.window = w;
  const std::size_t k = series.size() - w;
  set.train_count = static_cast<std::size_t>(split_fraction * static_cast<double>(k));
  if (set.train_count == 0 || set.train_count >= k)
    throw std::invalid_argument("windowize: split leaves an empty train or test side");

  // Training windows cover days [0, train_count + w - 2]; normalization
  // statistics never see anything later.
  const std::size_t train_days = set.train_count + w - 1;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    double mean = 0.0;
    for (std::size_t d = 0; d < train_days; ++d) mean += series.values[c][d];
    mean /= static_cast<double>(train_days);
    double var = 0.0;
    for (std::size_t d = 0; d < train_days; ++d) {
      const double diff = series.values[c][d] - mean;
      var += diff * diff;
    }
    const double stddev = std::sqrt(var / static_cast<double>(train_days));
    if (stddev == 0.0)
      throw ConstantChannelError(std::string("windowize: channel ") + kChannelNames[c] +
                                 " is constant on the training range");
    set.stats[c] = {mean, stddev, train_days};
  }

  set.targets = Matrix(k, kChannelCount);
  set.labels.resize(k);
  const std::vector<int> day_labels = make_labels(series);
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    Tensor3 windows(k, 1, w);
    for (std::size_t kk = 0; kk < k; ++kk) {
      for (std::size_t i = 0; i < w; ++i)
        windows.at(kk, 0, i) = set.stats[c].normalize(series.values[c][kk + i]);
      set.targets.at(kk, c) = series.values[c][kk + w];
    }
    set.windows.push_back(std::move(windows));
  }
  for (std::size_t kk = 0; kk < k; ++kk) {
    set.labels[kk] = day_labels[kk + w - 1];
    set.end_dates.push_back(series.dates[kk + w - 1]);
    set.end_closes.push_back(series.close()[kk + w - 1]);
  }
  return set;
}

}  // namespace deconfuse
