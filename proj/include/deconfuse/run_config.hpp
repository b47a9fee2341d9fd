#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deconfuse/model.hpp"
#include "deconfuse/optimizer.hpp"

namespace deconfuse {

/// Complete description of a reproducible run. Loaded from a JSON file with
/// a schema version; unknown keys are rejected at every level and absent
/// keys take the documented defaults (the stock architecture and optimizer
/// settings). The fully-resolved form is written next to the outputs.
struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  std::string data_dir;
  std::vector<std::string> symbols;  // empty means every *.csv in data_dir
  std::size_t window = 20;
  ArchitectureSpec architecture = ArchitectureSpec::defaults();
  TrainConfig train;

  double ridge_alpha = 1.0;
  bool ridge_cv = false;
  std::size_t forest_trees = 5;
  std::size_t forest_depth = 3;

  double split_fraction = 0.9;
  double capital0 = 100000.0;
  double charge = 10.0;
  double trading_days_per_year = 252.0;

  std::uint64_t seed = 42;
  std::size_t workers = 1;
  std::string output_dir = "out";

  void validate() const;

  /// Parses a JSON document; throws ConfigError for schema violations.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);

  /// Serializes with every default materialized.
  std::string to_json_text() const;
  void save(const std::string& path) const;
};

}  // namespace deconfuse
