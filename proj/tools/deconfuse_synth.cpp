// Writes deterministic synthetic OHLC+NAV CSV files, for demos and tests.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "deconfuse/commands.hpp"
#include "deconfuse/rng.hpp"

int main(int argc, char** argv) {
  CLI::App app{"deconfuse-synth: generate synthetic stock CSV files"};
  std::string out_dir = "data";
  std::size_t count = 2;
  std::size_t days = 400;
  std::uint64_t seed = 7;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--count", count, "number of symbols");
  app.add_option("--days", days, "trading days per symbol");
  app.add_option("--seed", seed, "master seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < count; ++i) {
      const std::string symbol = "SYN" + std::to_string(i);
      const std::string path = (std::filesystem::path(out_dir) / (symbol + ".csv")).string();
      deconfuse::write_synthetic_csv(path, deconfuse::derive_seed(seed, symbol), days,
                                     80.0 + 40.0 * static_cast<double>(i));
      std::cout << path << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
