// Command line front end: train / features / forecast / trade / report /
// gradcheck. Flags override config-file values, which override defaults;
// environment variables use the DECONFUSE_ prefix (DECONFUSE_DATA_DIR,
// DECONFUSE_OUT, DECONFUSE_SEED, DECONFUSE_WORKERS, DECONFUSE_SYMBOLS).

#include <CLI11.hpp>
#include <iostream>

#include "deconfuse/commands.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::string output_dir;
  std::vector<std::string> symbols;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration file");
  cmd->add_option("--data-dir", flags.data_dir, "directory with <symbol>.csv inputs")
      ->envname("DECONFUSE_DATA_DIR");
  cmd->add_option("--out", flags.output_dir, "output directory")->envname("DECONFUSE_OUT");
  cmd->add_option("--symbols", flags.symbols, "symbols to process (default: all csv files)")
      ->delimiter(',')
      ->envname("DECONFUSE_SYMBOLS");
  cmd->add_option_function<std::uint64_t>(
         "--seed",
         [&flags](const std::uint64_t value) {
           flags.seed = value;
           flags.seed_set = true;
         },
         "master random seed")
      ->envname("DECONFUSE_SEED");
  cmd->add_option("--workers", flags.workers, "parallel symbol workers")
      ->envname("DECONFUSE_WORKERS");
}

deconfuse::RunConfig resolve_config(const CommonFlags& flags) {
  deconfuse::RunConfig config;
  if (!flags.config_path.empty()) config = deconfuse::RunConfig::load(flags.config_path);
  if (!flags.data_dir.empty()) config.data_dir = flags.data_dir;
  if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
  if (!flags.symbols.empty()) config.symbols = flags.symbols;
  if (flags.seed_set) config.seed = flags.seed;
  if (flags.workers > 0) config.workers = flags.workers;
  config.validate();
  return config;
}

int report_outcome(const char* verb, const deconfuse::BatchOutcome& outcome) {
  std::cout << verb << ": " << outcome.completed.size() << " symbol(s) completed";
  if (!outcome.failures.empty()) std::cout << ", " << outcome.failures.size() << " failed";
  std::cout << '\n';
  for (const auto& [symbol, reason] : outcome.failures)
    std::cerr << "  [failed] " << symbol << ": " << reason << '\n';
  return outcome.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deconfuse: unsupervised multi-channel feature fusion for stock series"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::size_t gradcheck_samples = 200;
  double gradcheck_tol = 1e-5;

  CLI::App* train = app.add_subcommand("train", "train one model per symbol");
  CLI::App* features = app.add_subcommand("features", "emit fused features per window");
  CLI::App* forecast = app.add_subcommand("forecast", "ridge next-day forecasting metrics");
  CLI::App* trade = app.add_subcommand("trade", "forest trading metrics and backtest");
  CLI::App* report = app.add_subcommand("report", "consolidate per-symbol metrics");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "verify gradients on synthetic data");
  for (CLI::App* cmd : {train, features, forecast, trade, report, gradcheck})
    add_common(cmd, flags);
  gradcheck->add_option("--samples", gradcheck_samples, "coordinates to test");
  gradcheck->add_option("--tol", gradcheck_tol, "relative error tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return report_outcome("train", deconfuse::cmd_train(resolve_config(flags)));
    if (features->parsed())
      return report_outcome("features", deconfuse::cmd_features(resolve_config(flags)));
    if (forecast->parsed())
      return report_outcome("forecast", deconfuse::cmd_forecast(resolve_config(flags)));
    if (trade->parsed()) return report_outcome("trade", deconfuse::cmd_trade(resolve_config(flags)));
    if (report->parsed()) {
      const deconfuse::RunConfig config = resolve_config(flags);
      const std::size_t count = deconfuse::cmd_report(config.output_dir);
      std::cout << "report: " << count << " symbol(s) summarized under " << config.output_dir
                << '\n';
      return 0;
    }
    if (gradcheck->parsed()) {
      const deconfuse::GradcheckReport result =
          deconfuse::cmd_gradcheck(resolve_config(flags), gradcheck_samples, gradcheck_tol);
      std::cout << "gradcheck: " << result.checked << " coordinates, max relative error "
                << result.max_rel_error << " (tolerance " << result.tolerance << ")\n";
      for (const auto& coordinate : result.flagged)
        std::cerr << "  [flagged] " << coordinate.block << " index " << coordinate.index
                  << ": analytic " << coordinate.analytic << " vs numeric " << coordinate.numeric
                  << " (rel " << coordinate.rel_error << ")\n";
      return result.pass() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
