#include <cmath>
#include <filesystem>
#include <fstream>

#include "deconfuse/backtest.hpp"
#include "deconfuse/metrics.hpp"
#include "deconfuse/stock_data.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace deconfuse;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream file(path, std::ios::trunc);
  file << body;
  return path.string();
}

StockSeries series_from_closes(const std::vector<double>& closes) {
  StockSeries series;
  series.symbol = "TEST";
  for (std::size_t d = 0; d < closes.size(); ++d) {
    char date[16];
    std::snprintf(date, sizeof date, "2020-01-%02d", static_cast<int>(d + 1));
    series.dates.push_back(date);
    for (std::size_t c = 0; c < kChannelCount; ++c)
      series.values[c].push_back(closes[d] * (1.0 + 0.01 * static_cast<double>(c)));
    series.values[kCloseChannel].back() = closes[d];
  }
  return series;
}

}  // namespace

TEST_CASE("ingest_csv reads a clean file and windows it") {
  const std::string path = write_temp_csv("deconfuse_clean.csv",
                                          "date,open,high,low,close,nav\n"
                                          "2020-01-01,10,11,9,10.5,1\n"
                                          "2020-01-02,10.5,12,10,11,1.1\n"
                                          "2020-01-03,11,12.5,10.5,12,1.2\n"
                                          "2020-01-04,12,13,11,11.5,1.15\n");
  const StockSeries series = ingest_csv(path, 3);
  CHECK(series.size() == 4);
  CHECK(series.dropped_rows == 0);

  const SampleSet set = windowize(series, 2, 0.6);
  CHECK(set.sample_count() == 2);  // K = 4 - 2
  CHECK(set.train_count == 1);
  CHECK(set.targets.at(0, kCloseChannel) == 12.0);  // window [d1,d2] targets d3
  CHECK(set.labels[0] == 1);                        // close rose 11 -> 12
  CHECK(set.labels[1] == 0);                        // close fell 12 -> 11.5
}

TEST_CASE("ingest_csv rejects duplicates and bad headers, drops bad rows") {
  const std::string dup = write_temp_csv("deconfuse_dup.csv",
                                         "date,open,high,low,close,nav\n"
                                         "2020-01-01,1,2,1,1.5,1\n"
                                         "2020-01-01,1,2,1,1.6,1\n");
  CHECK_THROWS_WITH_AS(ingest_csv(dup), doctest::Contains("duplicate date 2020-01-01"),
                       IngestionError);

  const std::string header = write_temp_csv("deconfuse_header.csv", "when,open,close\n");
  CHECK_THROWS_AS(ingest_csv(header), IngestionError);

  const std::string negative = write_temp_csv("deconfuse_negative.csv",
                                              "date,open,high,low,close,nav\n"
                                              "2020-01-01,1,2,1,-1.5,1\n"
                                              "2020-01-02,1,2,1,1.5,1\n"
                                              "2020-01-03,1,2,1,,1\n"
                                              "2020-01-04,1,2,1,1.7,1\n");
  const StockSeries series = ingest_csv(negative);
  CHECK(series.size() == 2);  // negative close and missing close dropped
  CHECK(series.dropped_rows == 2);

  const std::string bad_date = write_temp_csv("deconfuse_bad_date.csv",
                                              "date,open,high,low,close,nav\n"
                                              "01/02/2020,1,2,1,1.5,1\n");
  CHECK_THROWS_WITH_AS(ingest_csv(bad_date), doctest::Contains("line 2"), IngestionError);

  const std::string short_file = write_temp_csv("deconfuse_short.csv",
                                                "date,open,high,low,close,nav\n"
                                                "2020-01-01,1,2,1,1.5,1\n");
  CHECK_THROWS_AS(ingest_csv(short_file, 3), InsufficientDataError);
}

TEST_CASE("windowize split arithmetic and normalization provenance") {
  std::vector<double> closes(100);
  Rng rng(3);
  for (std::size_t i = 0; i < closes.size(); ++i) closes[i] = 50.0 + rng.uniform(0.0, 10.0);
  const StockSeries series = series_from_closes(closes);

  const SampleSet set = windowize(series, 10, 0.9);
  CHECK(set.sample_count() == 90);
  CHECK(set.train_count == 81);
  CHECK(set.test_count() == 9);

  // stats computed on the training day range only (days 0 .. 89)
  const std::size_t train_days = set.train_count + 10 - 1;
  CHECK(set.stats[kCloseChannel].train_days == train_days);
  double mean = 0.0;
  for (std::size_t d = 0; d < train_days; ++d) mean += closes[d];
  mean /= static_cast<double>(train_days);
  CHECK(set.stats[kCloseChannel].mean == doctest::Approx(mean).epsilon(1e-12));

  // every test window is normalized with those same training statistics
  const NormStats& stats = set.stats[kCloseChannel];
  for (std::size_t k = set.train_count; k < set.sample_count(); ++k)
    for (std::size_t i = 0; i < 10; ++i)
      CHECK(set.windows[kCloseChannel].at(k, 0, i) ==
            doctest::Approx(stats.normalize(closes[k + i])).epsilon(1e-12));

  // round trip
  CHECK(stats.denormalize(stats.normalize(123.4)) == doctest::Approx(123.4).epsilon(1e-12));
}

TEST_CASE("windowize rejects constant channels and bad parameters") {
  const StockSeries series = series_from_closes(std::vector<double>(30, 42.0));
  CHECK_THROWS_AS(windowize(series, 5, 0.8), ConstantChannelError);

  std::vector<double> closes(30);
  Rng rng(5);
  for (double& c : closes) c = 10.0 + rng.uniform(0.0, 5.0);
  const StockSeries varied = series_from_closes(closes);
  CHECK_THROWS_AS(windowize(varied, 1, 0.8), std::invalid_argument);
  CHECK_THROWS_AS(windowize(varied, 5, 1.5), std::invalid_argument);
  const StockSeries tiny = series_from_closes({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(windowize(tiny, 5, 0.8), InsufficientDataError);
}

TEST_CASE("make_labels applies the strict next-day rule") {
  const StockSeries series = series_from_closes({10.0, 11.0, 10.5});
  CHECK(make_labels(series) == std::vector<int>{1, 0});

  const StockSeries rising = series_from_closes({1.0, 2.0, 3.0, 4.0});
  CHECK(make_labels(rising) == std::vector<int>{1, 1, 1});

  const StockSeries flat = series_from_closes({5.0, 5.0, 6.0});
  CHECK(make_labels(flat)[0] == 0);  // ties are sells
}

TEST_CASE("mae basics and translation invariance") {
  CHECK(mae(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(mae(std::vector<double>{1, 2}, std::vector<double>{2, 4}) == doctest::Approx(1.5));
  CHECK_THROWS_AS(mae(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);

  Rng rng(7);
  std::vector<double> pred(20), truth(20), pred_shift(20), truth_shift(20);
  for (std::size_t i = 0; i < 20; ++i) {
    pred[i] = rng.normal();
    truth[i] = rng.normal();
    pred_shift[i] = pred[i] + 3.7;
    truth_shift[i] = truth[i] + 3.7;
  }
  CHECK(mae(pred_shift, truth_shift) == doctest::Approx(mae(pred, truth)).epsilon(1e-12));
}

TEST_CASE("classification metrics closed forms") {
  const ClassificationMetrics perfect =
      classification_metrics({1, 0, 1, 0}, {0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  REQUIRE(perfect.auc.has_value());
  CHECK(*perfect.auc == 1.0);

  const ClassificationMetrics mixed =
      classification_metrics({1, 1, 0}, {0.9, 0.8, 0.3}, {1, 0, 1});
  REQUIRE(mixed.auc.has_value());
  CHECK(*mixed.auc == doctest::Approx(0.5));

  const ClassificationMetrics single =
      classification_metrics({1, 1}, {0.9, 0.8}, {1, 1});
  CHECK_FALSE(single.auc.has_value());
}

TEST_CASE("rank-based AUC equals the brute-force pairwise statistic") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.index(30);
    std::vector<double> scores(n);
    std::vector<int> truth(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform(0.0, 1.0) * 10.0) / 10.0;  // force ties
      truth[i] = rng.next_double() < 0.5 ? 1 : 0;
      has0 = has0 || truth[i] == 0;
      has1 = has1 || truth[i] == 1;
    }
    if (!has0 || !has1) continue;
    const ClassificationMetrics metrics = classification_metrics(truth, scores, truth);
    REQUIRE(metrics.auc.has_value());
    CHECK(*metrics.auc == doctest::Approx(oracles::pairwise_auc(scores, truth)).epsilon(1e-12));
  }
}

TEST_CASE("AUC is invariant under strictly increasing score transforms") {
  Rng rng(13);
  std::vector<double> scores(40);
  std::vector<int> truth(40);
  for (std::size_t i = 0; i < 40; ++i) {
    scores[i] = rng.uniform(0.0, 1.0);
    truth[i] = rng.next_double() < 0.4 ? 1 : 0;
  }
  truth[0] = 1;
  truth[1] = 0;
  std::vector<double> warped(40);
  for (std::size_t i = 0; i < 40; ++i) warped[i] = std::exp(3.0 * scores[i]) + 5.0;

  const auto a = classification_metrics(truth, scores, truth);
  const auto b = classification_metrics(truth, warped, truth);
  CHECK(*a.auc == doctest::Approx(*b.auc).epsilon(1e-12));
  CHECK(*a.auc >= 0.0);
  CHECK(*a.auc <= 1.0);
}

TEST_CASE("backtest ledger matches the worked two-day trade") {
  const BacktestResult result = backtest_ar({1, 0}, {100.0, 110.0}, 100000.0, 10.0);
  CHECK(result.final_capital == doctest::Approx(109979.0).epsilon(1e-12));
  REQUIRE(result.ledger.transactions.size() == 2);
  CHECK(result.ledger.transactions[0].buy);
  CHECK(result.ledger.transactions[0].units == doctest::Approx(999.9));
  CHECK_FALSE(result.ledger.transactions[1].buy);
  const double expected_ar = (std::pow(109979.0 / 100000.0, 252.0 / 2.0) - 1.0) * 100.0;
  CHECK(result.ar_percent == doctest::Approx(expected_ar).epsilon(1e-12));

  const BacktestResult free_trade = backtest_ar({1, 0}, {100.0, 110.0}, 100000.0, 0.0);
  CHECK(free_trade.final_capital == doctest::Approx(110000.0));
}

TEST_CASE("backtest without trades keeps capital and AR at zero") {
  const BacktestResult result = backtest_ar({0, 0, 0}, {10.0, 11.0, 12.0}, 5000.0, 10.0);
  CHECK(result.final_capital == 5000.0);
  CHECK(result.ar_percent == doctest::Approx(0.0));
  CHECK(result.ledger.transactions.empty());
}

TEST_CASE("backtest marks open positions to market and tracks capital") {
  const BacktestResult result = backtest_ar({1, 1}, {50.0, 60.0}, 1000.0, 10.0);
  REQUIRE(result.ledger.transactions.size() == 1);
  const double units = (1000.0 - 10.0) / 50.0;
  CHECK(result.final_capital == doctest::Approx(units * 60.0));
  REQUIRE(result.ledger.capital.size() == 2);
  CHECK(result.ledger.capital[0] == doctest::Approx(units * 50.0));
  CHECK(result.ledger.capital[1] == doctest::Approx(units * 60.0));
  for (const double c : result.ledger.capital) CHECK(c >= 0.0);
}

TEST_CASE("backtest raises on exhausted capital") {
  CHECK_THROWS_AS(backtest_ar({1, 0, 1, 0}, {10, 10, 10, 10}, 15.0, 10.0), BankruptLedgerError);
}

TEST_CASE("truth-signal backtest is optimal over all signal sequences") {
  Rng rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t n = 8 + 2 * static_cast<std::size_t>(trial);  // up to 12
    std::vector<double> closes(n);
    for (double& c : closes) c = 20.0 + rng.uniform(0.0, 10.0);

    // truth labels: buy when tomorrow is higher (last signal sells/holds off)
    std::vector<int> truth(n, 0);
    for (std::size_t d = 0; d + 1 < n; ++d) truth[d] = closes[d + 1] > closes[d] ? 1 : 0;

    const double truth_final = backtest_ar(truth, closes, 1000.0, 0.0).final_capital;
    double best = 0.0;
    for (std::size_t mask = 0; mask < (1ull << n); ++mask) {
      std::vector<int> signals(n);
      for (std::size_t d = 0; d < n; ++d) signals[d] = (mask >> d) & 1 ? 1 : 0;
      best = std::max(best, backtest_ar(signals, closes, 1000.0, 0.0).final_capital);
    }
    CHECK(truth_final == doctest::Approx(best).epsilon(1e-10));
  }
}
