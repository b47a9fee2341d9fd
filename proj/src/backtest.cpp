#include "deconfuse/backtest.hpp"

#include <cmath>
#include <stdexcept>

#include "deconfuse/errors.hpp"

namespace deconfuse {

BacktestResult backtest_ar(const std::vector<int>& signals, const std::vector<double>& closes,
                           double capital0, double charge, double trading_days_per_year) {
  if (signals.size() != closes.size())
    throw ShapeError("backtest: signals and closes must align");
  if (signals.empty()) throw std::invalid_argument("backtest: empty horizon");
  if (capital0 <= 0.0) throw std::invalid_argument("backtest: starting capital must be positive");

  BacktestResult result;
  double cash = capital0;
  double units = 0.0;

  for (std::size_t day = 0; day < signals.size(); ++day) {
    const double price = closes[day];
    if (signals[day] == 1 && units == 0.0) {
      if (cash - charge <= 0.0)
        throw BankruptLedgerError("backtest: charges exhausted the capital on day " +
                                  std::to_string(day));
      units = (cash - charge) / price;
      result.ledger.transactions.push_back({day, true, price, units, charge});
      cash = 0.0;
    } else if (signals[day] == 0 && units > 0.0) {
      const double proceeds = units * price - charge;
      if (proceeds < 0.0)
        throw BankruptLedgerError("backtest: liquidation on day " + std::to_string(day) +
                                  " cannot cover the charge");
      result.ledger.transactions.push_back({day, false, price, units, charge});
      cash = proceeds;
      units = 0.0;
    }
    result.ledger.capital.push_back(cash + units * price);
  }

  result.final_capital = cash + units * closes.back();
  const double n_days = static_cast<double>(signals.size());
  result.ar_percent =
      (std::pow(result.final_capital / capital0, trading_days_per_year / n_days) - 1.0) * 100.0;
  return result;
}

}  // namespace deconfuse
