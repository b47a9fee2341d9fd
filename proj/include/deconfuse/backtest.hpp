#pragma once

#include <vector>

namespace deconfuse {

/// Executed transactions plus the mark-to-market capital trajectory.
/// Charges are deducted on every executed transaction; capital can never
/// go negative (the run aborts with BankruptLedgerError instead).
struct TradeLedger {
  struct Transaction {
    std::size_t day = 0;
    bool buy = false;
    double price = 0.0;
    double units = 0.0;
    double charge = 0.0;
  };
  std::vector<Transaction> transactions;
  std::vector<double> capital;  // one mark-to-market value per day
};

struct BacktestResult {
  double ar_percent = 0.0;
  double final_capital = 0.0;
  TradeLedger ledger;
};

/// All-in/all-out long-only policy: a buy signal while flat spends the whole
/// capital minus the charge on fractional units at that day's close; a sell
/// signal while long liquidates at the close minus the charge. An open
/// position is marked to market at the last close. AR annualizes the total
/// growth over the signal horizon.
BacktestResult backtest_ar(const std::vector<int>& signals, const std::vector<double>& closes,
                           double capital0, double charge,
                           double trading_days_per_year = 252.0);

}  // namespace deconfuse
