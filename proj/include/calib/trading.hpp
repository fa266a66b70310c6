#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "calib/grid.hpp"

namespace calib {

using Matrix = Eigen::MatrixXd;

enum class StrategyMode { simple, limited_risk };

std::string to_string(StrategyMode m);
StrategyMode strategy_mode_from_string(const std::string& s);

struct StrategyParams {
  double epsilon = 0.05;
  double delta_fraction = 0.5;
  double tx_cost = 0.0001;
  StrategyMode mode = StrategyMode::simple;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Randomized inputs behind an entry decision, kept so the gain can be
/// decomposed afterwards.
struct DecisionInputs {
  double forecast_tilde = std::numeric_limits<double>::quiet_NaN();
  double price_prev_tilde = std::numeric_limits<double>::quiet_NaN();
};

struct TradeStep {
  bool entered;
  double shares;
  double price_prev;
  double price_now;
  double price_prev_tilde;
  double forecast_tilde;
  double gain;
  double capital;
};

/// Per-step record of one speculator. Simple mode starts from K_0 = 0 and
/// adds one share's price change on every entered step; limited-risk mode
/// stakes delta * K_{i-1} and compounds.
class TradeLedger {
public:
  static TradeLedger simple();
  static TradeLedger limited_risk(double initial_capital);

  StrategyMode mode() const { return mode_; }
  double initial_capital() const { return initial_; }
  double capital() const { return capital_; }
  /// ln K_n, tracked separately so it stays finite when K_n underflows.
  double log_capital() const { return log_capital_; }
  std::size_t entry_count() const { return entries_; }
  std::size_t size() const { return steps_.size(); }
  const std::vector<TradeStep>& steps() const { return steps_; }

  /// Gamble bookkeeping: durations count held steps from entry to exit
  /// inclusive.
  bool gamble_open() const { return open_length_ > 0; }
  void close_gamble();
  const std::vector<std::size_t>& durations() const { return durations_; }

private:
  friend void simple_rise_step(TradeLedger&, bool, double, double, const DecisionInputs&);
  friend void limited_risk_step(TradeLedger&, bool, double, double, double,
                                const DecisionInputs&);
  void push(TradeStep step);

  StrategyMode mode_ = StrategyMode::simple;
  double initial_ = 0.0;
  double capital_ = 0.0;
  double log_capital_ = 0.0;
  std::size_t entries_ = 0;
  std::size_t open_length_ = 0;
  std::vector<TradeStep> steps_;
  std::vector<std::size_t> durations_;
};

/// Enter iff p~ > S~_{i-1} + epsilon.
bool entry_decision(double forecast_tilde, double price_prev_tilde, double epsilon);

/// gain = entered * (S_now - S_prev), capital accumulates additively.
void simple_rise_step(TradeLedger& ledger, bool entered, double price_prev, double price_now,
                      const DecisionInputs& inputs = {});

/// K_i = K_{i-1} (1 + delta (S_now - S_prev)) when entered. Throws
/// std::invalid_argument unless 0 <= delta < 1.
void limited_risk_step(TradeLedger& ledger, bool entered, double price_prev, double price_now,
                       double delta, const DecisionInputs& inputs = {});

/// K_n / L_n (total gain per entered step); empty when nothing was entered.
std::optional<double> average_gain(const TradeLedger& ledger);

/// (1/L_n) sum over entered steps of (dS)^2; empty when nothing was entered.
std::optional<double> realized_variance(const TradeLedger& ledger);

/// K_0 exp(delta (L_n (epsilon - delta var_n) - deviation)).
double capital_lower_bound(double initial_capital, double delta, double epsilon,
                           std::size_t entries, double variance, double deviation);

/// max(epsilon_prime * sample std of the window, floor); the floor alone
/// for windows shorter than two prices.
double sigma_threshold(std::span<const double> window, double epsilon_prime, double floor);

/// Sell when p~ <= S_{i-1} + epsilon or the price did not rise.
bool position_exit(double forecast_tilde, double price_prev, double price_now, double epsilon);

/// rate * |notional| for one trade.
double transaction_cost(double notional, double rate);

/// gain minus the cost of `trades` trades of the given notional (a round
/// trip by default).
double apply_transaction_cost(double gain, double notional, double rate, int trades = 2);

struct HoldingReturn {
  double absolute;
  double relative;
};

/// Buy at the first price with K_0, sell at the last.
HoldingReturn buy_and_hold(std::span<const double> prices, double initial_capital);

struct Aggregation {
  /// Column t holds the weights used during period t; the last column is
  /// the state after the final update.
  Matrix weights;
  Vector returns;
  /// Capital path starting at 1.
  Vector capital;
};

/// Exponential weights over strategies: returns is [strategy x period].
Aggregation aggregate_strategies(const Matrix& period_returns, double eta);

/// The three addends of the simple-mode total gain:
///   sum I (S_i - p~_i) + sum I (S~_{i-1} - S_{i-1}) + sum I (p~_i - S~_{i-1}).
struct GainDecomposition {
  double calibration = 0.0;
  double rounding = 0.0;
  double edge = 0.0;
  double total() const { return calibration + rounding + edge; }
};

GainDecomposition decompose_gain(const TradeLedger& ledger);

/// Total of per-step gains, independent of the stored capital path.
double total_gain(const TradeLedger& ledger);

/// ln K_0 + delta sum I dS - delta^2 sum I dS^2 (limited-risk ledgers).
double log_capital_floor(const TradeLedger& ledger, double delta);

}  // namespace calib
