#include "calib/trading.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace calib {

std::string to_string(StrategyMode m) {
  return m == StrategyMode::simple ? "simple" : "limited-risk";
}

StrategyMode strategy_mode_from_string(const std::string& s) {
  if (s == "simple") return StrategyMode::simple;
  if (s == "limited-risk") return StrategyMode::limited_risk;
  throw std::invalid_argument("unknown strategy mode: " + s);
}

void StrategyParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
  if (!(delta_fraction >= 0.0 && delta_fraction < 1.0))
    throw std::invalid_argument("delta must lie in [0,1)");
  if (!(tx_cost >= 0.0)) throw std::invalid_argument("transaction cost must be >= 0");
}

TradeLedger TradeLedger::simple() { return TradeLedger{}; }

TradeLedger TradeLedger::limited_risk(double initial_capital) {
  if (!(initial_capital > 0.0)) throw std::invalid_argument("initial capital must be positive");
  TradeLedger l;
  l.mode_ = StrategyMode::limited_risk;
  l.initial_ = initial_capital;
  l.capital_ = initial_capital;
  l.log_capital_ = std::log(initial_capital);
  return l;
}

void TradeLedger::close_gamble() {
  if (open_length_ == 0) return;
  durations_.push_back(open_length_);
  open_length_ = 0;
}

void TradeLedger::push(TradeStep step) {
  if (step.entered) {
    ++entries_;
    ++open_length_;
  } else {
    close_gamble();
  }
  steps_.push_back(step);
}

bool entry_decision(double forecast_tilde, double price_prev_tilde, double epsilon) {
  return forecast_tilde > price_prev_tilde + epsilon;
}

void simple_rise_step(TradeLedger& ledger, bool entered, double price_prev, double price_now,
                      const DecisionInputs& inputs) {
  if (ledger.mode_ != StrategyMode::simple)
    throw std::logic_error("simple step applied to a limited-risk ledger");
  const double gain = entered ? price_now - price_prev : 0.0;
  ledger.capital_ += gain;
  ledger.push({entered, entered ? 1.0 : 0.0, price_prev, price_now, inputs.price_prev_tilde,
               inputs.forecast_tilde, gain, ledger.capital_});
}

void limited_risk_step(TradeLedger& ledger, bool entered, double price_prev, double price_now,
                       double delta, const DecisionInputs& inputs) {
  if (ledger.mode_ != StrategyMode::limited_risk)
    throw std::logic_error("limited-risk step applied to a simple ledger");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0,1)");
  const double shares = entered ? delta * ledger.capital_ : 0.0;
  const double gain = shares * (price_now - price_prev);
  if (entered) {
    ledger.capital_ *= 1.0 + delta * (price_now - price_prev);
    ledger.log_capital_ += std::log1p(delta * (price_now - price_prev));
  }
  ledger.push({entered, shares, price_prev, price_now, inputs.price_prev_tilde,
               inputs.forecast_tilde, gain, ledger.capital_});
}

std::optional<double> average_gain(const TradeLedger& ledger) {
  if (ledger.entry_count() == 0) return std::nullopt;
  return total_gain(ledger) / static_cast<double>(ledger.entry_count());
}

std::optional<double> realized_variance(const TradeLedger& ledger) {
  if (ledger.entry_count() == 0) return std::nullopt;
  double sum = 0.0;
  for (const auto& s : ledger.steps()) {
    if (!s.entered) continue;
    const double d = s.price_now - s.price_prev;
    sum += d * d;
  }
  return sum / static_cast<double>(ledger.entry_count());
}

double capital_lower_bound(double initial_capital, double delta, double epsilon,
                           std::size_t entries, double variance, double deviation) {
  return initial_capital *
         std::exp(delta * (static_cast<double>(entries) * (epsilon - delta * variance) - deviation));
}

double sigma_threshold(std::span<const double> window, double epsilon_prime, double floor) {
  if (window.size() < 2) return floor;
  const double n = static_cast<double>(window.size());
  const double mean = std::accumulate(window.begin(), window.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : window) ss += (v - mean) * (v - mean);
  return std::max(epsilon_prime * std::sqrt(ss / (n - 1.0)), floor);
}

bool position_exit(double forecast_tilde, double price_prev, double price_now, double epsilon) {
  return forecast_tilde <= price_prev + epsilon || price_now <= price_prev;
}

double transaction_cost(double notional, double rate) {
  if (!(rate >= 0.0)) throw std::invalid_argument("cost rate must be >= 0");
  return rate * std::abs(notional);
}

double apply_transaction_cost(double gain, double notional, double rate, int trades) {
  return gain - trades * transaction_cost(notional, rate);
}

HoldingReturn buy_and_hold(std::span<const double> prices, double initial_capital) {
  if (prices.empty()) throw std::invalid_argument("buy-and-hold of an empty series");
  if (!(prices.front() > 0.0)) throw std::invalid_argument("first price must be positive");
  const double rel = prices.back() / prices.front() - 1.0;
  return {initial_capital * rel, rel};
}

Aggregation aggregate_strategies(const Matrix& period_returns, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be positive");
  const Eigen::Index m = period_returns.rows();
  const Eigen::Index periods = period_returns.cols();
  if (m == 0) throw std::invalid_argument("no strategies to aggregate");
  Aggregation out{Matrix(m, periods + 1), Vector(periods), Vector(periods + 1)};
  // Log-weights keep the update stable over long horizons.
  Vector logw = Vector::Zero(m);
  out.capital[0] = 1.0;
  for (Eigen::Index t = 0; t <= periods; ++t) {
    Vector w = (logw.array() - logw.maxCoeff()).exp();
    w /= w.sum();
    out.weights.col(t) = w;
    if (t == periods) break;
    out.returns[t] = w.dot(period_returns.col(t));
    out.capital[t + 1] = out.capital[t] * (1.0 + out.returns[t]);
    logw += eta * period_returns.col(t);
  }
  return out;
}

GainDecomposition decompose_gain(const TradeLedger& ledger) {
  GainDecomposition d;
  for (const auto& s : ledger.steps()) {
    if (!s.entered) continue;
    d.calibration += s.price_now - s.forecast_tilde;
    d.rounding += s.price_prev_tilde - s.price_prev;
    d.edge += s.forecast_tilde - s.price_prev_tilde;
  }
  return d;
}

double total_gain(const TradeLedger& ledger) {
  double sum = 0.0;
  for (const auto& s : ledger.steps()) sum += s.gain;
  return sum;
}

double log_capital_floor(const TradeLedger& ledger, double delta) {
  double lin = 0.0;
  double quad = 0.0;
  for (const auto& s : ledger.steps()) {
    if (!s.entered) continue;
    const double d = s.price_now - s.price_prev;
    lin += d;
    quad += d * d;
  }
  return std::log(ledger.initial_capital()) + delta * lin - delta * delta * quad;
}

}  // namespace calib
