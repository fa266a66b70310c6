#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "calib/checking.hpp"
#include "calib/trading.hpp"
#include "oracles.hpp"

using namespace calib;

TEST(EntryDecision, StrictThreshold) {
  EXPECT_TRUE(entry_decision(0.8, 0.6, 0.1));
  EXPECT_FALSE(entry_decision(0.7, 0.6, 0.1));
}

TEST(EntryDecision, EqualsThresholdRule) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const CheckingRule r = threshold_rule(0.05);
  for (int i = 0; i < 10000; ++i) {
    const double p = std::round(u(rng) * 20) / 20, s = std::round(u(rng) * 20) / 20;
    EXPECT_EQ(entry_decision(p, s, 0.05), r(p, Vector::Constant(1, s)));
  }
}

TEST(SimpleRise, GainsAndLosses) {
  TradeLedger l = TradeLedger::simple();
  simple_rise_step(l, true, 0.5, 0.6);
  EXPECT_NEAR(l.steps().back().gain, 0.1, 1e-15);
  simple_rise_step(l, false, 0.6, 0.9);
  EXPECT_EQ(l.steps().back().gain, 0.0);
  EXPECT_NEAR(l.capital(), 0.1, 1e-15);
  simple_rise_step(l, true, 0.6, 0.5);
  EXPECT_NEAR(l.steps().back().gain, -0.1, 1e-15);
  EXPECT_NEAR(l.capital(), 0.0, 1e-15);
  EXPECT_EQ(l.entry_count(), 2u);
  EXPECT_THROW(limited_risk_step(l, true, 0.5, 0.6, 0.5), std::logic_error);
}

TEST(SimpleRise, CapitalEqualsSumOfGains) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TradeLedger l = TradeLedger::simple();
  double prev = u(rng);
  for (int i = 0; i < 5000; ++i) {
    const double now = u(rng);
    simple_rise_step(l, u(rng) < 0.4, prev, now);
    prev = now;
  }
  double sum = 0.0;
  for (const auto& s : l.steps()) sum += s.gain;
  EXPECT_NEAR(l.capital(), sum, 1e-12);
  EXPECT_EQ(total_gain(l), sum);
}

TEST(LimitedRisk, CapitalPathMatchesGains) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TradeLedger l = TradeLedger::limited_risk(2.0);
  double prev = u(rng);
  for (int i = 0; i < 5000; ++i) {
    const double now = u(rng);
    limited_risk_step(l, u(rng) < 0.4, prev, now, 0.3);
    prev = now;
  }
  double capital = l.initial_capital();
  for (const auto& s : l.steps()) {
    capital += s.gain;
    EXPECT_NEAR(s.capital, capital, 1e-12 * std::max(1.0, capital));
  }
  EXPECT_NEAR(l.capital(), capital, 1e-12 * std::max(1.0, capital));
}

TEST(AverageGain, Values) {
  TradeLedger l = TradeLedger::simple();
  EXPECT_FALSE(average_gain(l).has_value());
  for (int i = 0; i < 10; ++i) simple_rise_step(l, true, 0.4, 0.45);
  EXPECT_NEAR(*average_gain(l), 0.05, 1e-12);
  TradeLedger m = TradeLedger::simple();
  for (int i = 0; i < 4; ++i) simple_rise_step(m, true, 0.2, 0.3);
  EXPECT_NEAR(*average_gain(m), 0.1, 1e-12);
}

TEST(LimitedRisk, Steps) {
  TradeLedger l = TradeLedger::limited_risk(1.0);
  limited_risk_step(l, true, 0.5, 0.7, 0.5);
  EXPECT_NEAR(l.capital(), 1.1, 1e-15);
  TradeLedger c = TradeLedger::limited_risk(1.0);
  limited_risk_step(c, true, 1.0, 0.0, 0.5);
  EXPECT_EQ(c.capital(), 0.5);
  limited_risk_step(c, false, 0.0, 1.0, 0.5);
  EXPECT_EQ(c.capital(), 0.5);
  EXPECT_THROW(limited_risk_step(c, true, 0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(limited_risk_step(c, true, 0.0, 1.0, -0.1), std::invalid_argument);
  EXPECT_THROW(TradeLedger::limited_risk(0.0), std::invalid_argument);
  EXPECT_THROW(simple_rise_step(c, true, 0.0, 1.0), std::logic_error);
}

TEST(LimitedRisk, PositiveOnWorstCasePaths) {
  for (double delta : {0.1, 0.5, 0.9}) {
    TradeLedger l = TradeLedger::limited_risk(1.0);
    for (int i = 0; i < 100; ++i) limited_risk_step(l, true, 1.0, 0.0, delta);
    EXPECT_GT(l.capital(), 0.0);
    EXPECT_NEAR(l.log_capital(), 100 * std::log1p(-delta), 1e-9);
    EXPECT_GE(l.capital(), std::pow(1.0 - delta, 100) * (1 - 1e-12));
  }
}

TEST(LimitedRisk, LogCapitalStaysFiniteAfterUnderflow) {
  TradeLedger l = TradeLedger::limited_risk(1.0);
  for (int i = 0; i < 400; ++i) limited_risk_step(l, true, 1.0, 0.0, 0.9);
  EXPECT_TRUE(std::isfinite(l.log_capital()));
  EXPECT_NEAR(l.log_capital(), 400 * std::log(0.1), 1e-9);
}

TEST(RealizedVariance, Values) {
  TradeLedger l = TradeLedger::simple();
  EXPECT_FALSE(realized_variance(l).has_value());
  simple_rise_step(l, true, 0.5, 0.6);
  simple_rise_step(l, true, 0.6, 0.5);
  simple_rise_step(l, false, 0.5, 0.0);
  EXPECT_NEAR(*realized_variance(l), 0.01, 1e-15);
  TradeLedger flat = TradeLedger::simple();
  simple_rise_step(flat, true, 0.3, 0.3);
  EXPECT_EQ(*realized_variance(flat), 0.0);
}

TEST(CapitalLowerBound, Values) {
  EXPECT_NEAR(capital_lower_bound(1.0, 0.1, 0.05, 1000, 0.01, 0.0), std::exp(4.9), 1e-9);
  EXPECT_NEAR(capital_lower_bound(1.0, 0.1, 0.05, 1000, 0.01, 0.0), 134.28978, 1e-4);
  EXPECT_NEAR(capital_lower_bound(2.0, 0.1, 0.05, 1000, 0.01, 1000 * (0.05 - 0.1 * 0.01)), 2.0, 1e-12);
  EXPECT_EQ(capital_lower_bound(3.0, 0.0, 0.05, 1000, 0.01, 7.0), 3.0);
}

TEST(SigmaThreshold, Values) {
  const std::vector<double> w{0.4, 0.5, 0.6};
  EXPECT_NEAR(oracle::sample_std(w), 0.1, 1e-15);
  EXPECT_NEAR(sigma_threshold(w, 0.5, 1e-4), 0.05, 1e-15);
  const std::vector<double> flat{0.3, 0.3, 0.3};
  EXPECT_EQ(sigma_threshold(flat, 0.5, 1e-4), 1e-4);
  const std::vector<double> one{0.3};
  EXPECT_EQ(sigma_threshold(one, 0.5, 2e-4), 2e-4);
  EXPECT_LE(sigma_threshold(w, 0.2, 1e-4), sigma_threshold(w, 0.3, 1e-4));
}

TEST(PositionExit, Rules) {
  EXPECT_TRUE(position_exit(0.65, 0.6, 0.9, 0.1));
  EXPECT_TRUE(position_exit(0.9, 0.6, 0.55, 0.1));
  EXPECT_TRUE(position_exit(0.9, 0.6, 0.6, 0.1));
  EXPECT_FALSE(position_exit(0.8, 0.6, 0.7, 0.1));
}

TEST(TransactionCost, TwoSided) {
  EXPECT_EQ(apply_transaction_cost(0.3, 1.0, 0.0), 0.3);
  EXPECT_NEAR(0.3 - apply_transaction_cost(0.3, 1.0, 0.0001), 0.0002, 1e-15);
  EXPECT_NEAR(0.3 - apply_transaction_cost(0.3, 1.0, 0.0001, 1), 0.0001, 1e-15);
  EXPECT_LE(transaction_cost(5.0, 0.001), transaction_cost(5.0, 0.002));
  EXPECT_GE(transaction_cost(-5.0, 0.001), 0.0);
  EXPECT_THROW(transaction_cost(1.0, -0.1), std::invalid_argument);
}

TEST(BuyAndHold, Returns) {
  const std::vector<double> up{100, 105, 110}, flat{7, 7}, down{100, 90};
  EXPECT_NEAR(buy_and_hold(up, 1.0).relative, 0.1, 1e-12);
  EXPECT_NEAR(buy_and_hold(up, 2.0).absolute, 0.2, 1e-12);
  EXPECT_EQ(buy_and_hold(flat, 1.0).relative, 0.0);
  EXPECT_NEAR(buy_and_hold(down, 1.0).relative, -0.1, 1e-12);
  EXPECT_THROW(buy_and_hold(std::vector<double>{}, 1.0), std::invalid_argument);
}

TEST(Aggregate, IdenticalStrategiesStayUniform) {
  Matrix r(3, 5);
  for (int t = 0; t < 5; ++t) r.col(t).setConstant(0.01 * (t - 2));
  const Aggregation a = aggregate_strategies(r, 1.0);
  for (int t = 0; t <= 5; ++t)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(a.weights(j, t), 1.0 / 3.0, 1e-15);
}

TEST(Aggregate, DominantStrategyTakesOverAtClosedFormRate) {
  const int periods = 50;
  const double eta = 2.0, gap = 0.05;
  Matrix r(2, periods);
  r.row(0).setConstant(0.02);
  r.row(1).setConstant(0.02 - gap);
  const Aggregation a = aggregate_strategies(r, eta);
  for (int t = 0; t <= periods; ++t) {
    EXPECT_NEAR(a.weights(0, t) / a.weights(1, t), std::exp(eta * t * gap), 1e-9 * std::exp(eta * t * gap));
    EXPECT_NEAR(a.weights.col(t).sum(), 1.0, 1e-12);
    if (t > 0) {
      EXPECT_GT(a.weights(0, t), a.weights(0, t - 1));
    }
  }
  double cap = 1.0;
  for (int t = 0; t < periods; ++t) cap *= 1.0 + a.weights.col(t).dot(r.col(t));
  EXPECT_NEAR(a.capital[periods], cap, 1e-12);
  EXPECT_THROW(aggregate_strategies(r, 0.0), std::invalid_argument);
}

TEST(Aggregate, StableForLargeReturns) {
  Matrix r = Matrix::Constant(2, 400, 0.0);
  r.row(0).setConstant(5.0);
  const Aggregation a = aggregate_strategies(r, 1.0);
  EXPECT_TRUE(a.weights.allFinite());
  EXPECT_NEAR(a.weights(0, 400), 1.0, 1e-15);
}

TEST(GainDecomposition, ReproducesTotalGain) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double eps = 0.05;
  TradeLedger l = TradeLedger::simple();
  double prev = 0.5;
  for (int i = 0; i < 3000; ++i) {
    const double pt = std::round(u(rng) * 20) / 20, st = std::round(prev * 20) / 20;
    const double now = u(rng);
    simple_rise_step(l, entry_decision(pt, st, eps), prev, now, {pt, st});
    prev = now;
  }
  const GainDecomposition d = decompose_gain(l);
  EXPECT_NEAR(d.total(), total_gain(l), 1e-12);
  EXPECT_GE(d.edge, eps * static_cast<double>(l.entry_count()));
}

TEST(LogCapitalFloor, HoldsForModerateMoves) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.3, 0.7);
  TradeLedger l = TradeLedger::limited_risk(1.0);
  double prev = 0.5;
  for (int i = 0; i < 2000; ++i) {
    const double now = u(rng);
    limited_risk_step(l, u(rng) < 0.45, prev, now, 0.5);
    prev = now;
  }
  EXPECT_GE(l.log_capital(), log_capital_floor(l, 0.5));
}

TEST(StrategyParams, Validation) {
  StrategyParams p;
  EXPECT_NO_THROW(p.validate());
  p.delta_fraction = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.tx_cost = -1e-4;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_EQ(strategy_mode_from_string(to_string(StrategyMode::limited_risk)), StrategyMode::limited_risk);
  EXPECT_THROW(strategy_mode_from_string("short"), std::invalid_argument);
}

TEST(Ledger, GambleDurationsAreInclusive) {
  TradeLedger l = TradeLedger::simple();
  for (bool e : {true, true, false, true, false, false, true, true, true}) simple_rise_step(l, e, 0.5, 0.5);
  l.close_gamble();
  EXPECT_EQ(l.durations(), (std::vector<std::size_t>{2, 1, 3}));
}
