#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "calib/backtest.hpp"
#include "calib/errors.hpp"

using namespace calib;
namespace fs = std::filesystem;

namespace {

BacktestConfig small_config() {
  BacktestConfig c;
  c.steps = 3000;
  c.period = 500;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

fs::path write_constant_file(const std::string& name, std::size_t n, double price) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << "timestamp,price\n";
  const auto ts = minute_timestamps(n);
  for (const auto& t : ts) out << t << ',' << price << '\n';
  return p;
}

}  // namespace

TEST(Backtest, TraceAndSummaryShapes) {
  BacktestConfig c = small_config();
  c.assets = 3;
  const Report r = run_backtest(c);
  ASSERT_EQ(r.assets.size(), 3u);
  for (const auto& a : r.assets) EXPECT_EQ(a.rows.size(), 3000u);
  EXPECT_EQ(r.strategy_names.size(), 6u);
  EXPECT_EQ(r.aggregate_gross.weights.cols(), 7);
  for (Eigen::Index t = 0; t < r.aggregate_gross.weights.cols(); ++t)
    EXPECT_NEAR(r.aggregate_gross.weights.col(t).sum(), 1.0, 1e-12);

  const fs::path d = fresh_dir("calib_bt_shapes");
  emit_report(r, d);
  std::ifstream summary(d / "summary.csv");
  std::string line;
  int rows = -1;
  while (std::getline(summary, line)) ++rows;
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(read_trace(d / "trace_asset2.csv").size(), 3000u);
  EXPECT_TRUE(fs::exists(d / "calibration_asset1.csv"));
  EXPECT_TRUE(fs::exists(d / "capital.csv"));
  EXPECT_TRUE(fs::exists(d / "aggregate.csv"));
  EXPECT_EQ(slurp(d / "config.txt"), c.echo());
}

TEST(Backtest, IdenticalSeedsGiveIdenticalFiles) {
  const BacktestConfig c = small_config();
  const fs::path a = fresh_dir("calib_bt_det_a"), b = fresh_dir("calib_bt_det_b");
  emit_report(run_backtest(c), a);
  emit_report(run_backtest(c), b);
  for (const auto& entry : fs::directory_iterator(a))
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
}

TEST(Backtest, SeedChangesRandomizationOnly) {
  BacktestConfig c = small_config();
  const Report r1 = run_backtest(c);
  c.seed = 99;
  const Report r2 = run_backtest(c);
  const auto& a = r1.assets[0].rows;
  const auto& b = r2.assets[0].rows;
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].forecast, b[i].forecast);
    ASSERT_EQ(a[i].price, b[i].price);
    differs |= a[i].forecast_tilde != b[i].forecast_tilde;
  }
  EXPECT_TRUE(differs);
}

TEST(Backtest, SummaryIsRecomputableFromTrace) {
  for (auto strategy : {StrategyMode::simple, StrategyMode::limited_risk}) {
    for (auto hold : {HoldRule::per_step, HoldRule::sell_rule}) {
      BacktestConfig c = small_config();
      c.strategy = strategy;
      c.hold = hold;
      const Report r = run_backtest(c);
      const fs::path d = fresh_dir("calib_bt_recompute");
      emit_report(r, d);
      const auto rows = read_trace(d / "trace_asset1.csv");
      const SummaryRow s = summarize("asset1", rows);
      const SummaryRow& orig = r.assets[0].summary;
      EXPECT_NEAR(s.return_gross, orig.return_gross, 1e-9);
      EXPECT_NEAR(s.return_net, orig.return_net, 1e-9);
      EXPECT_NEAR(*s.entry_frequency, *orig.entry_frequency, 1e-9);
      EXPECT_NEAR(*s.buy_and_hold, *orig.buy_and_hold, 1e-9);
      ASSERT_EQ(s.average_duration.has_value(), orig.average_duration.has_value());
      if (s.average_duration) {
        EXPECT_NEAR(*s.average_duration, *orig.average_duration, 1e-9);
      }

      // Independent recomputation of the desk and ledger paths.
      double desk = rows.front().desk_gross, ledger = strategy == StrategyMode::simple ? 0.0 : 1.0;
      double raw_prev = rows.front().raw;
      for (const auto& row : rows) {
        if (row.held) {
          if (strategy == StrategyMode::simple) {
            desk += row.raw - raw_prev;
            ledger += row.price - row.price_prev;
          } else {
            desk *= 1.0 + c.delta_fraction * (row.raw / raw_prev - 1.0);
            ledger *= 1.0 + c.delta_fraction * (row.price - row.price_prev);
          }
        }
        raw_prev = row.raw;
      }
      EXPECT_NEAR(desk / rows.front().desk_gross - 1.0, s.return_gross, 1e-9);
      EXPECT_NEAR(ledger, rows.back().capital, 1e-9);
      EXPECT_NEAR(r.assets[0].ledger.capital(), rows.back().capital, 1e-12);
      EXPECT_LE(s.return_net, s.return_gross + 1e-12);
    }
  }
}

TEST(Backtest, PerStepHoldMatchesEntries) {
  const Report r = run_backtest(small_config());
  std::size_t gambles = 0;
  for (const auto& row : r.assets[0].rows) {
    EXPECT_EQ(row.held, row.entry);
    EXPECT_EQ(row.entry, row.forecast_tilde > row.price_prev_tilde + row.epsilon);
    gambles += row.gamble_end;
  }
  EXPECT_EQ(gambles, r.assets[0].ledger.durations().size());
}

TEST(Backtest, SellRuleExitsFollowExitCondition) {
  BacktestConfig c = small_config();
  c.hold = HoldRule::sell_rule;
  const Report r = run_backtest(c);
  const auto& rows = r.assets[0].rows;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (!rows[i].held) continue;
    const bool exit = position_exit(rows[i].forecast_tilde, rows[i].price_prev, rows[i].price, rows[i].epsilon);
    EXPECT_EQ(rows[i].gamble_end, exit);
    if (!exit) {
      EXPECT_TRUE(rows[i + 1].held);
    }
  }
}

TEST(Backtest, ConstantOnGridSeriesNeverTrades) {
  const fs::path file = write_constant_file("calib_constant.csv", 2000, 150.0);
  BacktestConfig c;
  c.inputs = {file.string()};
  c.scale_lo = 100;
  c.scale_hi = 200;
  c.epsilon_prime = 0.5;
  c.period = 100;
  const Report r = run_backtest(c);
  const auto& rows = r.assets[0].rows;
  std::size_t late_entries = 0;
  for (std::size_t i = 100; i < rows.size(); ++i) late_entries += rows[i].entry;
  EXPECT_EQ(late_entries, 0u);
  EXPECT_EQ(r.assets[0].ledger.capital(), 0.0);
  EXPECT_EQ(r.assets[0].summary.return_gross, 0.0);
  EXPECT_EQ(*r.assets[0].summary.buy_and_hold, 0.0);
  fs::remove(file);
}

TEST(Backtest, EpochModeRefinesGridAtBoundaries) {
  BacktestConfig c = small_config();
  c.run_mode = RunMode::epoch;
  c.exponent = 8;
  const Report r = run_backtest(c);
  const auto& rows = r.assets[0].rows;
  EXPECT_EQ(rows[254].grid_step, 1.0);
  EXPECT_EQ(rows[255].grid_step, 0.25);
  EXPECT_EQ(rows.back().grid_step, 0.25);
}

TEST(Backtest, CosineKernelRuns) {
  BacktestConfig c = small_config();
  c.kernel = KernelMode::cosine;
  c.hold = HoldRule::sell_rule;
  c.epsilon_prime = 0.5;
  const Report r = run_backtest(c);
  EXPECT_EQ(r.assets[0].rows.size(), 3000u);
}

TEST(Backtest, ConfigValidation) {
  BacktestConfig c;
  c.delta = 0.3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.run_mode = RunMode::epoch;
  c.signal_dim = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.run_mode = RunMode::epoch;
  c.exponent = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.inputs = {"x.csv"};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.delta_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.period = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.assets = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(BacktestConfig{}.validate());
  EXPECT_THROW(run_mode_from_string("auto"), ConfigError);
  EXPECT_THROW(hold_rule_from_string("forever"), ConfigError);
  EXPECT_THROW(kernel_mode_from_string("gauss"), ConfigError);
}

TEST(Backtest, InputErrorsPropagate) {
  const fs::path file = write_constant_file("calib_range.csv", 10, 250.0);
  BacktestConfig c;
  c.inputs = {file.string()};
  c.scale_lo = 100;
  c.scale_hi = 200;
  EXPECT_THROW(run_backtest(c), RangeError);
  c.clamp = true;
  EXPECT_NO_THROW(run_backtest(c));
  c.inputs = {(fs::temp_directory_path() / "calib_missing.csv").string()};
  EXPECT_THROW(run_backtest(c), InputFileError);
  fs::remove(file);
}

TEST(Backtest, LoopErrorsNameAssetAndStep) {
  AssetFeed feed;
  feed.name = "bad";
  feed.scaled = {0.5, 0.5, 0.6, 1.5, 0.5};
  feed.raw = {150, 160, 250, 150};
  try {
    run_asset(feed, BacktestConfig{}, 0);
    FAIL();
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("asset bad"), std::string::npos);
    EXPECT_NE(what.find("step 3"), std::string::npos);
  }
}

TEST(FormatNumber, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5, 0.0}) {
    const std::string s = format_number(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(format_number(0.25), "0.25");
}

TEST(Echo, ListsEveryKey) {
  BacktestConfig c;
  c.inputs = {"a.csv", "b.csv"};
  c.scale_lo = 1;
  c.scale_hi = 2;
  const std::string e = c.echo();
  for (const char* key : {"input=[\"a.csv\",\"b.csv\"]", "scale-lo=1", "scale-hi=2", "mode=fixed-delta",
                          "kernel=grid", "strategy=simple", "hold=per-step", "tx-cost=1e-04", "eta=1",
                          "period=1440", "seed=1"})
    EXPECT_NE(e.find(key), std::string::npos) << key;
}
