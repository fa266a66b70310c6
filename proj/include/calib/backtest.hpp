#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "calib/concentration.hpp"
#include "calib/forecaster.hpp"
#include "calib/market.hpp"
#include "calib/trading.hpp"

namespace calib {

enum class RunMode { fixed_delta, epoch };

/// per-step: a position is held exactly on the steps where the entry rule
/// fires. sell-rule: once entered, hold until p~ <= S_{i-1} + eps or the
/// price stops rising.
enum class HoldRule { per_step, sell_rule };

std::string to_string(RunMode m);
std::string to_string(HoldRule h);
std::string to_string(KernelMode m);
RunMode run_mode_from_string(const std::string& s);
HoldRule hold_rule_from_string(const std::string& s);
KernelMode kernel_mode_from_string(const std::string& s);

struct BacktestConfig {
  // Input: price files, or a synthetic market when `inputs` is empty.
  std::vector<std::string> inputs;
  MarketKind synth = MarketKind::drift_segments;
  MarketParams market;
  std::size_t assets = 1;
  std::size_t steps = 20000;
  std::uint64_t synth_seed = 1;
  /// Raw price range of synthetic assets.
  double synth_lo = 100.0;
  double synth_hi = 200.0;

  // Scaling of file inputs. Required unless auto_scale is set.
  double scale_lo = std::numeric_limits<double>::quiet_NaN();
  double scale_hi = std::numeric_limits<double>::quiet_NaN();
  bool auto_scale = false;
  bool clamp = false;

  // Forecaster.
  int signal_dim = 1;
  RunMode run_mode = RunMode::fixed_delta;
  double delta = 0.05;
  int exponent = 8;
  KernelMode kernel = KernelMode::grid;

  // Entry threshold: fixed epsilon, or epsilon_prime * sigma over a window
  // when epsilon_prime > 0.
  double epsilon = 0.05;
  double epsilon_prime = 0.0;
  std::size_t window = 60;
  double epsilon_floor = 1e-4;

  // Strategy.
  StrategyMode strategy = StrategyMode::simple;
  double delta_fraction = 0.5;
  double initial_capital = 1.0;
  HoldRule hold = HoldRule::per_step;
  double tx_cost = 0.0001;

  // Aggregation.
  double eta = 1.0;
  std::size_t period = 1440;

  double confidence = 0.99;
  std::uint64_t seed = 1;

  /// Throws ConfigError. Epoch mode also checks the schedule over every
  /// epoch the run can reach.
  void validate() const;
  /// key = value lines, one per field, in a fixed order.
  std::string echo() const;
};

/// One step of one asset. `price` is S_i (scaled), `raw` the raw price.
struct TraceRow {
  std::size_t step;
  std::string timestamp;
  double raw;
  double price;
  double price_prev;
  double price_prev_tilde;
  double forecast;
  double forecast_tilde;
  double epsilon;
  bool entry;
  bool held;
  bool gamble_end;
  double gain;
  double capital;
  double desk_gross;
  double desk_net;
  double error;
  double bound;
  double grid_step;
};

struct SummaryRow {
  std::string name;
  std::optional<double> entry_frequency;
  std::optional<double> average_duration;
  double return_gross;
  double return_net;
  std::optional<double> buy_and_hold;
};

struct AssetRun {
  std::string name;
  std::vector<TraceRow> rows;
  TradeLedger ledger;
  SummaryRow summary;
  /// Final per-step error of the entry rule on the randomized pairs.
  CalibrationError calibration;
};

struct Report {
  std::string config_echo;
  std::vector<AssetRun> assets;
  std::vector<std::string> strategy_names;
  Aggregation aggregate_gross;
  Aggregation aggregate_net;
  std::size_t period;
  SummaryRow aggregate;
};

/// Runs the forecast, randomize, enter, reveal, update loop for every
/// asset. Deterministic given (config, data). Errors from any module are
/// rethrown as std::runtime_error naming the asset and step.
Report run_backtest(const BacktestConfig& config);

/// Single-asset loop over an already scaled series (S_0..S_n) or a live
/// generator; exposed for experiments that do not need files.
struct AssetFeed {
  std::string name;
  std::vector<double> scaled;
  std::vector<double> raw;
  std::vector<std::string> timestamps;
  /// Live source, used when `scaled` is empty.
  std::optional<MarketGenerator> generator;
  std::size_t steps = 0;
  double raw_lo = 100.0;
  double raw_hi = 200.0;
};

AssetRun run_asset(AssetFeed feed, const BacktestConfig& config, std::uint64_t asset_index);

/// Writes config.txt, summary.csv, trace_<asset>.csv,
/// calibration_<asset>.csv, capital.csv and aggregate.csv into `dir`.
void emit_report(const Report& report, const std::filesystem::path& dir);

/// Only config.txt and the calibration_<asset>.csv curves.
void emit_calibration(const Report& report, const std::filesystem::path& dir);

/// Shortest text form that parses back to the same double.
std::string format_number(double v);

/// Summary row recomputed from trace rows alone. Step 1 never moves the
/// price (S_0 = S_1), so its desk_gross and raw columns are the initial
/// desk capital and price.
SummaryRow summarize(const std::string& name, const std::vector<TraceRow>& rows);

/// Parses a trace file written by emit_report.
std::vector<TraceRow> read_trace(const std::filesystem::path& path);

}  // namespace calib
