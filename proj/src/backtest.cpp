#include "calib/backtest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "calib/checking.hpp"
#include "calib/errors.hpp"

namespace calib {

namespace {

constexpr int max_signal_dim = 8;

void check_schedule(const BacktestConfig& c, std::uint64_t n) {
  if (c.run_mode != RunMode::epoch) return;
  const EpochSchedule schedule(c.exponent);
  const int s_max = std::max(2, schedule.epoch_at(std::max<std::uint64_t>(n, 1)));
  const auto violations = validate_schedule(c.exponent, c.signal_dim, s_max);
  if (violations.empty()) return;
  const auto& v = violations.front();
  throw ConfigError("epoch schedule with M = " + std::to_string(c.exponent) + " fails the " +
                    to_string(v.constraint) + " condition at s = " + std::to_string(v.s) +
                    " (" + format_number(v.lhs) + " vs " + format_number(v.rhs) + ")");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string optional_text(const std::optional<double>& v) {
  return v ? format_number(*v) : "NA";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t lineno) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(lineno, "malformed number \"" + s + "\"");
  return v;
}

const char* trace_header =
    "step,timestamp,raw,price,price_prev,price_prev_tilde,forecast,forecast_tilde,epsilon,"
    "entry,held,gamble_end,gain,capital,desk_gross,desk_net,error,bound,grid_step";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Desk value at a period boundary b (number of completed steps).
double desk_at(const AssetRun& a, std::size_t b, bool net) {
  if (b == 0) return a.rows.front().desk_gross;
  return net ? a.rows[b - 1].desk_net : a.rows[b - 1].desk_gross;
}

double hold_at(const AssetRun& a, std::size_t b) {
  return b == 0 ? 1.0 : a.rows[b - 1].raw / a.rows.front().raw;
}

}  // namespace

std::string to_string(RunMode m) { return m == RunMode::epoch ? "epoch" : "fixed-delta"; }
std::string to_string(HoldRule h) { return h == HoldRule::sell_rule ? "sell-rule" : "per-step"; }
std::string to_string(KernelMode m) { return m == KernelMode::cosine ? "cosine" : "grid"; }

RunMode run_mode_from_string(const std::string& s) {
  if (s == "fixed-delta") return RunMode::fixed_delta;
  if (s == "epoch") return RunMode::epoch;
  throw ConfigError("unknown run mode: " + s);
}

HoldRule hold_rule_from_string(const std::string& s) {
  if (s == "per-step") return HoldRule::per_step;
  if (s == "sell-rule") return HoldRule::sell_rule;
  throw ConfigError("unknown hold rule: " + s);
}

KernelMode kernel_mode_from_string(const std::string& s) {
  if (s == "grid") return KernelMode::grid;
  if (s == "cosine") return KernelMode::cosine;
  throw ConfigError("unknown kernel: " + s);
}

void BacktestConfig::validate() const {
  if (inputs.empty()) {
    if (assets == 0) throw ConfigError("assets must be >= 1");
    if (steps == 0) throw ConfigError("steps must be >= 1");
    if (!(synth_lo > 0.0 && synth_lo < synth_hi))
      throw ConfigError("synthetic price range needs 0 < lo < hi");
    market.validate(synth);
  } else if (!auto_scale) {
    if (!std::isfinite(scale_lo) || !std::isfinite(scale_hi))
      throw ConfigError("file inputs need scale-lo and scale-hi, or auto-scale");
    if (!(scale_lo < scale_hi)) throw ConfigError("scale bounds need lo < hi");
  }
  if (signal_dim < 1 || signal_dim > max_signal_dim)
    throw ConfigError("signal dimension must lie in [1, " + std::to_string(max_signal_dim) + "]");
  if (run_mode == RunMode::fixed_delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    try {
      (void)PartitionGrid::from_step(delta);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("delta: ") + e.what());
    }
  } else if (exponent < 1) {
    throw ConfigError("epoch exponent M must be >= 1");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
  if (!(epsilon_prime >= 0.0)) throw ConfigError("epsilon-prime must be >= 0");
  if (epsilon_prime > 0.0 && window < 2) throw ConfigError("window must be >= 2");
  if (!(epsilon_floor > 0.0 && epsilon_floor < 1.0))
    throw ConfigError("epsilon floor must lie in (0,1)");
  if (!(delta_fraction >= 0.0 && delta_fraction < 1.0))
    throw ConfigError("delta-fraction must lie in [0,1)");
  if (!(initial_capital > 0.0)) throw ConfigError("initial capital must be positive");
  if (!(tx_cost >= 0.0)) throw ConfigError("transaction cost must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (period == 0) throw ConfigError("period must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0,1)");
  if (inputs.empty()) check_schedule(*this, steps);
}

std::string BacktestConfig::echo() const {
  std::ostringstream o;
  if (!inputs.empty()) {
    o << "input=[";
    for (std::size_t i = 0; i < inputs.size(); ++i) o << (i ? "," : "") << '"' << inputs[i] << '"';
    o << "]\n";
  }
  o << "synth=" << to_string(synth) << '\n'
    << "assets=" << assets << '\n'
    << "steps=" << steps << '\n'
    << "synth-seed=" << synth_seed << '\n'
    << "synth-lo=" << format_number(synth_lo) << '\n'
    << "synth-hi=" << format_number(synth_hi) << '\n'
    << "start=" << format_number(market.start) << '\n'
    << "walk-step=" << format_number(market.walk_step) << '\n'
    << "drift=" << format_number(market.drift) << '\n'
    << "segment-length=" << market.segment_length << '\n'
    << "level-lo=" << format_number(market.level_lo) << '\n'
    << "level-hi=" << format_number(market.level_hi) << '\n'
    << "noise=" << format_number(market.noise) << '\n';
  if (std::isfinite(scale_lo)) o << "scale-lo=" << format_number(scale_lo) << '\n';
  if (std::isfinite(scale_hi)) o << "scale-hi=" << format_number(scale_hi) << '\n';
  o << "auto-scale=" << bool_text(auto_scale) << '\n'
    << "clamp=" << bool_text(clamp) << '\n'
    << "signal-dim=" << signal_dim << '\n'
    << "mode=" << to_string(run_mode) << '\n'
    << "delta=" << format_number(delta) << '\n'
    << "exponent=" << exponent << '\n'
    << "kernel=" << to_string(kernel) << '\n'
    << "epsilon=" << format_number(epsilon) << '\n'
    << "epsilon-prime=" << format_number(epsilon_prime) << '\n'
    << "window=" << window << '\n'
    << "epsilon-floor=" << format_number(epsilon_floor) << '\n'
    << "strategy=" << to_string(strategy) << '\n'
    << "delta-fraction=" << format_number(delta_fraction) << '\n'
    << "initial-capital=" << format_number(initial_capital) << '\n'
    << "hold=" << to_string(hold) << '\n'
    << "tx-cost=" << format_number(tx_cost) << '\n'
    << "eta=" << format_number(eta) << '\n'
    << "period=" << period << '\n'
    << "confidence=" << format_number(confidence) << '\n'
    << "seed=" << seed << '\n';
  return o.str();
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

AssetRun run_asset(AssetFeed feed, const BacktestConfig& c, std::uint64_t asset_index) {
  const bool live = feed.scaled.empty();
  if (live && !feed.generator) throw std::invalid_argument("asset feed has neither data nor generator");
  const std::size_t n = live ? feed.steps : feed.scaled.size() - 1;
  if (n == 0) throw EmptyInputError("asset " + feed.name + " has no steps");
  if (live) {
    feed.scaled.assign(1, feed.generator->initial());
    feed.raw.assign(1, feed.raw_lo + feed.scaled[0] * (feed.raw_hi - feed.raw_lo));
  } else {
    // raw holds R_1..R_n; prepend R_0 = R_1 to line up with the scaled series.
    feed.raw.insert(feed.raw.begin(), feed.raw.front());
  }
  if (feed.timestamps.size() < n) feed.timestamps = minute_timestamps(n);

  const int k = c.signal_dim;
  const EpochSchedule schedule(c.run_mode == RunMode::epoch ? c.exponent : 1);
  Forecaster forecaster = c.run_mode == RunMode::epoch
                              ? Forecaster(schedule.grid(1), k, c.kernel)
                              : Forecaster(PartitionGrid::from_step(c.delta), k, c.kernel);
  Rng rng = substream(c.seed, asset_index, 0);

  AssetRun run{feed.name,
               {},
               c.strategy == StrategyMode::simple ? TradeLedger::simple()
                                                  : TradeLedger::limited_risk(c.initial_capital),
               {},
               {}};
  run.rows.reserve(n);

  const bool simple = c.strategy == StrategyMode::simple;
  double desk_gross = simple ? feed.raw[0] : c.initial_capital;
  double desk_net = desk_gross;
  bool open = false;
  CalibrationMeter meter;

  std::size_t i = 1;
  try {
    for (; i <= n; ++i) {
      if (c.run_mode == RunMode::epoch)
        while (i == schedule.start(forecaster.epoch() + 1)) forecaster = advance_epoch(forecaster, schedule);
      const PartitionGrid& grid = forecaster.grid();

      Vector x(k);
      for (int j = 0; j < k; ++j) {
        const std::size_t lag = static_cast<std::size_t>(j) + 1;
        x[j] = feed.scaled[i >= lag ? i - lag : 0];
      }
      const double p = forecaster.solve(x);
      const RandomizedPoint rp = randomize_point(p, x, grid, rng);

      double eps = c.epsilon;
      if (c.epsilon_prime > 0.0) {
        const std::size_t from = i > c.window ? i - c.window : 0;
        eps = sigma_threshold(std::span<const double>(feed.scaled.data() + from, i - from),
                              c.epsilon_prime, c.epsilon_floor);
      }
      const bool entry = entry_decision(rp.p, rp.x[0], eps);

      if (live) {
        const double s = feed.generator->next(p);
        feed.scaled.push_back(s);
        feed.raw.push_back(feed.raw_lo + s * (feed.raw_hi - feed.raw_lo));
      }
      const double s_prev = feed.scaled[i - 1];
      const double s_now = feed.scaled[i];
      const double r_prev = feed.raw[i - 1];
      const double r_now = feed.raw[i];

      const bool held = c.hold == HoldRule::per_step ? entry : (open || entry);
      const DecisionInputs inputs{rp.p, rp.x[0]};
      if (simple)
        simple_rise_step(run.ledger, held, s_prev, s_now, inputs);
      else
        limited_risk_step(run.ledger, held, s_prev, s_now, c.delta_fraction, inputs);

      // Desk capital on raw prices; buys and sells each pay tx_cost on the
      // traded notional.
      if (open && !held) {
        desk_net -= simple ? transaction_cost(r_prev, c.tx_cost)
                           : transaction_cost(c.delta_fraction * desk_net, c.tx_cost);
      }
      if (held && !open) {
        desk_net -= simple ? transaction_cost(r_prev, c.tx_cost)
                           : transaction_cost(c.delta_fraction * desk_net, c.tx_cost);
      }
      if (held) {
        if (simple) {
          desk_gross += r_now - r_prev;
          desk_net += r_now - r_prev;
        } else {
          const double r = r_now / r_prev - 1.0;
          desk_gross *= 1.0 + c.delta_fraction * r;
          desk_net *= 1.0 + c.delta_fraction * r;
        }
      }
      open = held;
      bool closed = false;
      if (c.hold == HoldRule::sell_rule && held && position_exit(rp.p, s_prev, s_now, eps)) {
        desk_net -= simple ? transaction_cost(r_now, c.tx_cost)
                           : transaction_cost(c.delta_fraction * desk_net, c.tx_cost);
        run.ledger.close_gamble();
        open = false;
        closed = true;
      }
      if (i == n && open) {
        desk_net -= simple ? transaction_cost(r_now, c.tx_cost)
                           : transaction_cost(c.delta_fraction * desk_net, c.tx_cost);
        run.ledger.close_gamble();
        open = false;
        closed = true;
      }

      meter.add(entry, s_now - rp.p);
      const double bound = calibration_bound(i, grid.step(), k, c.confidence);
      const auto& step = run.ledger.steps().back();
      run.rows.push_back({i, feed.timestamps[i - 1], r_now, s_now, s_prev, rp.x[0], p, rp.p, eps,
                          entry, held, closed, step.gain, step.capital, desk_gross, desk_net,
                          meter.per_step(), bound, grid.step()});

      forecaster.update(p, x, s_now);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("asset " + feed.name + ", step " + std::to_string(i) + ": " + e.what());
  }

  // Per-step holds close a gamble on the first step that is not held.
  for (std::size_t j = 0; j + 1 < run.rows.size(); ++j)
    if (run.rows[j].held && !run.rows[j + 1].held) run.rows[j].gamble_end = true;

  run.calibration = {meter.per_step(), meter.selections(), meter.selections() == 0};
  run.summary = summarize(run.name, run.rows);
  return run;
}

SummaryRow summarize(const std::string& name, const std::vector<TraceRow>& rows) {
  if (rows.empty()) throw EmptyInputError("cannot summarize an empty trace");
  std::size_t entries = 0, run_len = 0, gambles = 0, held_total = 0;
  for (const auto& r : rows) {
    entries += r.entry;
    if (r.held) ++run_len;
    if (r.gamble_end) {
      held_total += run_len;
      ++gambles;
      run_len = 0;
    }
  }
  SummaryRow s;
  s.name = name;
  s.entry_frequency = static_cast<double>(entries) / static_cast<double>(rows.size());
  if (gambles > 0) s.average_duration = static_cast<double>(held_total) / static_cast<double>(gambles);
  const double initial = rows.front().desk_gross;
  s.return_gross = rows.back().desk_gross / initial - 1.0;
  s.return_net = rows.back().desk_net / initial - 1.0;
  s.buy_and_hold = rows.back().raw / rows.front().raw - 1.0;
  return s;
}

Report run_backtest(const BacktestConfig& c) {
  c.validate();
  Report report;
  report.config_echo = c.echo();
  report.period = c.period;

  if (c.inputs.empty()) {
    for (std::size_t a = 0; a < c.assets; ++a) {
      AssetFeed feed;
      feed.name = "asset" + std::to_string(a + 1);
      Rng seeder = substream(c.synth_seed, a, 1);
      feed.generator.emplace(c.synth, c.market, seeder());
      feed.steps = c.steps;
      feed.raw_lo = c.synth_lo;
      feed.raw_hi = c.synth_hi;
      report.assets.push_back(run_asset(std::move(feed), c, a));
    }
  } else {
    std::set<std::string> names;
    for (std::size_t a = 0; a < c.inputs.size(); ++a) {
      const std::filesystem::path path(c.inputs[a]);
      PriceSeries series = load_prices(path);
      series = c.auto_scale ? rescale_auto(std::move(series))
                            : rescale(std::move(series), c.scale_lo, c.scale_hi, c.clamp);
      check_schedule(c, series.size());
      AssetFeed feed;
      feed.name = path.stem().string();
      if (!names.insert(feed.name).second) throw ConfigError("duplicate asset name " + feed.name);
      feed.scaled = std::move(series.scaled);
      feed.raw = std::move(series.raw);
      feed.timestamps = std::move(series.timestamps);
      report.assets.push_back(run_asset(std::move(feed), c, a));
    }
  }

  std::size_t len = report.assets.front().rows.size();
  for (const auto& a : report.assets) len = std::min(len, a.rows.size());
  const std::size_t periods = (len + c.period - 1) / c.period;
  const auto m = static_cast<Eigen::Index>(2 * report.assets.size());
  Matrix gross(m, static_cast<Eigen::Index>(periods));
  Matrix net(m, static_cast<Eigen::Index>(periods));
  for (std::size_t a = 0; a < report.assets.size(); ++a) {
    const AssetRun& run = report.assets[a];
    report.strategy_names.push_back(run.name);
    report.strategy_names.push_back(run.name + ":hold");
    for (std::size_t t = 0; t < periods; ++t) {
      const std::size_t b0 = t * c.period, b1 = std::min(len, (t + 1) * c.period);
      const auto row = static_cast<Eigen::Index>(2 * a), col = static_cast<Eigen::Index>(t);
      gross(row, col) = desk_at(run, b1, false) / desk_at(run, b0, false) - 1.0;
      net(row, col) = desk_at(run, b1, true) / desk_at(run, b0, true) - 1.0;
      gross(row + 1, col) = net(row + 1, col) = hold_at(run, b1) / hold_at(run, b0) - 1.0;
    }
  }
  report.aggregate_gross = aggregate_strategies(gross, c.eta);
  report.aggregate_net = aggregate_strategies(net, c.eta);
  report.aggregate.name = "AGGR";
  report.aggregate.return_gross = report.aggregate_gross.capital[report.aggregate_gross.capital.size() - 1] - 1.0;
  report.aggregate.return_net = report.aggregate_net.capital[report.aggregate_net.capital.size() - 1] - 1.0;
  return report;
}

void emit_calibration(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  open_out(dir / "config.txt") << report.config_echo;
  for (const auto& a : report.assets) {
    auto out = open_out(dir / ("calibration_" + a.name + ".csv"));
    out << "step,error,bound,grid_step\n";
    for (const auto& r : a.rows)
      out << r.step << ',' << format_number(r.error) << ',' << format_number(r.bound) << ','
          << format_number(r.grid_step) << '\n';
  }
}

void emit_report(const Report& report, const std::filesystem::path& dir) {
  emit_calibration(report, dir);

  auto summary = open_out(dir / "summary.csv");
  summary << "name,entry_frequency,average_duration,return_gross,return_net,buy_and_hold\n";
  auto write_summary = [&](const SummaryRow& s) {
    summary << s.name << ',' << optional_text(s.entry_frequency) << ','
            << optional_text(s.average_duration) << ',' << format_number(s.return_gross) << ','
            << format_number(s.return_net) << ',' << optional_text(s.buy_and_hold) << '\n';
  };
  for (const auto& a : report.assets) write_summary(a.summary);
  write_summary(report.aggregate);

  for (const auto& a : report.assets) {
    auto out = open_out(dir / ("trace_" + a.name + ".csv"));
    out << trace_header << '\n';
    for (const auto& r : a.rows)
      out << r.step << ',' << r.timestamp << ',' << format_number(r.raw) << ','
          << format_number(r.price) << ',' << format_number(r.price_prev) << ','
          << format_number(r.price_prev_tilde) << ',' << format_number(r.forecast) << ','
          << format_number(r.forecast_tilde) << ',' << format_number(r.epsilon) << ','
          << r.entry << ',' << r.held << ',' << r.gamble_end << ',' << format_number(r.gain)
          << ',' << format_number(r.capital) << ',' << format_number(r.desk_gross) << ','
          << format_number(r.desk_net) << ',' << format_number(r.error) << ','
          << format_number(r.bound) << ',' << format_number(r.grid_step) << '\n';
  }

  auto capital = open_out(dir / "capital.csv");
  capital << "period,end_step,capital_gross,capital_net\n";
  const auto& cg = report.aggregate_gross.capital;
  const auto& cn = report.aggregate_net.capital;
  std::size_t len = report.assets.front().rows.size();
  for (const auto& a : report.assets) len = std::min(len, a.rows.size());
  for (Eigen::Index t = 0; t < cg.size(); ++t)
    capital << t << ',' << std::min(len, static_cast<std::size_t>(t) * report.period) << ','
            << format_number(cg[t]) << ',' << format_number(cn[t]) << '\n';

  auto agg = open_out(dir / "aggregate.csv");
  agg << "period,strategy,weight_gross,weight_net,return_gross,return_net\n";
  const auto& wg = report.aggregate_gross.weights;
  const auto& wn = report.aggregate_net.weights;
  for (Eigen::Index t = 0; t < wg.cols(); ++t)
    for (Eigen::Index j = 0; j < wg.rows(); ++j) {
      agg << t << ',' << report.strategy_names[static_cast<std::size_t>(j)] << ','
          << format_number(wg(j, t)) << ',' << format_number(wn(j, t)) << ',';
      if (t + 1 < wg.cols())
        agg << format_number(report.aggregate_gross.returns[t]) << ','
            << format_number(report.aggregate_net.returns[t]) << '\n';
      else
        agg << "NA,NA\n";
    }
}

std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputFileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != trace_header)
    throw ParseError(1, "not a trace file: " + path.string());
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 19) throw ParseError(lineno, "expected 19 columns");
    auto num = [&](int j) { return parse_number(f[j], lineno); };
    auto flag = [&](int j) {
      if (f[j] != "0" && f[j] != "1") throw ParseError(lineno, "malformed flag \"" + f[j] + "\"");
      return f[j] == "1";
    };
    rows.push_back({static_cast<std::size_t>(num(0)), f[1], num(2), num(3), num(4), num(5), num(6),
                    num(7), num(8), flag(9), flag(10), flag(11), num(12), num(13), num(14),
                    num(15), num(16), num(17), num(18)});
  }
  return rows;
}

}  // namespace calib
