#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "calib/backtest.hpp"
#include "calib/errors.hpp"
#include "calib/forecaster.hpp"
#include "calib/market.hpp"

using namespace calib;

namespace {

// Exit codes: 0 ok, 1 run failure or schedule violations, 2 bad
// configuration, 3 unusable input data.
constexpr int exit_failure = 1;
constexpr int exit_config = 2;
constexpr int exit_input = 3;

struct Names {
  std::string synth = to_string(MarketKind::drift_segments);
  std::string mode = to_string(RunMode::fixed_delta);
  std::string kernel = to_string(KernelMode::grid);
  std::string strategy = to_string(StrategyMode::simple);
  std::string hold = to_string(HoldRule::per_step);
};

void add_market_options(CLI::App* app, MarketParams& m) {
  app->add_option("--start", m.start, "Initial scaled price of a synthetic market")->capture_default_str();
  app->add_option("--walk-step", m.walk_step, "random-walk: step standard deviation")->capture_default_str();
  app->add_option("--drift", m.drift, "drift-segments: per-step drift of the level")->capture_default_str();
  app->add_option("--segment-length", m.segment_length, "drift-segments: steps per drift segment")->capture_default_str();
  app->add_option("--level-lo", m.level_lo, "drift-segments: lower edge of the level band")->capture_default_str();
  app->add_option("--level-hi", m.level_hi, "drift-segments: upper edge of the level band")->capture_default_str();
  app->add_option("--noise", m.noise, "drift-segments: observation noise standard deviation")->capture_default_str();
}

void add_run_options(CLI::App* app, BacktestConfig& c, Names& n, std::string& out,
                     std::string& config_file) {
  app->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app->add_option("--config", config_file, "Flat key=value configuration file");
  app->add_option("--out", out, "Output directory")->required();
  app->add_option("--input", c.inputs, "Price files with a timestamp,price header")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app->add_option("--synth", n.synth, "Synthetic market when no input is given")
      ->check(CLI::IsMember({"iid-uniform", "random-walk", "drift-segments", "oakes-adversary"}))
      ->capture_default_str();
  app->add_option("--assets", c.assets, "Number of synthetic assets")->capture_default_str();
  app->add_option("--steps", c.steps, "Steps per synthetic asset")->capture_default_str();
  app->add_option("--synth-seed", c.synth_seed, "Seed of the synthetic markets")->capture_default_str();
  app->add_option("--synth-lo", c.synth_lo, "Raw price mapped to scaled 0")->capture_default_str();
  app->add_option("--synth-hi", c.synth_hi, "Raw price mapped to scaled 1")->capture_default_str();
  add_market_options(app, c.market);
  app->add_option("--scale-lo", c.scale_lo, "Raw price mapped to 0 for file inputs");
  app->add_option("--scale-hi", c.scale_hi, "Raw price mapped to 1 for file inputs");
  app->add_flag("--auto-scale", c.auto_scale, "Scale file inputs by their own min and max");
  app->add_flag("--clamp", c.clamp, "Clamp out-of-range prices instead of failing");
  app->add_option("--signal-dim", c.signal_dim, "Signal dimension k (lagged prices)")->capture_default_str();
  app->add_option("--mode", n.mode, "fixed-delta or epoch")
      ->check(CLI::IsMember({"fixed-delta", "epoch"}))
      ->capture_default_str();
  app->add_option("--delta", c.delta, "Grid step in fixed-delta mode")->capture_default_str();
  app->add_option("--exponent", c.exponent, "Epoch exponent M")->capture_default_str();
  app->add_option("--kernel", n.kernel, "grid or cosine")
      ->check(CLI::IsMember({"grid", "cosine"}))
      ->capture_default_str();
  app->add_option("--epsilon", c.epsilon, "Fixed entry threshold")->capture_default_str();
  app->add_option("--epsilon-prime", c.epsilon_prime, "Threshold multiple of the rolling std (0 = fixed)")->capture_default_str();
  app->add_option("--window", c.window, "Rolling window for the threshold")->capture_default_str();
  app->add_option("--epsilon-floor", c.epsilon_floor, "Lower bound of the rolling threshold")->capture_default_str();
  app->add_option("--strategy", n.strategy, "simple or limited-risk")
      ->check(CLI::IsMember({"simple", "limited-risk"}))
      ->capture_default_str();
  app->add_option("--delta-fraction", c.delta_fraction, "Staked fraction of capital")->capture_default_str();
  app->add_option("--initial-capital", c.initial_capital, "Initial capital of limited-risk runs")->capture_default_str();
  app->add_option("--hold", n.hold, "per-step or sell-rule")
      ->check(CLI::IsMember({"per-step", "sell-rule"}))
      ->capture_default_str();
  app->add_option("--tx-cost", c.tx_cost, "Cost rate per trade")->capture_default_str();
  app->add_option("--eta", c.eta, "Aggregation learning rate")->capture_default_str();
  app->add_option("--period", c.period, "Aggregation period in steps")->capture_default_str();
  app->add_option("--confidence", c.confidence, "Confidence of the calibration bound")->capture_default_str();
  app->add_option("--seed", c.seed, "Randomization seed")->capture_default_str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

// key=value lines become --key=value tokens; ["a","b"] arrays repeat the key.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      std::istringstream items(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) out.push_back("--" + key + "=" + unquote(item));
    } else {
      out.push_back("--" + key + "=" + unquote(value));
    }
  }
  return out;
}

// Splices the tokens of a --config file in front of the explicit flags so
// that flags given on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || (args[0] != "backtest" && args[0] != "calibrate")) return args;
  std::vector<std::string> rest, from_file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      const auto t = config_tokens(args[++i]);
      from_file.insert(from_file.end(), t.begin(), t.end());
    } else if (args[i].rfind("--config=", 0) == 0) {
      const auto t = config_tokens(args[i].substr(9));
      from_file.insert(from_file.end(), t.begin(), t.end());
    } else {
      rest.push_back(args[i]);
    }
  }
  std::vector<std::string> out{args[0]};
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

void resolve(BacktestConfig& c, const Names& n) {
  c.synth = market_kind_from_string(n.synth);
  c.run_mode = run_mode_from_string(n.mode);
  c.kernel = kernel_mode_from_string(n.kernel);
  c.strategy = strategy_mode_from_string(n.strategy);
  c.hold = hold_rule_from_string(n.hold);
}

void print_summary(const Report& r) {
  std::cout << "name,entry_frequency,average_duration,return_gross,return_net,buy_and_hold\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); };
  auto row = [&](const SummaryRow& s) {
    std::cout << s.name << ',' << opt(s.entry_frequency) << ',' << opt(s.average_duration) << ','
              << format_number(s.return_gross) << ',' << format_number(s.return_net) << ','
              << opt(s.buy_and_hold) << '\n';
  };
  for (const auto& a : r.assets) row(a.summary);
  row(r.aggregate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated forecasting and trading backtests"};
  app.require_subcommand(1);

  BacktestConfig config;
  Names names;
  std::string out, config_file;

  auto* backtest = app.add_subcommand("backtest", "Run the trading loop and write reports");
  add_run_options(backtest, config, names, out, config_file);
  auto* calibrate = app.add_subcommand("calibrate", "Run the loop and write calibration curves only");
  add_run_options(calibrate, config, names, out, config_file);

  int exponent = 8, signal_dim = 1, s_max = 10;
  auto* schedule = app.add_subcommand("validate-schedule", "Check an epoch schedule");
  schedule->add_option("--exponent", exponent, "Epoch exponent M")->capture_default_str();
  schedule->add_option("--signal-dim", signal_dim, "Signal dimension k")->capture_default_str();
  schedule->add_option("--s-max", s_max, "Last epoch checked")->capture_default_str();

  std::string synth_kind = to_string(MarketKind::drift_segments), synth_out;
  MarketParams synth_params;
  std::size_t synth_steps = 20000;
  std::uint64_t synth_seed = 1;
  double synth_lo = 100.0, synth_hi = 200.0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic price file");
  synth->add_option("--out", synth_out, "Output price file")->required();
  synth->add_option("--kind", synth_kind, "Market kind")
      ->check(CLI::IsMember({"iid-uniform", "random-walk", "drift-segments"}))
      ->capture_default_str();
  synth->add_option("--steps", synth_steps, "Number of prices")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--lo", synth_lo, "Raw price mapped to scaled 0")->capture_default_str();
  synth->add_option("--hi", synth_hi, "Raw price mapped to scaled 1")->capture_default_str();
  add_market_options(synth, synth_params);

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "calib: configuration error: " << e.what() << '\n';
    return exit_config;
  }

  try {
    if (backtest->parsed() || calibrate->parsed()) {
      resolve(config, names);
      const Report report = run_backtest(config);
      if (backtest->parsed()) {
        emit_report(report, out);
        print_summary(report);
      } else {
        emit_calibration(report, out);
        std::cout << "asset,steps,selections,error,bound\n";
        for (const auto& a : report.assets)
          std::cout << a.name << ',' << a.rows.size() << ',' << a.calibration.selections << ','
                    << format_number(a.calibration.value) << ','
                    << format_number(a.rows.back().bound) << '\n';
      }
    } else if (schedule->parsed()) {
      const auto violations = validate_schedule(exponent, signal_dim, s_max);
      if (violations.empty()) {
        std::cout << "ok: M = " << exponent << ", k = " << signal_dim << ", s = 2.." << s_max << '\n';
        return 0;
      }
      std::cout << "s,constraint,lhs,rhs\n";
      for (const auto& v : violations)
        std::cout << v.s << ',' << to_string(v.constraint) << ',' << format_number(v.lhs) << ','
                  << format_number(v.rhs) << '\n';
      std::cerr << "calib: " << violations.size() << " schedule violations\n";
      return exit_failure;
    } else if (synth->parsed()) {
      if (!(synth_lo > 0.0 && synth_lo < synth_hi))
        throw ConfigError("synthetic price range needs 0 < lo < hi");
      const auto scaled = synth_market(market_kind_from_string(synth_kind), synth_params,
                                       synth_steps, synth_seed);
      std::vector<double> raw(scaled.size());
      for (std::size_t i = 0; i < scaled.size(); ++i) raw[i] = synth_lo + scaled[i] * (synth_hi - synth_lo);
      write_prices(synth_out, minute_timestamps(raw.size()), raw);
    }
  } catch (const ConfigError& e) {
    std::cerr << "calib: configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << "calib: configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const ParseError& e) {
    std::cerr << "calib: input error: " << e.what() << '\n';
    return exit_input;
  } catch (const InputFileError& e) {
    std::cerr << "calib: input error: " << e.what() << '\n';
    return exit_input;
  } catch (const EmptyInputError& e) {
    std::cerr << "calib: input error: " << e.what() << '\n';
    return exit_input;
  } catch (const RangeError& e) {
    std::cerr << "calib: input error: " << e.what() << '\n';
    return exit_input;
  } catch (const std::exception& e) {
    std::cerr << "calib: " << e.what() << '\n';
    return exit_failure;
  }
  return 0;
}
