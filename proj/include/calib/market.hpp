#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "calib/errors.hpp"
#include "calib/forecaster.hpp"

namespace calib {

/// Raw prices with their timestamps, plus the rescaled series once
/// `rescale` has run. The scaled series has one extra leading element:
/// S_0 duplicates S_1.
struct PriceSeries {
  std::vector<std::string> timestamps;
  std::vector<double> raw;
  std::vector<double> scaled;
  double lo = 0.0;
  double hi = 1.0;

  std::size_t size() const { return raw.size(); }
  double to_raw(double s) const { return lo + s * (hi - lo); }
};

/// Reads "timestamp,price" delimited text. Rejects nonpositive or
/// non-finite prices (ParseError), decreasing timestamps (OrderingError)
/// and files without data rows (EmptyInputError).
PriceSeries load_prices(const std::filesystem::path& path);
PriceSeries parse_prices(std::istream& in);

void write_prices(const std::filesystem::path& path, const std::vector<std::string>& timestamps,
                  const std::vector<double>& prices);

/// Affine map of raw prices onto [0,1] with S_0 = S_1 prepended. Throws
/// ConfigError when lo >= hi and RangeError for out-of-range prices unless
/// `clamp` is set.
PriceSeries rescale(PriceSeries series, double lo, double hi, bool clamp = false);

/// rescale with lo/hi taken from the series itself.
PriceSeries rescale_auto(PriceSeries series);

/// Minute-bar timestamps "YYYY-MM-DDTHH:MM" starting at 2010-03-26T10:31.
std::vector<std::string> minute_timestamps(std::size_t n);

enum class MarketKind { iid_uniform, random_walk, drift_segments, oakes_adversary };

std::string to_string(MarketKind k);
MarketKind market_kind_from_string(const std::string& s);

struct MarketParams {
  double start = 0.5;
  /// random-walk: standard deviation of each Gaussian step.
  double walk_step = 0.02;
  /// drift-segments: per-step drift of the underlying level, the segment
  /// length after which its sign flips, the band the level reflects in,
  /// and the standard deviation of observation noise around the level.
  double drift = 0.002;
  std::size_t segment_length = 500;
  double level_lo = 0.3;
  double level_hi = 0.7;
  double noise = 0.1;

  void validate(MarketKind kind) const;
};

/// Scaled outcome generator. Every kind except the Oakes adversary ignores
/// the forecast; the adversary answers 0 to forecasts above 1/2 and 1
/// otherwise, and only ever sees the deterministic forecast.
class MarketGenerator {
public:
  MarketGenerator(MarketKind kind, MarketParams params, std::uint64_t seed);

  MarketKind kind() const { return kind_; }
  bool reactive() const { return kind_ == MarketKind::oakes_adversary; }
  double initial() const { return params_.start; }
  double next(double deterministic_forecast = 0.5);

private:
  MarketKind kind_;
  MarketParams params_;
  Rng rng_;
  double last_;
  double level_;
  std::uint64_t step_ = 0;
};

/// S_1..S_n of an oblivious market. Throws ConfigError for the reactive
/// adversary, which needs forecasts.
std::vector<double> synth_market(MarketKind kind, const MarketParams& params, std::size_t n,
                                 std::uint64_t seed);

/// Reflects a value into [lo, hi].
double reflect(double v, double lo = 0.0, double hi = 1.0);

/// Box-Muller standard normal built on uniform01.
double standard_normal(Rng& rng);

}  // namespace calib
