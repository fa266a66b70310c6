#include "calib/market.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

namespace calib {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

// Numeric timestamps compare by value, anything else lexicographically
// (ISO-8601 strings sort correctly that way).
bool before(const std::string& a, const std::string& b) {
  double x = 0.0, y = 0.0;
  if (parse_double(a, x) && parse_double(b, y)) return x < y;
  return a < b;
}

}  // namespace

PriceSeries parse_prices(std::istream& in) {
  PriceSeries out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    if (!header) {
      if (row != "timestamp,price") throw ParseError(lineno, "expected header \"timestamp,price\"");
      header = true;
      continue;
    }
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) throw ParseError(lineno, "missing price column");
    const std::string ts(trim(row.substr(0, comma)));
    const std::string_view field = trim(row.substr(comma + 1));
    double price = 0.0;
    if (ts.empty()) throw ParseError(lineno, "empty timestamp");
    if (!parse_double(field, price)) throw ParseError(lineno, "malformed price \"" + std::string(field) + "\"");
    if (!std::isfinite(price) || price <= 0.0)
      throw ParseError(lineno, "price must be positive and finite, got " + std::string(field));
    if (!out.timestamps.empty() && before(ts, out.timestamps.back()))
      throw OrderingError(lineno, "timestamp " + ts + " precedes " + out.timestamps.back());
    out.timestamps.push_back(ts);
    out.raw.push_back(price);
  }
  if (out.raw.empty()) throw EmptyInputError("price input has no data rows");
  return out;
}

PriceSeries load_prices(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputFileError("cannot open " + path.string());
  return parse_prices(in);
}

void write_prices(const std::filesystem::path& path, const std::vector<std::string>& timestamps,
                  const std::vector<double>& prices) {
  if (timestamps.size() != prices.size())
    throw std::invalid_argument("timestamp and price columns differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "timestamp,price\n";
  char buf[64];
  for (std::size_t i = 0; i < prices.size(); ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, prices[i]);
    out << timestamps[i] << ',' << std::string_view(buf, ptr - buf) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PriceSeries rescale(PriceSeries series, double lo, double hi, bool clamp) {
  if (!(lo < hi)) throw ConfigError("scale bounds need lo < hi");
  if (series.raw.empty()) throw EmptyInputError("cannot rescale an empty series");
  series.lo = lo;
  series.hi = hi;
  series.scaled.clear();
  series.scaled.reserve(series.raw.size() + 1);
  for (std::size_t i = 0; i < series.raw.size(); ++i) {
    const double r = series.raw[i];
    if (!clamp && (r < lo || r > hi))
      throw RangeError("price " + std::to_string(r) + " at row " + std::to_string(i + 1) +
                       " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    series.scaled.push_back(std::clamp((r - lo) / (hi - lo), 0.0, 1.0));
  }
  series.scaled.insert(series.scaled.begin(), series.scaled.front());
  return series;
}

PriceSeries rescale_auto(PriceSeries series) {
  if (series.raw.empty()) throw EmptyInputError("cannot rescale an empty series");
  const auto [mn, mx] = std::minmax_element(series.raw.begin(), series.raw.end());
  if (!(*mn < *mx)) throw ConfigError("constant series has a degenerate scaling range");
  const double lo = *mn, hi = *mx;
  return rescale(std::move(series), lo, hi);
}

std::vector<std::string> minute_timestamps(std::size_t n) {
  std::tm base{};
  base.tm_year = 2010 - 1900;
  base.tm_mon = 2;
  base.tm_mday = 26;
  base.tm_hour = 10;
  base.tm_min = 31;
  const std::time_t t0 = timegm(&base);
  std::vector<std::string> out;
  out.reserve(n);
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    const std::time_t t = t0 + static_cast<std::time_t>(60 * i);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M", &tm);
    out.emplace_back(buf);
  }
  return out;
}

std::string to_string(MarketKind k) {
  switch (k) {
    case MarketKind::iid_uniform: return "iid-uniform";
    case MarketKind::random_walk: return "random-walk";
    case MarketKind::drift_segments: return "drift-segments";
    case MarketKind::oakes_adversary: return "oakes-adversary";
  }
  return "unknown";
}

MarketKind market_kind_from_string(const std::string& s) {
  for (auto k : {MarketKind::iid_uniform, MarketKind::random_walk, MarketKind::drift_segments,
                 MarketKind::oakes_adversary})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown market kind: " + s);
}

void MarketParams::validate(MarketKind kind) const {
  if (!(start >= 0.0 && start <= 1.0)) throw ConfigError("market start must lie in [0,1]");
  if (kind == MarketKind::random_walk && !(walk_step >= 0.0))
    throw ConfigError("walk step must be >= 0");
  if (kind == MarketKind::drift_segments) {
    if (segment_length == 0) throw ConfigError("segment length must be positive");
    if (!(drift >= 0.0) || !(noise >= 0.0)) throw ConfigError("drift and noise must be >= 0");
    if (!(level_lo >= 0.0 && level_lo < level_hi && level_hi <= 1.0))
      throw ConfigError("level band must satisfy 0 <= lo < hi <= 1");
  }
}

double reflect(double v, double lo, double hi) {
  const double width = hi - lo;
  // Fold into one period of the triangle wave, then mirror the upper half.
  double u = std::fmod(v - lo, 2.0 * width);
  if (u < 0.0) u += 2.0 * width;
  if (u > width) u = 2.0 * width - u;
  return lo + u;
}

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

MarketGenerator::MarketGenerator(MarketKind kind, MarketParams params, std::uint64_t seed)
    : kind_(kind), params_(params), rng_(seed), last_(params.start), level_(params.start) {
  params_.validate(kind);
}

double MarketGenerator::next(double deterministic_forecast) {
  ++step_;
  switch (kind_) {
    case MarketKind::iid_uniform: last_ = uniform01(rng_); break;
    case MarketKind::random_walk:
      last_ = reflect(last_ + params_.walk_step * standard_normal(rng_));
      break;
    case MarketKind::drift_segments: {
      const std::uint64_t segment = (step_ - 1) / params_.segment_length;
      const double dir = segment % 2 == 0 ? 1.0 : -1.0;
      level_ = reflect(level_ + dir * params_.drift, params_.level_lo, params_.level_hi);
      const double noise = params_.noise > 0.0 ? params_.noise * standard_normal(rng_) : 0.0;
      last_ = reflect(level_ + noise);
      break;
    }
    case MarketKind::oakes_adversary: last_ = deterministic_forecast > 0.5 ? 0.0 : 1.0; break;
  }
  return last_;
}

std::vector<double> synth_market(MarketKind kind, const MarketParams& params, std::size_t n,
                                 std::uint64_t seed) {
  if (kind == MarketKind::oakes_adversary)
    throw ConfigError("the Oakes adversary reacts to forecasts; drive it from a game loop");
  MarketGenerator gen(kind, params, seed);
  std::vector<double> out(n);
  for (auto& s : out) s = gen.next();
  return out;
}

}  // namespace calib
