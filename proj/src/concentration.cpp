#include "calib/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace calib {

namespace {

void check_args(std::uint64_t n, double t) {
  if (n < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(t > 0.0)) throw std::invalid_argument("threshold must be positive");
}

}  // namespace

double azuma_tail(std::uint64_t n, double t) {
  check_args(n, t);
  return std::min(1.0, 2.0 * std::exp(-2.0 * static_cast<double>(n) * t * t));
}

double maximal_tail(std::uint64_t n, double t) {
  check_args(n, t);
  // exp first, then scale: t^-2 can be huge while the exponential underflows.
  return std::min(1.0, std::exp(-2.0 * static_cast<double>(n) * t * t - 2.0 * std::log(t)));
}

double azuma_deviation(std::uint64_t n, double confidence) {
  if (n < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("confidence must lie in (0,1)");
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * static_cast<double>(n)));
}

Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

Vector empirical_tails(const MartingaleSpec& spec, const Vector& thresholds,
                       std::uint64_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  Vector hits = Vector::Zero(thresholds.size());
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    Rng rng = substream(seed, trial);
    const MartingalePath path = spec.generate(rng);
    if (static_cast<std::uint64_t>(path.increments.size()) != spec.n ||
        path.lower.size() != path.increments.size())
      throw std::logic_error("generator produced a path of the wrong length");
    constexpr double slack = 1e-12;
    for (Eigen::Index i = 0; i < path.increments.size(); ++i) {
      const double v = path.increments[i];
      if (v < path.lower[i] - slack || v > path.lower[i] + 1.0 + slack)
        throw std::logic_error("increment " + std::to_string(i) + " = " + std::to_string(v) +
                               " outside its declared unit range");
    }
    const double mean = std::abs(path.increments.sum()) / static_cast<double>(spec.n);
    hits += (thresholds.array() < mean).cast<double>().matrix();
  }
  return hits / static_cast<double>(trials);
}

double empirical_tail(const MartingaleSpec& spec, double t, std::uint64_t trials,
                      std::uint64_t seed) {
  Vector ts(1);
  ts << t;
  return empirical_tails(spec, ts, trials, seed)[0];
}

MartingaleSpec fair_coin_spec(std::uint64_t n) {
  return {n, [n](Rng& rng) {
            MartingalePath path{Vector(n), Vector::Constant(n, -0.5)};
            for (std::uint64_t i = 0; i < n; ++i)
              path.increments[i] = (rng() >> 63) ? 0.5 : -0.5;
            return path;
          }};
}

MartingaleSpec residual_spec(std::vector<double> forecasts, std::vector<Vector> signals,
                             std::vector<double> outcomes, CheckingRule rule,
                             PartitionGrid grid) {
  const std::size_t n = forecasts.size();
  if (signals.size() != n || outcomes.size() != n)
    throw std::invalid_argument("trace columns differ in length");
  // Conditional means and lower bounds do not depend on the draw.
  Vector mean(n), lower(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ForecastPoint q{forecasts[i], signals[i]};
    mean[i] = expected_selected_residual(q, outcomes[i], rule, grid);
    double lo = 0.0;
    Vector x(signals[i].size());
    for (const auto& cw : joint_weights(q, grid)) {
      const double p = grid.endpoint(cw.cell[0]);
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = grid.endpoint(cw.cell[j + 1]);
      lo = std::min(lo, rule(p, x) ? outcomes[i] - p : 0.0);
    }
    lower[i] = lo - mean[i];
  }
  return {n, [=](Rng& rng) {
            MartingalePath path{Vector(n), lower};
            for (std::size_t i = 0; i < n; ++i) {
              const RandomizedPoint r = randomize_point(forecasts[i], signals[i], grid, rng);
              const double v = rule(r.p, r.x) ? outcomes[i] - r.p : 0.0;
              path.increments[i] = v - mean[i];
            }
            return path;
          }};
}

double calibration_bound(std::uint64_t n, double delta, int signal_dim, double confidence) {
  return delta + azuma_deviation(n, confidence) +
         std::sqrt(1.0 / (static_cast<double>(n) * std::pow(delta, signal_dim + 1)));
}

double binomial_se(double prob, std::uint64_t trials) {
  return std::sqrt(std::clamp(prob, 0.0, 1.0) * (1.0 - std::clamp(prob, 0.0, 1.0)) /
                   static_cast<double>(trials));
}

}  // namespace calib
