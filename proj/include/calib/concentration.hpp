#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "calib/checking.hpp"
#include "calib/forecaster.hpp"

namespace calib {

/// P{|S_n/n| > t} <= 2 exp(-2 n t^2), capped at 1.
double azuma_tail(std::uint64_t n, double t);

/// P{sup_{m>=n} |S_m/m| > t} <= t^-2 exp(-2 n t^2), capped at 1.
double maximal_tail(std::uint64_t n, double t);

/// Smallest t with 2 exp(-2 n t^2) <= 1 - confidence.
double azuma_deviation(std::uint64_t n, double confidence);

/// One simulated martingale-difference path. Increment i must lie in
/// [lower[i], lower[i] + 1].
struct MartingalePath {
  Vector increments;
  Vector lower;
};

/// Horizon plus a seeded path generator. The generator must produce
/// conditionally mean-zero increments; the range contract is checked by
/// empirical_tail.
struct MartingaleSpec {
  std::uint64_t n;
  std::function<MartingalePath(Rng&)> generate;
};

/// Fraction of `trials` simulated paths with |S_n/n| > t. Trial i draws
/// from its own stream seeded with (seed, i). Throws std::logic_error when
/// a path breaks the increment range contract.
double empirical_tail(const MartingaleSpec& spec, double t, std::uint64_t trials,
                      std::uint64_t seed);

/// Frequencies for several thresholds from one set of trials.
Vector empirical_tails(const MartingaleSpec& spec, const Vector& thresholds,
                       std::uint64_t trials, std::uint64_t seed);

/// Fair +-1/2 coin increments.
MartingaleSpec fair_coin_spec(std::uint64_t n);

/// Martingale differences V_i = I(p~_i, x~_i)(S_i - p~_i) - E_i harvested
/// from a deterministic forecast trace: each trial redraws the rounding of
/// every (p_i, x_i) on `grid`, and E_i is the exact conditional mean over
/// the rounding support. The declared lower bound of V_i is the smallest
/// support value minus E_i.
MartingaleSpec residual_spec(std::vector<double> forecasts, std::vector<Vector> signals,
                             std::vector<double> outcomes, CheckingRule rule,
                             PartitionGrid grid);

/// Per-step calibration error bound at horizon n for a fixed grid:
/// delta + azuma_deviation(n, confidence) + sqrt(1 / (n delta^(k+1))).
double calibration_bound(std::uint64_t n, double delta, int signal_dim, double confidence);

/// Binomial standard error of a frequency with probability `prob`.
double binomial_se(double prob, std::uint64_t trials);

/// Seeds a stream from a run seed plus substream indices.
Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace calib
