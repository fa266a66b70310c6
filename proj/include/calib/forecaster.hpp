#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "calib/grid.hpp"

namespace calib {

using Rng = std::mt19937_64;

/// Uniform double in [0,1) built from the top 53 bits of one draw, so the
/// stream is identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Observation {
  Vector x;
  double outcome;
};

/// Online calibrated forecaster with signal-dependent cells.
///
/// In grid mode the state is the family of accumulators
///   mu(v) = sum_i W_v(Q_i) (S_i - p_i)
/// over cells v of V^{k+1}. They are stored sparsely over signal cells
/// (only cells ever touched exist) and densely along the forecast axis,
/// so the score for a fixed signal is an Eigen combination of at most
/// 2^k rows. In cosine mode only the two trigonometric moments of the
/// residuals are kept.
///
/// The forecaster keeps the full (signal, outcome) history so that it can
/// be replayed on a finer grid when an epoch ends.
class Forecaster {
public:
  Forecaster(PartitionGrid grid, int signal_dim, KernelMode mode = KernelMode::grid);

  const PartitionGrid& grid() const { return grid_; }
  int signal_dim() const { return dim_; }
  KernelMode mode() const { return mode_; }
  std::size_t step() const { return forecasts_.size(); }
  int epoch() const { return epoch_; }
  void set_epoch(int s) { epoch_ = s; }

  /// sum_v W_v(p, x) mu(v), or A cos(pi p) + B sin(pi p) in cosine mode.
  double score(double p, const Vector& x) const;

  /// Deterministic forecast: the leftmost root of the score in p, with the
  /// boundary rule (1 if strictly positive everywhere, 0 if strictly
  /// negative). Returns 1/2 before the first update.
  double solve(const Vector& x) const;

  /// Folds in the outcome for the forecast `p` just issued at signal `x`.
  void update(double p, const Vector& x, double outcome);

  /// Values of the score at every grid endpoint for signal x (grid mode).
  Vector profile(const Vector& x) const;

  /// mu(v) for a cell of V^{k+1}; zero for untouched cells.
  double accumulator(const CellIndex& cell) const;

  /// sum_v mu(v)^2 (grid mode; 0 in cosine mode).
  double energy() const;

  double cosine_moment() const { return cos_sum_; }
  double sine_moment() const { return sin_sum_; }

  const std::vector<Observation>& history() const { return history_; }
  const std::vector<double>& forecasts() const { return forecasts_; }

private:
  std::uint64_t signal_key(const CellIndex& signal_cell) const;
  void check_signal(const Vector& x) const;

  PartitionGrid grid_;
  int dim_;
  KernelMode mode_;
  std::map<std::uint64_t, Vector> mu_;
  double cos_sum_ = 0.0;
  double sin_sum_ = 0.0;
  std::vector<Observation> history_;
  std::vector<double> forecasts_;
  int epoch_ = 1;
};

/// Fresh forecaster on `grid` that has replayed the whole stored history of
/// `state`, recomputing its own deterministic forecasts. No randomness is
/// involved, so replay on the same grid reproduces the original forecasts
/// bit for bit.
Forecaster replay(const Forecaster& state, const PartitionGrid& grid);

/// Randomized forecast and signal: independent rounding of every coordinate
/// onto the grid. Consumes exactly 1 + k draws, forecast first, then signal
/// coordinates in index order.
struct RandomizedPoint {
  double p;
  Vector x;
};

RandomizedPoint randomize_point(double p, const Vector& x, const PartitionGrid& grid, Rng& rng);

/// Variance of the rounded value: w_lower * w_upper * delta^2.
double rounding_variance(double value, const PartitionGrid& grid);

/// n_s = s^M and delta_s = s^(-M/4).
class EpochSchedule {
public:
  explicit EpochSchedule(int exponent);

  int exponent() const { return exponent_; }
  double horizon(int s) const;
  double step(int s) const;
  /// Grid of epoch s. When M is not a multiple of 4 the step s^(-M/4) is
  /// not of the form 1/K, and the grid uses K = ceil(s^(M/4)).
  PartitionGrid grid(int s) const;
  /// First step of epoch s, saturating at UINT64_MAX.
  std::uint64_t start(int s) const;
  /// Epoch containing step n (n >= 1).
  int epoch_at(std::uint64_t n) const;

private:
  int exponent_;
};

enum class ScheduleConstraint { ratio, minimum_point, summability };

std::string to_string(ScheduleConstraint c);

struct ScheduleViolation {
  int s;
  ScheduleConstraint constraint;
  double lhs;
  double rhs;
};

/// Checks for s = 2..s_max:
///   ratio:         delta_s <= delta_{s-1} (1 - 1/(s+1))
///   minimum_point: n_s >= ((k+1)/2)^2 delta_s^-(k+3)
///   summability:   n_s >= (ln s + 2 ln ln s - 2 ln delta_s) / (2 delta_s^2)
std::vector<ScheduleViolation> validate_schedule(int exponent, int signal_dim, int s_max);

/// Replays `state` on the grid of the next epoch and bumps its epoch index.
Forecaster advance_epoch(const Forecaster& state, const EpochSchedule& schedule);

}  // namespace calib
