#include "calib/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace calib {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t ipow_saturating(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > std::numeric_limits<std::uint64_t>::max() / base)
      return std::numeric_limits<std::uint64_t>::max();
    r *= base;
  }
  return r;
}

}  // namespace

Forecaster::Forecaster(PartitionGrid grid, int signal_dim, KernelMode mode)
    : grid_(grid), dim_(signal_dim), mode_(mode) {
  if (signal_dim < 0) throw std::invalid_argument("negative signal dimension");
  // Signal cells are packed base K+1 into a 64-bit key.
  double cells = std::pow(static_cast<double>(grid_.cells() + 1), signal_dim);
  if (cells > 0x1.0p62) throw std::invalid_argument("signal grid too large for cell keys");
}

std::uint64_t Forecaster::signal_key(const CellIndex& signal_cell) const {
  std::uint64_t key = 0;
  const auto base = static_cast<std::uint64_t>(grid_.cells() + 1);
  for (auto it = signal_cell.rbegin(); it != signal_cell.rend(); ++it)
    key = key * base + static_cast<std::uint64_t>(*it);
  return key;
}

void Forecaster::check_signal(const Vector& x) const {
  if (x.size() != dim_)
    throw std::invalid_argument("signal has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(dim_));
}

double Forecaster::score(double p, const Vector& x) const {
  check_signal(x);
  if (mode_ == KernelMode::cosine) return cos_sum_ * std::cos(kPi * p) + sin_sum_ * std::sin(kPi * p);
  const WeightPair wp = rounding_weights(p, grid_);
  double s = 0.0;
  for (const auto& cw : signal_weights(x, grid_)) {
    auto it = mu_.find(signal_key(cw.cell));
    if (it == mu_.end()) continue;
    const Vector& row = it->second;
    double along = wp.lower_weight * row[wp.lower];
    if (!wp.on_grid()) along += wp.upper_weight * row[wp.upper];
    s += cw.weight * along;
  }
  return s;
}

Vector Forecaster::profile(const Vector& x) const {
  check_signal(x);
  Vector m = Vector::Zero(grid_.cells() + 1);
  if (mode_ == KernelMode::cosine) {
    for (int j = 0; j <= grid_.cells(); ++j) m[j] = score(grid_.endpoint(j), x);
    return m;
  }
  for (const auto& cw : signal_weights(x, grid_)) {
    if (auto it = mu_.find(signal_key(cw.cell)); it != mu_.end()) m += cw.weight * it->second;
  }
  return m;
}

double Forecaster::solve(const Vector& x) const {
  check_signal(x);
  if (step() == 0) return 0.5;

  if (mode_ == KernelMode::cosine) {
    // A cos(pi p) + B sin(pi p) = R cos(pi p - phi) vanishes at
    // p = phi/pi + 1/2 (mod 1); on [0,1] the leftmost zero is that value
    // reduced into [0,1).
    if (cos_sum_ == 0.0 && sin_sum_ == 0.0) return 0.5;
    double p = std::atan2(sin_sum_, cos_sum_) / kPi + 0.5;
    p -= std::floor(p);
    return p >= 1.0 ? 0.0 : p;
  }

  // Piecewise linear in p with breakpoints at the grid endpoints.
  const Vector m = profile(x);
  const int k = grid_.cells();
  if (m[0] == 0.0) return 0.0;
  for (int j = 0; j < k; ++j) {
    const double a = m[j];
    const double b = m[j + 1];
    if (b == 0.0) return grid_.endpoint(j + 1);
    if ((a > 0.0) != (b > 0.0)) {
      const double p = (j + a / (a - b)) / k;
      return std::clamp(p, grid_.endpoint(j), grid_.endpoint(j + 1));
    }
  }
  return m[0] > 0.0 ? 1.0 : 0.0;
}

void Forecaster::update(double p, const Vector& x, double outcome) {
  check_signal(x);
  if (!(outcome >= 0.0 && outcome <= 1.0))
    throw std::domain_error("outcome outside [0,1]: " + std::to_string(outcome));
  const double r = outcome - p;
  if (mode_ == KernelMode::cosine) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("forecast outside [0,1]");
    cos_sum_ += r * std::cos(kPi * p);
    sin_sum_ += r * std::sin(kPi * p);
  } else {
    const WeightPair wp = rounding_weights(p, grid_);
    for (const auto& cw : signal_weights(x, grid_)) {
      auto [it, inserted] = mu_.try_emplace(signal_key(cw.cell));
      if (inserted) it->second = Vector::Zero(grid_.cells() + 1);
      Vector& row = it->second;
      row[wp.lower] += cw.weight * wp.lower_weight * r;
      if (!wp.on_grid()) row[wp.upper] += cw.weight * wp.upper_weight * r;
    }
  }
  history_.push_back({x, outcome});
  forecasts_.push_back(p);
}

double Forecaster::accumulator(const CellIndex& cell) const {
  if (static_cast<int>(cell.size()) != dim_ + 1)
    throw std::invalid_argument("cell index has wrong dimension");
  const CellIndex signal(cell.begin() + 1, cell.end());
  auto it = mu_.find(signal_key(signal));
  return it == mu_.end() ? 0.0 : it->second[cell.front()];
}

double Forecaster::energy() const {
  double e = 0.0;
  for (const auto& [key, row] : mu_) e += row.squaredNorm();
  return e;
}

Forecaster replay(const Forecaster& state, const PartitionGrid& grid) {
  Forecaster fresh(grid, state.signal_dim(), state.mode());
  fresh.set_epoch(state.epoch());
  for (const auto& obs : state.history()) {
    const double p = fresh.solve(obs.x);
    fresh.update(p, obs.x, obs.outcome);
  }
  return fresh;
}

RandomizedPoint randomize_point(double p, const Vector& x, const PartitionGrid& grid, Rng& rng) {
  auto draw = [&](double value) {
    const WeightPair wp = rounding_weights(value, grid);
    const double u = uniform01(rng);
    return grid.endpoint(u < wp.upper_weight ? wp.upper : wp.lower);
  };
  RandomizedPoint out{draw(p), Vector(x.size())};
  for (Eigen::Index j = 0; j < x.size(); ++j) out.x[j] = draw(x[j]);
  return out;
}

double rounding_variance(double value, const PartitionGrid& grid) {
  const WeightPair wp = rounding_weights(value, grid);
  return wp.lower_weight * wp.upper_weight * grid.step() * grid.step();
}

EpochSchedule::EpochSchedule(int exponent) : exponent_(exponent) {
  if (exponent < 1) throw std::invalid_argument("schedule exponent M must be >= 1");
}

double EpochSchedule::horizon(int s) const { return std::pow(static_cast<double>(s), exponent_); }

double EpochSchedule::step(int s) const {
  return std::pow(static_cast<double>(s), -exponent_ / 4.0);
}

PartitionGrid EpochSchedule::grid(int s) const {
  if (s < 1) throw std::invalid_argument("epoch index starts at 1");
  if (exponent_ % 4 == 0) {
    const std::uint64_t k = ipow_saturating(static_cast<std::uint64_t>(s), exponent_ / 4);
    if (k > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
      throw std::overflow_error("epoch grid too fine");
    return PartitionGrid(static_cast<int>(k));
  }
  const double k = std::ceil(std::pow(static_cast<double>(s), exponent_ / 4.0) - 1e-9);
  if (k > std::numeric_limits<int>::max()) throw std::overflow_error("epoch grid too fine");
  return PartitionGrid(static_cast<int>(k));
}

std::uint64_t EpochSchedule::start(int s) const {
  return ipow_saturating(static_cast<std::uint64_t>(s), exponent_);
}

int EpochSchedule::epoch_at(std::uint64_t n) const {
  if (n < 1) throw std::invalid_argument("steps are numbered from 1");
  int s = 1;
  while (start(s + 1) <= n) ++s;
  return s;
}

std::string to_string(ScheduleConstraint c) {
  switch (c) {
    case ScheduleConstraint::ratio: return "ratio";
    case ScheduleConstraint::minimum_point: return "minimum-point";
    case ScheduleConstraint::summability: return "summability";
  }
  return "unknown";
}

std::vector<ScheduleViolation> validate_schedule(int exponent, int signal_dim, int s_max) {
  if (exponent < 1) throw std::invalid_argument("schedule exponent M must be >= 1");
  if (s_max < 2) throw std::invalid_argument("s_max must be >= 2");
  if (signal_dim < 0) throw std::invalid_argument("negative signal dimension");
  const EpochSchedule sched(exponent);
  constexpr double slack = 1e-12;
  const double k = signal_dim;
  std::vector<ScheduleViolation> out;
  for (int s = 2; s <= s_max; ++s) {
    const double d = sched.step(s);
    const double n = sched.horizon(s);

    const double ratio_rhs = sched.step(s - 1) * (1.0 - 1.0 / (s + 1));
    if (d > ratio_rhs * (1.0 + slack)) out.push_back({s, ScheduleConstraint::ratio, d, ratio_rhs});

    const double coef = (k + 1.0) / 2.0;
    const double min_rhs = coef * coef * std::pow(d, -(k + 3.0));
    if (n < min_rhs * (1.0 - slack))
      out.push_back({s, ScheduleConstraint::minimum_point, n, min_rhs});

    const double ls = std::log(static_cast<double>(s));
    const double bc_rhs = (ls + 2.0 * std::log(ls) - 2.0 * std::log(d)) / (2.0 * d * d);
    if (n < bc_rhs * (1.0 - slack)) out.push_back({s, ScheduleConstraint::summability, n, bc_rhs});
  }
  return out;
}

Forecaster advance_epoch(const Forecaster& state, const EpochSchedule& schedule) {
  Forecaster next = replay(state, schedule.grid(state.epoch() + 1));
  next.set_epoch(state.epoch() + 1);
  return next;
}

}  // namespace calib
