#include "calib/grid.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

namespace calib {

PartitionGrid::PartitionGrid(int cells) : cells_(cells) {
  if (cells < 1) throw std::invalid_argument("grid needs at least one cell");
}

PartitionGrid PartitionGrid::from_step(double delta) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("grid step must lie in (0,1], got " + std::to_string(delta));
  const double k = 1.0 / delta;
  const double rounded = std::round(k);
  if (std::abs(k - rounded) > 1e-9 * rounded)
    throw std::invalid_argument("grid step must be 1/K for an integer K, got " +
                                std::to_string(delta));
  return PartitionGrid(static_cast<int>(rounded));
}

Vector PartitionGrid::endpoints() const {
  return Vector::LinSpaced(cells_ + 1, 0, cells_) / static_cast<double>(cells_);
}

WeightPair rounding_weights(double value, const PartitionGrid& grid) {
  if (!(value >= 0.0 && value <= 1.0))
    throw std::domain_error("value outside [0,1]: " + std::to_string(value));
  const int k = grid.cells();
  const double t = value * k;
  const double lo = std::floor(t);
  if (lo >= k) return {k, k, 1.0, 0.0};
  const int i = static_cast<int>(lo);
  const double frac = t - lo;
  if (frac == 0.0) return {i, i, 1.0, 0.0};
  return {i, i + 1, 1.0 - frac, frac};
}

namespace {

// Expands per-coordinate weight pairs into their product distribution.
std::vector<CellWeight> product(const std::vector<WeightPair>& pairs) {
  std::vector<CellWeight> out{{CellIndex{}, 1.0}};
  out.front().cell.reserve(pairs.size());
  for (const auto& wp : pairs) {
    std::vector<CellWeight> next;
    next.reserve(out.size() * 2);
    for (const auto& cw : out) {
      CellWeight a = cw;
      a.cell.push_back(wp.lower);
      a.weight *= wp.lower_weight;
      next.push_back(std::move(a));
      if (!wp.on_grid()) {
        CellWeight b = cw;
        b.cell.push_back(wp.upper);
        b.weight *= wp.upper_weight;
        next.push_back(std::move(b));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

std::vector<CellWeight> signal_weights(const Vector& x, const PartitionGrid& grid) {
  std::vector<WeightPair> pairs;
  pairs.reserve(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) pairs.push_back(rounding_weights(x[j], grid));
  return product(pairs);
}

std::vector<CellWeight> joint_weights(const ForecastPoint& q, const PartitionGrid& grid) {
  std::vector<WeightPair> pairs;
  pairs.reserve(q.x.size() + 1);
  pairs.push_back(rounding_weights(q.p, grid));
  for (Eigen::Index j = 0; j < q.x.size(); ++j) pairs.push_back(rounding_weights(q.x[j], grid));
  return product(pairs);
}

double kernel_eval(const ForecastPoint& a, const ForecastPoint& b, const PartitionGrid& grid,
                   KernelMode mode) {
  if (mode == KernelMode::cosine) return std::cos(std::numbers::pi * (a.p - b.p));
  if (a.dim() != b.dim()) throw std::invalid_argument("kernel arguments differ in dimension");
  // Summing over the sorted intersection makes the result exactly symmetric.
  std::map<CellIndex, double> wa, wb;
  for (auto& cw : joint_weights(a, grid)) wa[cw.cell] += cw.weight;
  for (auto& cw : joint_weights(b, grid)) wb[cw.cell] += cw.weight;
  double dot = 0.0;
  for (const auto& [cell, w] : wa) {
    if (auto it = wb.find(cell); it != wb.end()) dot += w * it->second;
  }
  return dot;
}

}  // namespace calib
