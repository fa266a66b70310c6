#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace calib {

using Vector = Eigen::VectorXd;

/// Uniform partition of [0,1] into K cells of length 1/K. Endpoints are
/// v_i = i/K for i = 0..K.
class PartitionGrid {
public:
  explicit PartitionGrid(int cells);

  /// Grid whose step is `delta`; 1/delta must be an integer (within 1e-9).
  static PartitionGrid from_step(double delta);

  int cells() const { return cells_; }
  double step() const { return 1.0 / cells_; }
  double endpoint(int i) const { return static_cast<double>(i) / cells_; }
  Vector endpoints() const;

  friend bool operator==(const PartitionGrid&, const PartitionGrid&) = default;

private:
  int cells_;
};

/// Randomized-rounding distribution of one coordinate onto its two
/// bracketing grid endpoints. On-grid values have lower == upper and
/// upper_weight == 0.
struct WeightPair {
  int lower = 0;
  int upper = 0;
  double lower_weight = 1.0;
  double upper_weight = 0.0;

  double lower_endpoint(const PartitionGrid& g) const { return g.endpoint(lower); }
  double upper_endpoint(const PartitionGrid& g) const { return g.endpoint(upper); }
  bool on_grid() const { return upper_weight == 0.0; }
};

/// Throws std::domain_error when value is outside [0,1] or NaN.
WeightPair rounding_weights(double value, const PartitionGrid& grid);

/// A point (p, x) of [0,1]^{k+1}: the forecast and the k signal coordinates.
struct ForecastPoint {
  double p = 0.5;
  Vector x;

  int dim() const { return static_cast<int>(x.size()); }
};

/// Multi-index of a cell of V^{k+1}; entry 0 is the forecast axis.
using CellIndex = std::vector<int>;

struct CellWeight {
  CellIndex cell;
  double weight;
};

/// Product distribution W_v(q) over V^{k+1}. Only nonzero entries are
/// returned (at most 2^{k+1}), ordered by the lexicographic choice of
/// lower/upper per coordinate.
std::vector<CellWeight> joint_weights(const ForecastPoint& q, const PartitionGrid& grid);

/// Rounding distribution of the signal vector alone, over V^k.
std::vector<CellWeight> signal_weights(const Vector& x, const PartitionGrid& grid);

enum class KernelMode { grid, cosine };

/// grid: dot product of the two rounding distributions.
/// cosine: cos(pi (p - p')); signal coordinates are ignored.
double kernel_eval(const ForecastPoint& a, const ForecastPoint& b, const PartitionGrid& grid,
                   KernelMode mode);

}  // namespace calib
