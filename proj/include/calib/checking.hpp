#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "calib/grid.hpp"

namespace calib {

/// Indicator of a subset of [0,1]^{k+1}, evaluated on (forecast, signal).
class CheckingRule {
public:
  using Predicate = std::function<bool(double p, const Vector& x)>;

  CheckingRule(Predicate predicate, std::string description)
      : predicate_(std::move(predicate)), description_(std::move(description)) {}

  bool operator()(double p, const Vector& x) const { return predicate_(p, x); }
  const std::string& description() const { return description_; }

private:
  Predicate predicate_;
  std::string description_;
};

/// p > x_0 + epsilon (strict). Throws std::invalid_argument unless
/// 0 < epsilon < 1.
CheckingRule threshold_rule(double epsilon);

/// Selects every step.
CheckingRule full_interval_rule();

/// Selects steps whose forecast lies in [lo, hi] (or (lo, hi] when
/// `open_below`).
CheckingRule forecast_interval_rule(double lo, double hi, bool open_below = false);

/// Pointwise union of two rules.
CheckingRule either(const CheckingRule& a, const CheckingRule& b);

struct TraceStep {
  double p;
  Vector x;
  double outcome;
  bool selected;
};

/// Per-step (forecast, signal, outcome, selected) records for one rule.
/// The forecasts recorded are whatever the caller checks against: the
/// randomized pair for guarantees, or the deterministic pair in debug runs.
class CalibrationTrace {
public:
  CalibrationTrace() = default;
  explicit CalibrationTrace(CheckingRule rule) : rule_(std::move(rule)) {}

  void record(double p, const Vector& x, double outcome);
  /// Same points, selections recomputed for another rule.
  CalibrationTrace reselect(const CheckingRule& rule) const;

  const std::vector<TraceStep>& steps() const { return steps_; }
  std::size_t size() const { return steps_.size(); }
  std::size_t selections() const;

private:
  CheckingRule rule_ = full_interval_rule();
  std::vector<TraceStep> steps_;
};

enum class Normalization { per_step, per_selection };

struct CalibrationError {
  double value;
  std::size_t selections;
  bool no_selections;
};

/// per_step: (1/n) sum selected_i (S_i - p_i). per_selection divides by the
/// number of selected steps instead, and is 0 with `no_selections` set when
/// nothing was selected. Throws std::invalid_argument on an empty trace.
CalibrationError calibration_error(const CalibrationTrace& trace, Normalization norm);

/// Running form of the per-step error, for error curves.
class CalibrationMeter {
public:
  void add(bool selected, double residual) {
    ++steps_;
    if (selected) {
      ++selections_;
      sum_ += residual;
    }
  }
  double per_step() const { return steps_ ? sum_ / static_cast<double>(steps_) : 0.0; }
  double sum() const { return sum_; }
  std::size_t steps() const { return steps_; }
  std::size_t selections() const { return selections_; }

private:
  double sum_ = 0.0;
  std::size_t steps_ = 0;
  std::size_t selections_ = 0;
};

/// E[I(p~, x~)(S - p~)] = sum_v W_v(q) I(v) (S - v_0) for a deterministic
/// point q rounded on `grid`.
double expected_selected_residual(const ForecastPoint& q, double outcome,
                                  const CheckingRule& rule, const PartitionGrid& grid);

}  // namespace calib
