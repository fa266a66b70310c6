#include "calib/checking.hpp"

#include <stdexcept>

namespace calib {

CheckingRule threshold_rule(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("threshold epsilon must lie in (0,1), got " +
                                std::to_string(epsilon));
  return {[epsilon](double p, const Vector& x) { return p > x[0] + epsilon; },
          "p > x + " + std::to_string(epsilon)};
}

CheckingRule full_interval_rule() {
  return {[](double, const Vector&) { return true; }, "all"};
}

CheckingRule forecast_interval_rule(double lo, double hi, bool open_below) {
  return {[=](double p, const Vector&) { return (open_below ? p > lo : p >= lo) && p <= hi; },
          std::string(open_below ? "(" : "[") + std::to_string(lo) + ", " + std::to_string(hi) +
              "]"};
}

CheckingRule either(const CheckingRule& a, const CheckingRule& b) {
  return {[a, b](double p, const Vector& x) { return a(p, x) || b(p, x); },
          a.description() + " | " + b.description()};
}

void CalibrationTrace::record(double p, const Vector& x, double outcome) {
  steps_.push_back({p, x, outcome, rule_(p, x)});
}

CalibrationTrace CalibrationTrace::reselect(const CheckingRule& rule) const {
  CalibrationTrace out(rule);
  out.steps_.reserve(steps_.size());
  for (const auto& s : steps_) out.record(s.p, s.x, s.outcome);
  return out;
}

std::size_t CalibrationTrace::selections() const {
  std::size_t n = 0;
  for (const auto& s : steps_) n += s.selected;
  return n;
}

CalibrationError calibration_error(const CalibrationTrace& trace, Normalization norm) {
  if (trace.size() == 0) throw std::invalid_argument("calibration error of an empty trace");
  double sum = 0.0;
  std::size_t selected = 0;
  for (const auto& s : trace.steps()) {
    if (!s.selected) continue;
    sum += s.outcome - s.p;
    ++selected;
  }
  if (norm == Normalization::per_step)
    return {sum / static_cast<double>(trace.size()), selected, selected == 0};
  if (selected == 0) return {0.0, 0, true};
  return {sum / static_cast<double>(selected), selected, false};
}

double expected_selected_residual(const ForecastPoint& q, double outcome,
                                  const CheckingRule& rule, const PartitionGrid& grid) {
  double e = 0.0;
  Vector x(q.x.size());
  for (const auto& cw : joint_weights(q, grid)) {
    const double p = grid.endpoint(cw.cell[0]);
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = grid.endpoint(cw.cell[j + 1]);
    if (rule(p, x)) e += cw.weight * (outcome - p);
  }
  return e;
}

}  // namespace calib
