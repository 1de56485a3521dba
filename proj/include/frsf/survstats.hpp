#pragma once

#include <span>
#include <vector>

namespace frsf {

/// Distinct event times with event and at-risk counts. Counts are doubles so
/// bootstrap multiplicities can be carried as weights; they stay integral.
struct RiskTable {
  std::vector<double> event_times;
  std::vector<double> d;
  std::vector<double> r;
  double n = 0.0;  // total (weighted) sample size

  std::size_t size() const { return event_times.size(); }
};

/// Right-continuous step function: left_value before knots[0], values[k] on
/// [knots[k], knots[k+1]).
struct StepFunction {
  std::vector<double> knots;
  std::vector<double> values;
  double left_value = 0.0;

  double evaluate(double t) const;
  /// Limit from the left, f(t-).
  double left_limit(double t) const;
};

struct SurvPoint {
  double time = 0.0;
  bool event = false;
  double weight = 1.0;
};

/// Subjects censored at an event time are at risk at that time.
RiskTable risk_table(std::span<const double> times, const std::vector<bool>& events);
RiskTable risk_table(std::span<const SurvPoint> points);

StepFunction kaplan_meier(const RiskTable& rt);
StepFunction nelson_aalen(const RiskTable& rt);

/// Standardized two-sample log-rank statistic |L| over the pooled distinct
/// event times. Terms with r_l = 1 contribute no variance. Returns 0 when the
/// variance sum is 0.
double logrank_stat(std::span<const SurvPoint> left, std::span<const SurvPoint> right);

/// Same statistic for a pooled sample sorted by ascending time, with group
/// membership given per point (nonzero = left). Used by split search.
double logrank_stat_sorted(std::span<const SurvPoint> sorted, std::span<const char> in_left);

}  // namespace frsf
