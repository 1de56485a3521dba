#include "frsf/survstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frsf/error.hpp"

namespace frsf {

double StepFunction::evaluate(double t) const {
  const auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return left_value;
  return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  const auto it = std::lower_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return left_value;
  return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

RiskTable risk_table(std::span<const double> times, const std::vector<bool>& events) {
  if (times.size() != events.size()) {
    throw Error(ErrorKind::dimension, "times and events must have equal length");
  }
  std::vector<SurvPoint> points(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) points[i] = {times[i], events[i], 1.0};
  return risk_table(points);
}

RiskTable risk_table(std::span<const SurvPoint> points) {
  if (points.empty()) throw Error(ErrorKind::empty_sample, "risk table needs at least one subject");
  for (const auto& p : points) {
    if (!std::isfinite(p.time)) throw Error(ErrorKind::input, "survival time must be finite");
    if (!(p.weight >= 0.0)) throw Error(ErrorKind::input, "weights must be nonnegative");
  }
  std::vector<SurvPoint> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SurvPoint& x, const SurvPoint& y) { return x.time < y.time; });
  RiskTable rt;
  double at_risk = 0.0;
  for (const auto& p : sorted) at_risk += p.weight;
  rt.n = at_risk;
  std::size_t k = 0;
  while (k < sorted.size()) {
    const double t = sorted[k].time;
    double deaths = 0.0, leaving = 0.0;
    for (; k < sorted.size() && sorted[k].time == t; ++k) {
      leaving += sorted[k].weight;
      if (sorted[k].event) deaths += sorted[k].weight;
    }
    if (deaths > 0.0) {
      rt.event_times.push_back(t);
      rt.d.push_back(deaths);
      rt.r.push_back(at_risk);
    }
    at_risk -= leaving;
  }
  return rt;
}

StepFunction kaplan_meier(const RiskTable& rt) {
  StepFunction f;
  f.left_value = 1.0;
  f.knots = rt.event_times;
  f.values.resize(rt.size());
  double s = 1.0;
  for (std::size_t l = 0; l < rt.size(); ++l) {
    s *= 1.0 - rt.d[l] / rt.r[l];
    f.values[l] = s;
  }
  return f;
}

StepFunction nelson_aalen(const RiskTable& rt) {
  StepFunction f;
  f.left_value = 0.0;
  f.knots = rt.event_times;
  f.values.resize(rt.size());
  double h = 0.0;
  for (std::size_t l = 0; l < rt.size(); ++l) {
    h += rt.d[l] / rt.r[l];
    f.values[l] = h;
  }
  return f;
}

double logrank_stat_sorted(std::span<const SurvPoint> sorted, std::span<const char> in_left) {
  if (sorted.size() != in_left.size()) {
    throw Error(ErrorKind::dimension, "group flags must match the sample");
  }
  double r = 0.0, r1 = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    r += sorted[i].weight;
    if (in_left[i]) r1 += sorted[i].weight;
  }
  if (r1 <= 0.0 || r1 >= r) throw Error(ErrorKind::degenerate_split, "log-rank split leaves a group empty");
  double numerator = 0.0, variance = 0.0;
  std::size_t k = 0;
  while (k < sorted.size()) {
    const double t = sorted[k].time;
    double d = 0.0, d1 = 0.0, leave = 0.0, leave1 = 0.0;
    for (; k < sorted.size() && sorted[k].time == t; ++k) {
      const double w = sorted[k].weight;
      leave += w;
      if (in_left[k]) leave1 += w;
      if (sorted[k].event) {
        d += w;
        if (in_left[k]) d1 += w;
      }
    }
    if (d > 0.0) {
      numerator += d1 - r1 * d / r;
      if (r > 1.0) {
        const double frac = r1 / r;
        variance += frac * (1.0 - frac) * ((r - d) / (r - 1.0)) * d;
      }
    }
    r -= leave;
    r1 -= leave1;
  }
  if (!(variance > 0.0)) return 0.0;
  return std::abs(numerator) / std::sqrt(variance);
}

double logrank_stat(std::span<const SurvPoint> left, std::span<const SurvPoint> right) {
  if (left.empty() || right.empty()) {
    throw Error(ErrorKind::degenerate_split, "log-rank split leaves a group empty");
  }
  std::vector<SurvPoint> pooled;
  std::vector<char> flag;
  pooled.reserve(left.size() + right.size());
  pooled.insert(pooled.end(), left.begin(), left.end());
  pooled.insert(pooled.end(), right.begin(), right.end());
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return pooled[x].time < pooled[y].time; });
  std::vector<SurvPoint> sorted(pooled.size());
  flag.resize(pooled.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted[k] = pooled[order[k]];
    flag[k] = order[k] < left.size() ? 1 : 0;
  }
  return logrank_stat_sorted(sorted, flag);
}

}  // namespace frsf
