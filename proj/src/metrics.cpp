#include "frsf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frsf/error.hpp"

namespace frsf {

Concordance concordance_index(std::span<const double> mortality, std::span<const double> times,
                              const std::vector<bool>& events) {
  const std::size_t n = times.size();
  if (mortality.size() != n || events.size() != n) {
    throw Error(ErrorKind::dimension, "mortality, times and events must align");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(mortality[i]) || !std::isfinite(times[i])) {
      throw Error(ErrorKind::input, "concordance inputs must be finite");
    }
  }
  std::vector<double> levels(mortality.begin(), mortality.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), mortality[i]) - levels.begin());
  }
  // Fenwick tree over mortality ranks of subjects with strictly later times.
  std::vector<std::int64_t> fenwick(levels.size() + 1, 0);
  auto add = [&](std::size_t r) {
    for (std::size_t k = r + 1; k < fenwick.size(); k += k & (~k + 1)) ++fenwick[k];
  };
  auto below = [&](std::size_t r) {  // count with rank < r
    std::int64_t s = 0;
    for (std::size_t k = r; k > 0; k -= k & (~k + 1)) s += fenwick[k];
    return s;
  };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

  Concordance out;
  std::int64_t inserted = 0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t end = k;
    while (end < n && times[order[end]] == times[order[k]]) ++end;
    for (std::size_t g = k; g < end; ++g) {
      const std::size_t i = order[g];
      if (!events[i]) continue;
      const std::int64_t less = below(rank[i]);
      const std::int64_t equal = below(rank[i] + 1) - less;
      out.n_pairs += inserted;
      out.twice_concordant += 2 * less + equal;
    }
    for (std::size_t g = k; g < end; ++g) add(rank[order[g]]);
    inserted += static_cast<std::int64_t>(end - k);
    k = end;
  }
  if (out.n_pairs == 0) throw Error(ErrorKind::undefined_concordance, "no comparable pairs");
  out.c = static_cast<double>(out.twice_concordant) / (2.0 * static_cast<double>(out.n_pairs));
  return out;
}

StepFunction censoring_km(std::span<const double> times, const std::vector<bool>& events) {
  std::vector<bool> flipped(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) flipped[i] = !events[i];
  return kaplan_meier(risk_table(times, flipped));
}

double brier_score(std::span<const double> surv, double t, std::span<const double> times,
                   const std::vector<bool>& events, const StepFunction& censor_km) {
  const std::size_t n = times.size();
  if (surv.size() != n || events.size() != n) {
    throw Error(ErrorKind::dimension, "predictions, times and events must align");
  }
  if (n == 0) throw Error(ErrorKind::empty_sample, "Brier score needs at least one subject");
  const double g_t = censor_km.evaluate(t);
  if (!(g_t > 0.0)) {
    throw Error(ErrorKind::evaluability, "censoring survival is zero at t = " + std::to_string(t));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (times[i] > t) {
      const double r = 1.0 - surv[i];
      sum += r * r / g_t;
    } else if (events[i]) {
      const double g = censor_km.left_limit(times[i]);
      if (!(g > 0.0)) {
        throw Error(ErrorKind::evaluability, "censoring survival is zero before an event time");
      }
      sum += surv[i] * surv[i] / g;
    }
  }
  return sum / static_cast<double>(n);
}

double crps(std::span<const BrierPoint> curve, double t_max) {
  if (!(t_max > 0.0)) throw Error(ErrorKind::parameter, "t_max must be > 0");
  if (curve.empty()) throw Error(ErrorKind::empty_sample, "Brier curve is empty");
  double area = 0.0;
  double prev_t = 0.0;
  double prev_bs = curve.front().bs;
  for (const auto& p : curve) {
    if (p.t < prev_t) throw Error(ErrorKind::input, "Brier curve times must be ordered and >= 0");
    const double t = std::min(p.t, t_max);
    area += 0.5 * (prev_bs + p.bs) * (t - prev_t);
    prev_t = t;
    prev_bs = p.bs;
  }
  area += prev_bs * (t_max - prev_t);
  return area / t_max;
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::empty_sample, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> brier_eval_times(std::span<const double> times, const std::vector<bool>& events,
                                     double quantile) {
  const double cap = sample_quantile(std::vector<double>(times.begin(), times.end()), quantile);
  std::vector<double> out;
  for (double t : risk_table(times, events).event_times) {
    if (t <= cap) out.push_back(t);
  }
  return out;
}

}  // namespace frsf
