#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "frsf/survstats.hpp"

namespace frsf {

struct Concordance {
  double c = 0.5;
  std::int64_t n_pairs = 0;        // comparable pairs
  std::int64_t twice_concordant = 0;  // 2 * concordant + ties
};

/// Harrell C: pair (i, j) comparable iff T_i < T_j and delta_i = 1; concordant
/// iff mortality_i > mortality_j; mortality ties count one half.
Concordance concordance_index(std::span<const double> mortality, std::span<const double> times,
                              const std::vector<bool>& events);

/// Kaplan-Meier of the censoring distribution (event indicators flipped).
StepFunction censoring_km(std::span<const double> times, const std::vector<bool>& events);

/// IPCW Brier score at t; surv[i] is the predicted S(t | x_i).
double brier_score(std::span<const double> surv, double t, std::span<const double> times,
                   const std::vector<bool>& events, const StepFunction& censor_km);

struct BrierPoint {
  double t = 0.0;
  double bs = 0.0;
};

/// Trapezoidal integral of the Brier curve over [0, t_max] divided by t_max.
/// The curve is held constant before its first and after its last point.
double crps(std::span<const BrierPoint> curve, double t_max);

/// Distinct event times not above the q-quantile of all follow-up times.
std::vector<double> brier_eval_times(std::span<const double> times, const std::vector<bool>& events,
                                     double quantile = 0.95);

/// Type-7 sample quantile.
double sample_quantile(std::vector<double> values, double q);

}  // namespace frsf
