#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "frsf/exec.hpp"

namespace frsf {

/// Epanechnikov kernel 0.75 (1 - u^2) on |u| < 1.
inline double epanechnikov(double u) {
  const double a = u * u;
  return a < 1.0 ? 0.75 * (1.0 - a) : 0.0;
}

inline constexpr int kMaxBandwidthDoublings = 10;

/// Scatterplot with repeated abscissae merged. Points sit at distinct x
/// (sorted); each carries its multiplicity, mean response and centered sum of
/// squares so fits and residual sums match the unmerged data.
struct Binned1d {
  std::vector<double> x;
  std::vector<double> count;
  std::vector<double> mean;
  std::vector<double> centered_ss;

  std::size_t size() const { return x.size(); }
  double total_count() const;
};

Binned1d bin_1d(std::span<const double> x, std::span<const double> y);

/// Local linear fit at each eval point: intercept of the kernel-weighted
/// least-squares line. Bandwidth is doubled locally (up to 10 times) until at
/// least two distinct x carry positive weight; past that, sparse-support error.
std::vector<double> loclin_1d(std::span<const double> x, std::span<const double> y, double bw,
                              std::span<const double> eval_points, Exec exec = Exec::parallel);

std::vector<double> loclin_1d(const Binned1d& data, double bw, std::span<const double> eval_points,
                              Exec exec = Exec::parallel);

/// n RSS / (n - tr S)^2 for the smoother with bandwidth bw evaluated at the data.
double gcv_score_1d(const Binned1d& data, double bw);

/// Candidate with the smallest GCV score; ties go to the smaller bandwidth.
double select_bandwidth_gcv(std::span<const double> x, std::span<const double> y,
                            std::span<const double> candidates);

double select_bandwidth_gcv(const Binned1d& data, std::span<const double> candidates);

/// n log-spaced values from lo to hi inclusive.
std::vector<double> bandwidth_ladder(double lo, double hi, int n = 10);

/// 2-D analogue of Binned1d: distinct (s, t) locations with multiplicity.
struct Binned2d {
  std::vector<double> s;
  std::vector<double> t;
  std::vector<double> count;
  std::vector<double> mean;
  std::vector<double> centered_ss;

  std::size_t size() const { return s.size(); }
  double total_count() const;
  void add(double s_at, double t_at, double count_at, double mean_at, double ss_at);
};

struct PointST {
  double s = 0.0;
  double t = 0.0;
};

Binned2d bin_2d(std::span<const PointST> pts, std::span<const double> values);

/// Local plane fit with a product Epanechnikov kernel at every (s_grid[i],
/// t_grid[j]) node; result(i, j). Bandwidths double together until three
/// non-collinear support points are found.
Eigen::MatrixXd loclin_2d(std::span<const PointST> pts, std::span<const double> values,
                          std::pair<double, double> bw, std::span<const double> s_grid,
                          std::span<const double> t_grid, Exec exec = Exec::parallel);

Eigen::MatrixXd loclin_2d(const Binned2d& data, std::pair<double, double> bw,
                          std::span<const double> s_grid, std::span<const double> t_grid,
                          Exec exec = Exec::parallel);

double gcv_score_2d(const Binned2d& data, std::pair<double, double> bw);

/// Symmetric-bandwidth GCV over candidates (h, h); ties to the smaller h.
double select_bandwidth_gcv_2d(const Binned2d& data, std::span<const double> candidates);

}  // namespace frsf
