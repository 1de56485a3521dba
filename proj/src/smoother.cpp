#include "frsf/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "frsf/error.hpp"

namespace frsf {
namespace {

void check_bandwidth(double bw) {
  if (!(bw > 0.0) || !std::isfinite(bw)) {
    throw Error(ErrorKind::parameter, "bandwidth must be positive and finite");
  }
}

// Welford merge of one observation into a running (count, mean, ss) triple.
void welford_push(double& count, double& mean, double& ss, double y) {
  count += 1.0;
  const double delta = y - mean;
  mean += delta / count;
  ss += delta * (y - mean);
}

struct Fit1d {
  double value = 0.0;
  double self_weight = 0.0;  // coefficient of a unit point located at the eval point
};

Fit1d fit_1d_at(const Binned1d& data, double bw, double t) {
  double h = bw;
  for (int doubling = 0; doubling <= kMaxBandwidthDoublings; ++doubling, h *= 2.0) {
    const auto lo = std::upper_bound(data.x.begin(), data.x.end(), t - h) - data.x.begin();
    const auto hi = std::lower_bound(data.x.begin(), data.x.end(), t + h) - data.x.begin();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
    int support = 0;
    for (auto i = lo; i < hi; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      const double d = data.x[k] - t;
      const double kern = epanechnikov(d / h);
      if (kern <= 0.0) continue;
      ++support;
      const double w = kern * data.count[k];
      s0 += w;
      s1 += w * d;
      s2 += w * d * d;
      t0 += w * data.mean[k];
      t1 += w * d * data.mean[k];
    }
    if (support < 2) continue;
    const double det = s0 * s2 - s1 * s1;
    if (!(det > 0.0)) continue;
    Fit1d fit;
    fit.value = (s2 * t0 - s1 * t1) / det;
    fit.self_weight = epanechnikov(0.0) * s2 / det;
    return fit;
  }
  throw Error(ErrorKind::sparse_support,
              "fewer than two distinct support points near t=" + std::to_string(t) +
                  " after bandwidth escalation");
}

}  // namespace

double Binned1d::total_count() const { return std::accumulate(count.begin(), count.end(), 0.0); }

Binned1d bin_1d(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::dimension, "x and y lengths differ");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });
  Binned1d out;
  for (std::size_t idx : order) {
    if (out.x.empty() || out.x.back() != x[idx]) {
      out.x.push_back(x[idx]);
      out.count.push_back(0.0);
      out.mean.push_back(0.0);
      out.centered_ss.push_back(0.0);
    }
    welford_push(out.count.back(), out.mean.back(), out.centered_ss.back(), y[idx]);
  }
  return out;
}

std::vector<double> loclin_1d(const Binned1d& data, double bw, std::span<const double> eval_points,
                              Exec exec) {
  check_bandwidth(bw);
  std::vector<double> out(eval_points.size());
  for_each_index(eval_points.size(), exec,
                 [&](std::size_t g) { out[g] = fit_1d_at(data, bw, eval_points[g]).value; });
  return out;
}

std::vector<double> loclin_1d(std::span<const double> x, std::span<const double> y, double bw,
                              std::span<const double> eval_points, Exec exec) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::dimension, "loclin_1d needs |x| = |y| >= 2");
  }
  return loclin_1d(bin_1d(x, y), bw, eval_points, exec);
}

double gcv_score_1d(const Binned1d& data, double bw) {
  check_bandwidth(bw);
  double rss = 0.0, trace = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Fit1d fit = fit_1d_at(data, bw, data.x[k]);
    const double gap = data.mean[k] - fit.value;
    rss += data.centered_ss[k] + data.count[k] * gap * gap;
    trace += data.count[k] * fit.self_weight;
  }
  const double n = data.total_count();
  const double dof = n - trace;
  if (!(dof > 0.0)) return std::numeric_limits<double>::infinity();
  return n * rss / (dof * dof);
}

namespace {

double response_variance(const Binned1d& data) {
  const double n = data.total_count();
  double mean = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) mean += data.count[k] * data.mean[k];
  mean /= n;
  double ss = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double d = data.mean[k] - mean;
    ss += data.centered_ss[k] + data.count[k] * d * d;
  }
  return ss / n;
}

template <typename Score>
double pick_bandwidth(std::span<const double> candidates, double scale, Score&& score) {
  if (candidates.empty()) throw Error(ErrorKind::parameter, "no bandwidth candidates");
  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  double best_h = 0.0;
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  const double abs_tol = 1e-12 * std::max(scale, std::numeric_limits<double>::min());
  for (double h : sorted) {
    double g;
    try {
      g = score(h);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::sparse_support) continue;
      throw;
    }
    if (!std::isfinite(g)) continue;
    if (!found || g < best - (1e-9 * best + abs_tol)) {
      best = g;
      best_h = h;
      found = true;
    }
  }
  if (!found) {
    throw Error(ErrorKind::bandwidth_selection, "no bandwidth candidate yields a valid fit");
  }
  return best_h;
}

}  // namespace

double select_bandwidth_gcv(const Binned1d& data, std::span<const double> candidates) {
  return pick_bandwidth(candidates, response_variance(data),
                        [&](double h) { return gcv_score_1d(data, h); });
}

double select_bandwidth_gcv(std::span<const double> x, std::span<const double> y,
                            std::span<const double> candidates) {
  return select_bandwidth_gcv(bin_1d(x, y), candidates);
}

std::vector<double> bandwidth_ladder(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) {
    throw Error(ErrorKind::parameter, "bandwidth ladder needs 0 < lo <= hi and n >= 1");
  }
  std::vector<double> out;
  if (n == 1 || hi == lo) return {lo};
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (int k = 0; k < n; ++k) out.push_back(lo * std::exp(step * static_cast<double>(k)));
  out.back() = hi;
  return out;
}

// ---------------------------------------------------------------------------
// Two dimensions

double Binned2d::total_count() const { return std::accumulate(count.begin(), count.end(), 0.0); }

void Binned2d::add(double s_at, double t_at, double count_at, double mean_at, double ss_at) {
  s.push_back(s_at);
  t.push_back(t_at);
  count.push_back(count_at);
  mean.push_back(mean_at);
  centered_ss.push_back(ss_at);
}

Binned2d bin_2d(std::span<const PointST> pts, std::span<const double> values) {
  if (pts.size() != values.size()) throw Error(ErrorKind::dimension, "points and values differ in length");
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return pts[l].s < pts[r].s || (pts[l].s == pts[r].s && pts[l].t < pts[r].t);
  });
  Binned2d out;
  for (std::size_t idx : order) {
    if (out.s.empty() || out.s.back() != pts[idx].s || out.t.back() != pts[idx].t) {
      out.add(pts[idx].s, pts[idx].t, 0.0, 0.0, 0.0);
    }
    welford_push(out.count.back(), out.mean.back(), out.centered_ss.back(), values[idx]);
  }
  return out;
}

namespace {

// Uniform bucket index over the point cloud so each fit only visits nearby points.
class BucketIndex {
 public:
  BucketIndex(const Binned2d& data, std::pair<double, double> bw) {
    const auto [smin, smax] = std::minmax_element(data.s.begin(), data.s.end());
    const auto [tmin, tmax] = std::minmax_element(data.t.begin(), data.t.end());
    s0_ = *smin;
    t0_ = *tmin;
    const double srange = *smax - s0_;
    const double trange = *tmax - t0_;
    cell_s_ = std::max(bw.first, srange / 2000.0);
    cell_t_ = std::max(bw.second, trange / 2000.0);
    ns_ = static_cast<long>(std::floor(srange / cell_s_)) + 1;
    nt_ = static_cast<long>(std::floor(trange / cell_t_)) + 1;
    std::vector<std::size_t> key(data.size());
    offsets_.assign(static_cast<std::size_t>(ns_ * nt_ + 1), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      key[i] = static_cast<std::size_t>(cell_of_s(data.s[i]) * nt_ + cell_of_t(data.t[i]));
      ++offsets_[key[i] + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    items_.resize(data.size());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < data.size(); ++i) items_[fill[key[i]]++] = i;
  }

  // Visits every point in buckets overlapping [s-hs, s+hs] x [t-ht, t+ht], in
  // ascending bucket then insertion order.
  template <typename Visit>
  void visit(double s, double t, double hs, double ht, Visit&& fn) const {
    const long is_lo = std::max(0L, cell_of_s(s - hs));
    const long is_hi = std::min(ns_ - 1, cell_of_s(s + hs));
    const long it_lo = std::max(0L, cell_of_t(t - ht));
    const long it_hi = std::min(nt_ - 1, cell_of_t(t + ht));
    for (long a = is_lo; a <= is_hi; ++a) {
      for (long b = it_lo; b <= it_hi; ++b) {
        const std::size_t key = static_cast<std::size_t>(a * nt_ + b);
        for (std::size_t k = offsets_[key]; k < offsets_[key + 1]; ++k) fn(items_[k]);
      }
    }
  }

 private:
  long cell_of_s(double s) const { return static_cast<long>(std::floor((s - s0_) / cell_s_)); }
  long cell_of_t(double t) const { return static_cast<long>(std::floor((t - t0_) / cell_t_)); }

  double s0_ = 0.0, t0_ = 0.0, cell_s_ = 1.0, cell_t_ = 1.0;
  long ns_ = 1, nt_ = 1;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> items_;
};

struct Fit2d {
  double value = 0.0;
  double self_weight = 0.0;
};

Fit2d fit_2d_at(const Binned2d& data, const BucketIndex& index, std::pair<double, double> bw,
                double s, double t) {
  double hs = bw.first, ht = bw.second;
  for (int doubling = 0; doubling <= kMaxBandwidthDoublings; ++doubling, hs *= 2.0, ht *= 2.0) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    // Non-collinearity witness: two anchors and the largest cross product seen.
    bool have0 = false, have1 = false;
    double p0s = 0, p0t = 0, p1s = 0, p1t = 0, max_cross = 0.0;
    index.visit(s, t, hs, ht, [&](std::size_t k) {
      const double ds = data.s[k] - s;
      const double dt = data.t[k] - t;
      const double kern = epanechnikov(ds / hs) * epanechnikov(dt / ht);
      if (kern <= 0.0) return;
      const double us = ds / hs, ut = dt / ht;
      if (!have0) {
        p0s = us, p0t = ut, have0 = true;
      } else if (!have1) {
        if (us != p0s || ut != p0t) p1s = us, p1t = ut, have1 = true;
      } else {
        const double cross = std::abs((p1s - p0s) * (ut - p0t) - (p1t - p0t) * (us - p0s));
        max_cross = std::max(max_cross, cross);
      }
      const double w = kern * data.count[k];
      const Eigen::Vector3d z(1.0, ds, dt);
      m.noalias() += w * z * z.transpose();
      rhs.noalias() += w * data.mean[k] * z;
    });
    if (!have1 || !(max_cross > 1e-9)) continue;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible()) continue;
    const Eigen::Vector3d beta = lu.solve(rhs);
    const Eigen::Vector3d e0 = lu.solve(Eigen::Vector3d::UnitX());
    Fit2d fit;
    fit.value = beta(0);
    fit.self_weight = epanechnikov(0.0) * epanechnikov(0.0) * e0(0);
    return fit;
  }
  throw Error(ErrorKind::sparse_support,
              "fewer than three non-collinear support points near (" + std::to_string(s) + ", " +
                  std::to_string(t) + ") after bandwidth escalation");
}

void check_bandwidth_pair(std::pair<double, double> bw) {
  check_bandwidth(bw.first);
  check_bandwidth(bw.second);
}

}  // namespace

Eigen::MatrixXd loclin_2d(const Binned2d& data, std::pair<double, double> bw,
                          std::span<const double> s_grid, std::span<const double> t_grid,
                          Exec exec) {
  check_bandwidth_pair(bw);
  if (data.size() == 0) throw Error(ErrorKind::sparse_support, "no points to smooth");
  const BucketIndex index(data, bw);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s_grid.size()), static_cast<Eigen::Index>(t_grid.size()));
  const std::size_t cols = t_grid.size();
  for_each_index(s_grid.size() * cols, exec, [&](std::size_t flat) {
    const std::size_t i = flat / cols, j = flat % cols;
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        fit_2d_at(data, index, bw, s_grid[i], t_grid[j]).value;
  });
  return out;
}

Eigen::MatrixXd loclin_2d(std::span<const PointST> pts, std::span<const double> values,
                          std::pair<double, double> bw, std::span<const double> s_grid,
                          std::span<const double> t_grid, Exec exec) {
  if (pts.size() != values.size() || pts.size() < 3) {
    throw Error(ErrorKind::dimension, "loclin_2d needs |pts| = |values| >= 3");
  }
  return loclin_2d(bin_2d(pts, values), bw, s_grid, t_grid, exec);
}

double gcv_score_2d(const Binned2d& data, std::pair<double, double> bw) {
  check_bandwidth_pair(bw);
  const BucketIndex index(data, bw);
  double rss = 0.0, trace = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Fit2d fit = fit_2d_at(data, index, bw, data.s[k], data.t[k]);
    const double gap = data.mean[k] - fit.value;
    rss += data.centered_ss[k] + data.count[k] * gap * gap;
    trace += data.count[k] * fit.self_weight;
  }
  const double n = data.total_count();
  const double dof = n - trace;
  if (!(dof > 0.0)) return std::numeric_limits<double>::infinity();
  return n * rss / (dof * dof);
}

double select_bandwidth_gcv_2d(const Binned2d& data, std::span<const double> candidates) {
  const double n = data.total_count();
  double mean = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) mean += data.count[k] * data.mean[k];
  mean /= n;
  double ss = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double d = data.mean[k] - mean;
    ss += data.centered_ss[k] + data.count[k] * d * d;
  }
  return pick_bandwidth(candidates, ss / n, [&](double h) { return gcv_score_2d(data, {h, h}); });
}

}  // namespace frsf
