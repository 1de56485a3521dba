#include "frsf/pace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "frsf/error.hpp"

namespace frsf {
namespace {

std::vector<double> trapezoid_weights(const std::vector<double>& nodes) {
  std::vector<double> w(nodes.size(), 0.0);
  for (std::size_t g = 1; g < nodes.size(); ++g) {
    const double half = 0.5 * (nodes[g] - nodes[g - 1]);
    w[g - 1] += half;
    w[g] += half;
  }
  return w;
}

// Chan et al. pairwise merge of (count, mean, centered ss) summaries.
void merge_summary(double& n, double& mean, double& ss, double n2, double mean2, double ss2) {
  if (n2 <= 0.0) return;
  if (n <= 0.0) {
    n = n2, mean = mean2, ss = ss2;
    return;
  }
  const double total = n + n2;
  const double delta = mean2 - mean;
  mean += delta * n2 / total;
  ss += ss2 + delta * delta * n * n2 / total;
  n = total;
}

void push_value(double& n, double& mean, double& ss, double y) { merge_summary(n, mean, ss, 1.0, y, 0.0); }

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  out.back() = b;
  return out;
}

}  // namespace

Grid build_grid(Domain domain, double h) {
  const double span = domain.b - domain.a;
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::parameter, "grid step h must be > 0");
  if (!(span > 0.0)) throw Error(ErrorKind::parameter, "grid domain must satisfy a < b");
  if (h > span * (1.0 + 1e-12)) {
    throw Error(ErrorKind::parameter, "grid step h exceeds the domain length b - a");
  }
  const auto steps = static_cast<std::size_t>(std::floor(span / h + 1e-9));
  std::vector<double> nodes;
  nodes.reserve(steps + 2);
  for (std::size_t k = 0; k <= steps; ++k) nodes.push_back(domain.a + static_cast<double>(k) * h);
  if (std::abs(nodes.back() - domain.b) <= 1e-9 * span) {
    nodes.back() = domain.b;
  } else {
    nodes.push_back(domain.b);
  }
  return grid_from_nodes(std::move(nodes), h);
}

Grid grid_from_nodes(std::vector<double> nodes, double step) {
  if (nodes.size() < 2) throw Error(ErrorKind::parameter, "a grid needs at least two nodes");
  for (std::size_t g = 1; g < nodes.size(); ++g) {
    if (!(nodes[g] > nodes[g - 1])) throw Error(ErrorKind::parameter, "grid nodes must increase");
  }
  Grid grid;
  grid.step = step;
  grid.weights = trapezoid_weights(nodes);
  grid.nodes = std::move(nodes);
  return grid;
}

namespace {

// Nodes in [start, end], tolerating rounding in a + k h against end.
std::vector<std::size_t> nodes_within(const Grid& grid, double start, double end) {
  const double tol = 1e-9 * grid.step;
  std::vector<std::size_t> idx;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t = grid.nodes[g];
    if (t + tol < start) continue;
    if (t > end + tol) break;
    idx.push_back(g);
  }
  return idx;
}

}  // namespace

std::vector<GriddedSubject> resample_curves(const Dataset& dataset, const std::vector<CfdCurve>& curves,
                                            const Grid& grid) {
  if (curves.size() != dataset.size()) {
    throw Error(ErrorKind::dimension, "one curve per subject is required");
  }
  std::vector<GriddedSubject> out(curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& curve = curves[i];
    const auto& subject = dataset.subjects[i];
    GriddedSubject gs;
    gs.subject_id = curve.subject_id;
    gs.event_time = subject.event_time;
    gs.event = subject.event;
    gs.node_indices = nodes_within(grid, curve.domain_start, curve.domain_end);
    if (gs.node_indices.empty()) {
      throw Error(ErrorKind::resolution, "subject '" + curve.subject_id +
                                             "' has no grid node inside [a, T*]; grid step too coarse");
    }
    for (std::size_t g : gs.node_indices) {
      const double t = std::clamp(grid.nodes[g], curve.domain_start, curve.domain_end);
      gs.values.push_back(eval_curve(curve, t));
    }
    out[i] = std::move(gs);
  }
  return out;
}

std::vector<GriddedSubject> resample_step(const Dataset& dataset, const Grid& grid) {
  std::vector<GriddedSubject> out(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.subjects[i];
    GriddedSubject gs;
    gs.subject_id = s.id;
    gs.event_time = s.event_time;
    gs.event = s.event;
    gs.node_indices = nodes_within(grid, grid.nodes.front(), s.event_time);
    if (gs.node_indices.empty()) {
      throw Error(ErrorKind::resolution, "subject '" + s.id + "' has no grid node inside [a, T*]");
    }
    std::size_t next = 0;
    for (std::size_t g : gs.node_indices) {
      while (next + 1 < s.observations.size() && s.observations[next + 1].time <= grid.nodes[g]) ++next;
      gs.values.push_back(s.observations[next].value);
    }
    out[i] = std::move(gs);
  }
  return out;
}

Binned1d pooled_scatter(const std::vector<GriddedSubject>& gridded, const Grid& grid) {
  const std::size_t n_nodes = grid.size();
  std::vector<double> count(n_nodes, 0.0), mean(n_nodes, 0.0), ss(n_nodes, 0.0);
  for (const auto& s : gridded) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const std::size_t g = s.node_indices[j];
      push_value(count[g], mean[g], ss[g], s.values[j]);
    }
  }
  Binned1d out;
  for (std::size_t g = 0; g < n_nodes; ++g) {
    if (count[g] <= 0.0) continue;
    out.x.push_back(grid.nodes[g]);
    out.count.push_back(count[g]);
    out.mean.push_back(mean[g]);
    out.centered_ss.push_back(ss[g]);
  }
  return out;
}

std::vector<double> estimate_mean(const std::vector<GriddedSubject>& gridded, const Grid& grid,
                                  double bw, Exec exec) {
  const Binned1d pooled = pooled_scatter(gridded, grid);
  if (pooled.size() == 0) throw Error(ErrorKind::sparse_support, "pooled scatterplot is empty");
  return loclin_1d(pooled, bw, grid.nodes, exec);
}

std::vector<RawCovariance> raw_covariances(const std::vector<GriddedSubject>& gridded,
                                           std::span<const double> mean, const Grid& grid) {
  std::vector<RawCovariance> out;
  for (const auto& s : gridded) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const std::size_t gj = s.node_indices[j];
      const double rj = s.values[j] - mean[gj];
      for (std::size_t l = 0; l < s.size(); ++l) {
        if (l == j) continue;
        const std::size_t gl = s.node_indices[l];
        out.push_back({gj, gl, grid.nodes[gj], grid.nodes[gl], rj * (s.values[l] - mean[gl])});
      }
    }
  }
  return out;
}

Binned2d raw_covariance_bins(const std::vector<GriddedSubject>& gridded, std::span<const double> mean,
                             const Grid& grid) {
  const std::size_t n_nodes = grid.size();
  struct Cell {
    double n = 0.0, mean = 0.0, ss = 0.0;
  };
  auto accumulate_into = [&](auto&& cell_at) {
    for (const auto& s : gridded) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        const std::size_t gj = s.node_indices[j];
        const double rj = s.values[j] - mean[gj];
        for (std::size_t l = 0; l < s.size(); ++l) {
          if (l == j) continue;
          const std::size_t gl = s.node_indices[l];
          Cell& c = cell_at(gj * n_nodes + gl);
          push_value(c.n, c.mean, c.ss, rj * (s.values[l] - mean[gl]));
        }
      }
    }
  };
  Binned2d out;
  if (n_nodes <= 3000) {
    std::vector<Cell> cells(n_nodes * n_nodes);
    accumulate_into([&](std::size_t key) -> Cell& { return cells[key]; });
    for (std::size_t key = 0; key < cells.size(); ++key) {
      const Cell& c = cells[key];
      if (c.n > 0.0) out.add(grid.nodes[key / n_nodes], grid.nodes[key % n_nodes], c.n, c.mean, c.ss);
    }
  } else {
    std::unordered_map<std::size_t, Cell> cells;
    accumulate_into([&](std::size_t key) -> Cell& { return cells[key]; });
    std::vector<std::size_t> keys;
    keys.reserve(cells.size());
    for (const auto& kv : cells) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    for (std::size_t key : keys) {
      const Cell& c = cells.at(key);
      out.add(grid.nodes[key / n_nodes], grid.nodes[key % n_nodes], c.n, c.mean, c.ss);
    }
  }
  return out;
}

Binned2d coarsen_bins(const Binned2d& fine, std::span<const double> nodes) {
  const std::size_t m = nodes.size();
  auto nearest = [&](double x) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
    if (it == nodes.end()) return m - 1;
    const std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
    if (hi == 0) return std::size_t{0};
    return (x - nodes[hi - 1] <= nodes[hi] - x) ? hi - 1 : hi;
  };
  struct Cell {
    double n = 0.0, mean = 0.0, ss = 0.0, s_sum = 0.0, t_sum = 0.0;
  };
  std::vector<Cell> cells(m * m);
  for (std::size_t k = 0; k < fine.size(); ++k) {
    Cell& c = cells[nearest(fine.s[k]) * m + nearest(fine.t[k])];
    merge_summary(c.n, c.mean, c.ss, fine.count[k], fine.mean[k], fine.centered_ss[k]);
    c.s_sum += fine.count[k] * fine.s[k];
    c.t_sum += fine.count[k] * fine.t[k];
  }
  Binned2d out;
  for (const Cell& c : cells) {
    if (c.n > 0.0) out.add(c.s_sum / c.n, c.t_sum / c.n, c.n, c.mean, c.ss);
  }
  return out;
}

Eigen::MatrixXd smooth_cov_surface(const Binned2d& raw, double bw, const Grid& grid,
                                   std::size_t work_grid_max, Exec exec) {
  if (raw.size() == 0) throw Error(ErrorKind::sparse_support, "no raw covariances to smooth");
  const std::size_t n_nodes = grid.size();
  Eigen::MatrixXd surface;
  if (work_grid_max < 2 || n_nodes <= work_grid_max) {
    surface = loclin_2d(raw, {bw, bw}, grid.nodes, grid.nodes, exec);
  } else {
    const auto work = linspace(grid.nodes.front(), grid.nodes.back(), work_grid_max);
    const Eigen::MatrixXd coarse = loclin_2d(raw, {bw, bw}, work, work, exec);
    // Bilinear interpolation from the working grid.
    std::vector<std::size_t> cell(n_nodes);
    std::vector<double> frac(n_nodes);
    for (std::size_t g = 0; g < n_nodes; ++g) {
      auto it = std::upper_bound(work.begin(), work.end(), grid.nodes[g]);
      std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - work.begin()), work.size() - 1);
      std::size_t lo = hi - 1;
      cell[g] = lo;
      frac[g] = std::clamp((grid.nodes[g] - work[lo]) / (work[hi] - work[lo]), 0.0, 1.0);
    }
    surface.resize(static_cast<Eigen::Index>(n_nodes), static_cast<Eigen::Index>(n_nodes));
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const auto i0 = static_cast<Eigen::Index>(cell[i]);
      const double fi = frac[i];
      for (std::size_t j = 0; j < n_nodes; ++j) {
        const auto j0 = static_cast<Eigen::Index>(cell[j]);
        const double fj = frac[j];
        surface(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            (1 - fi) * (1 - fj) * coarse(i0, j0) + fi * (1 - fj) * coarse(i0 + 1, j0) +
            (1 - fi) * fj * coarse(i0, j0 + 1) + fi * fj * coarse(i0 + 1, j0 + 1);
      }
    }
  }
  const Eigen::MatrixXd sym = 0.5 * (surface + surface.transpose());
  return sym;
}

Eigen::MatrixXd smooth_cov_surface(const std::vector<RawCovariance>& raw, double bw, const Grid& grid,
                                   std::size_t work_grid_max, Exec exec) {
  std::vector<PointST> pts;
  std::vector<double> values;
  pts.reserve(raw.size());
  values.reserve(raw.size());
  for (const auto& r : raw) {
    pts.push_back({r.s, r.t});
    values.push_back(r.value);
  }
  if (raw.empty()) throw Error(ErrorKind::sparse_support, "no raw covariances to smooth");
  return smooth_cov_surface(bin_2d(pts, values), bw, grid, work_grid_max, exec);
}

double estimate_sigma2(const std::vector<GriddedSubject>& gridded, std::span<const double> mean,
                       const Eigen::MatrixXd& cov, const Grid& grid, double bw, Exec exec) {
  std::vector<double> x, y;
  for (const auto& s : gridded) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const std::size_t g = s.node_indices[j];
      const double r = s.values[j] - mean[g];
      x.push_back(grid.nodes[g]);
      y.push_back(r * r);
    }
  }
  if (x.empty()) throw Error(ErrorKind::sparse_support, "diagonal scatterplot is empty");
  const std::vector<double> v = loclin_1d(bin_1d(x, y), bw, grid.nodes, exec);
  const double a = grid.nodes.front();
  const double tau = grid.nodes.back() - a;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t = grid.nodes[g];
    if (t < a + 0.25 * tau || t > a + 0.75 * tau) continue;
    sum += v[g] - cov(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
    ++count;
  }
  if (count == 0) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      sum += v[g] - cov(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
    }
    count = grid.size();
  }
  return std::max(0.0, sum / static_cast<double>(count));
}

Spectrum eigendecompose(const Eigen::MatrixXd& cov, const Grid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (cov.rows() != n || cov.cols() != n) {
    throw Error(ErrorKind::dimension, "covariance surface does not match the grid");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::contract, "covariance surface is not symmetric");
  }
  Eigen::VectorXd root_w(n);
  for (Eigen::Index g = 0; g < n; ++g) root_w(g) = std::sqrt(grid.weights[static_cast<std::size_t>(g)]);
  const Eigen::MatrixXd weighted = root_w.asDiagonal() * cov * root_w.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weighted);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::degenerate_model, "eigendecomposition failed to converge");
  }
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();
  Spectrum out;
  const double top = n > 0 ? values(n - 1) : 0.0;
  if (!(top > 0.0)) return out;
  const double floor = 1e-10 * top;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    if (values(k) > floor) keep.push_back(k);
  }
  out.eigenfunctions.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t m = 0; m < keep.size(); ++m) {
    const Eigen::Index k = keep[m];
    Eigen::VectorXd xi = vectors.col(k).cwiseQuotient(root_w);
    double integral = 0.0;
    for (Eigen::Index g = 0; g < n; ++g) integral += grid.weights[static_cast<std::size_t>(g)] * xi(g);
    bool flip = integral < 0.0;
    if (std::abs(integral) <= 1e-12) {
      const double big = xi.cwiseAbs().maxCoeff();
      for (Eigen::Index g = 0; g < n; ++g) {
        if (std::abs(xi(g)) > 1e-12 * big) {
          flip = xi(g) < 0.0;
          break;
        }
      }
    }
    if (flip) xi = -xi;
    out.eigenvalues.push_back(values(k));
    out.eigenfunctions.col(static_cast<Eigen::Index>(m)) = xi;
  }
  return out;
}

std::size_t select_p(std::span<const double> eigenvalues, double fve_threshold) {
  if (eigenvalues.empty()) throw Error(ErrorKind::degenerate_model, "no positive eigenvalues");
  if (!(fve_threshold > 0.0 && fve_threshold <= 1.0)) {
    throw Error(ErrorKind::parameter, "FVE threshold must lie in (0, 1]");
  }
  const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  double cumulative = 0.0;
  for (std::size_t m = 0; m < eigenvalues.size(); ++m) {
    cumulative += eigenvalues[m];
    if (cumulative / total >= fve_threshold - 1e-12) return m + 1;
  }
  return eigenvalues.size();
}

double FpcaModel::total_variance() const {
  return std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
}

double FpcaModel::fve_achieved() const {
  const double total = total_variance();
  if (!(total > 0.0)) return 0.0;
  return std::accumulate(eigenvalues.begin(), eigenvalues.begin() + static_cast<std::ptrdiff_t>(p), 0.0) /
         total;
}

std::vector<double> default_bandwidth_ladder(const Binned1d& pooled, const Grid& grid, int n) {
  std::vector<double> gaps;
  for (std::size_t k = 1; k < pooled.size(); ++k) gaps.push_back(pooled.x[k] - pooled.x[k - 1]);
  double median_gap = grid.step;
  if (!gaps.empty()) {
    std::sort(gaps.begin(), gaps.end());
    const std::size_t mid = gaps.size() / 2;
    median_gap = gaps.size() % 2 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);
  }
  const double lo = 1.5 * median_gap;
  const double hi = std::max(lo, 0.25 * (grid.nodes.back() - grid.nodes.front()));
  return bandwidth_ladder(lo, hi, n);
}

FpcaModel fit_fpca(const std::vector<GriddedSubject>& gridded, const Grid& grid,
                   const FpcaOptions& options, Exec exec) {
  if (gridded.empty()) throw Error(ErrorKind::degenerate_model, "no subjects to fit");
  if (std::none_of(gridded.begin(), gridded.end(), [](const GriddedSubject& s) { return s.size() >= 2; })) {
    throw Error(ErrorKind::degenerate_model, "no subject has two or more grid values; covariance undefined");
  }
  FpcaModel model;
  model.grid = grid;
  model.fve_threshold = options.fve_threshold;
  model.smoothing.work_grid = std::min(options.work_grid_max, grid.size());

  const Binned1d pooled = pooled_scatter(gridded, grid);
  const auto ladder = default_bandwidth_ladder(pooled, grid, options.ladder_size);
  if (options.bw_mean) {
    model.smoothing.bw_mean = *options.bw_mean;
  } else {
    model.smoothing.bw_mean = select_bandwidth_gcv(pooled, ladder);
    model.smoothing.bw_mean_auto = true;
  }
  model.mean = loclin_1d(pooled, model.smoothing.bw_mean, grid.nodes, exec);

  const Binned2d bins = raw_covariance_bins(gridded, model.mean, grid);
  if (options.bw_cov) {
    model.smoothing.bw_cov = *options.bw_cov;
  } else {
    const bool coarse = options.work_grid_max >= 2 && grid.size() > options.work_grid_max;
    const Binned2d for_gcv =
        coarse ? coarsen_bins(bins, linspace(grid.nodes.front(), grid.nodes.back(), options.work_grid_max))
               : bins;
    model.smoothing.bw_cov = select_bandwidth_gcv_2d(for_gcv, ladder);
    model.smoothing.bw_cov_auto = true;
  }
  model.cov = smooth_cov_surface(bins, model.smoothing.bw_cov, grid, options.work_grid_max, exec);
  model.sigma2 = estimate_sigma2(gridded, model.mean, model.cov, grid, model.smoothing.bw_mean, exec);

  Spectrum spectrum = eigendecompose(model.cov, grid);
  if (spectrum.eigenvalues.empty()) {
    throw Error(ErrorKind::degenerate_model, "smoothed covariance has no positive eigenvalue");
  }
  model.p = select_p(spectrum.eigenvalues, options.fve_threshold);
  model.eigenvalues = std::move(spectrum.eigenvalues);
  model.eigenfunctions = std::move(spectrum.eigenfunctions);
  check_fpca_invariants(model);
  return model;
}

void check_fpca_invariants(const FpcaModel& model, double tol) {
  const auto r = static_cast<Eigen::Index>(model.eigenvalues.size());
  if (model.eigenfunctions.cols() != r || model.eigenfunctions.rows() != static_cast<Eigen::Index>(model.grid.size())) {
    throw Error(ErrorKind::contract, "eigenfunction matrix shape mismatch");
  }
  for (Eigen::Index m = 0; m < r; ++m) {
    if (!(model.eigenvalues[static_cast<std::size_t>(m)] > 0.0)) {
      throw Error(ErrorKind::contract, "nonpositive eigenvalue retained");
    }
    if (m > 0 && model.eigenvalues[static_cast<std::size_t>(m)] > model.eigenvalues[static_cast<std::size_t>(m - 1)]) {
      throw Error(ErrorKind::contract, "eigenvalues are not nonincreasing");
    }
  }
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(model.grid.weights.data(),
                                                             static_cast<Eigen::Index>(model.grid.size()));
  const Eigen::MatrixXd gram = model.eigenfunctions.transpose() * w.asDiagonal() * model.eigenfunctions;
  const double err = (gram - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
  if (r > 0 && err > tol) {
    throw Error(ErrorKind::contract, "eigenfunctions are not quadrature-orthonormal (error " +
                                         std::to_string(err) + ")");
  }
  if (model.p < 1 || model.p > static_cast<std::size_t>(r)) {
    throw Error(ErrorKind::contract, "retained dimension p out of range");
  }
}

std::vector<double> scores_riemann(const GriddedSubject& subject, const FpcaModel& model) {
  std::vector<double> nu(model.p, 0.0);
  double previous = 0.0;
  for (std::size_t j = 0; j < subject.size(); ++j) {
    const std::size_t g = subject.node_indices[j];
    const double t = model.grid.nodes[g];
    const double gap = j == 0 ? model.grid.step : t - previous;
    previous = t;
    const double centered = subject.values[j] - model.mean[g];
    for (std::size_t m = 0; m < model.p; ++m) {
      nu[m] += centered * model.eigenfunctions(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m)) * gap;
    }
  }
  return nu;
}

std::vector<double> scores_conditional(const GriddedSubject& subject, const FpcaModel& model) {
  const auto J = static_cast<Eigen::Index>(subject.size());
  const auto r = static_cast<Eigen::Index>(model.eigenvalues.size());
  Eigen::MatrixXd phi(J, r);
  Eigen::VectorXd centered(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto g = static_cast<Eigen::Index>(subject.node_indices[static_cast<std::size_t>(j)]);
    phi.row(j) = model.eigenfunctions.row(g);
    centered(j) = subject.values[static_cast<std::size_t>(j)] - model.mean[static_cast<std::size_t>(g)];
  }
  const Eigen::VectorXd lambda = Eigen::Map<const Eigen::VectorXd>(model.eigenvalues.data(), r);
  Eigen::MatrixXd sigma = phi * lambda.asDiagonal() * phi.transpose();
  sigma.diagonal().array() += model.sigma2;
  const double trace = sigma.trace();
  if (!(trace > 0.0)) {
    throw Error(ErrorKind::conditioning, "observed covariance has zero trace");
  }
  // The model part is PSD, so sigma2 bounds the smallest eigenvalue from below;
  // only test definiteness explicitly when that bound is too weak.
  const double threshold = 1e-10 * trace;
  bool needs_ridge = false;
  if (model.sigma2 < threshold) {
    Eigen::MatrixXd shifted = sigma;
    shifted.diagonal().array() -= threshold;
    needs_ridge = Eigen::LLT<Eigen::MatrixXd>(shifted).info() != Eigen::Success;
  }
  if (needs_ridge) sigma.diagonal().array() += 1e-8 * trace / static_cast<double>(J);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::conditioning, "observed covariance is numerically singular");
  }
  const Eigen::VectorXd solved = llt.solve(centered);
  std::vector<double> nu(model.p);
  for (std::size_t m = 0; m < model.p; ++m) {
    nu[m] = model.eigenvalues[m] * phi.col(static_cast<Eigen::Index>(m)).dot(solved);
  }
  return nu;
}

double reconstruct(std::span<const double> scores, const FpcaModel& model, double t) {
  const auto& nodes = model.grid.nodes;
  if (scores.size() != model.p) throw Error(ErrorKind::dimension, "score vector length must equal p");
  if (!(t >= nodes.front() && t <= nodes.back())) {
    throw Error(ErrorKind::domain, "reconstruction time outside the model grid");
  }
  auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
  std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - nodes.begin()), nodes.size() - 1);
  std::size_t lo = hi - 1;
  const double f = (t - nodes[lo]) / (nodes[hi] - nodes[lo]);
  auto lerp = [&](double a, double b) { return a + f * (b - a); };
  double value = lerp(model.mean[lo], model.mean[hi]);
  for (std::size_t m = 0; m < model.p; ++m) {
    const auto col = static_cast<Eigen::Index>(m);
    value += scores[m] * lerp(model.eigenfunctions(static_cast<Eigen::Index>(lo), col),
                              model.eigenfunctions(static_cast<Eigen::Index>(hi), col));
  }
  return value;
}

std::string to_string(ScoreMethod method) {
  return method == ScoreMethod::riemann ? "riemann" : "conditional";
}

ScoreMethod parse_score_method(const std::string& text) {
  if (text == "riemann") return ScoreMethod::riemann;
  if (text == "conditional") return ScoreMethod::conditional;
  throw Error(ErrorKind::parameter, "score method must be 'riemann' or 'conditional'");
}

Eigen::MatrixXd score_matrix(const std::vector<GriddedSubject>& gridded, const FpcaModel& model,
                             ScoreMethod method, Exec exec) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(gridded.size()), static_cast<Eigen::Index>(model.p));
  for_each_index(gridded.size(), exec, [&](std::size_t i) {
    std::vector<double> nu;
    try {
      nu = method == ScoreMethod::riemann ? scores_riemann(gridded[i], model)
                                          : scores_conditional(gridded[i], model);
    } catch (const Error& e) {
      throw e.with_context("subject '" + gridded[i].subject_id + "'");
    }
    for (std::size_t m = 0; m < model.p; ++m) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = nu[m];
    }
  });
  return out;
}

double quad_inner(std::span<const double> f, std::span<const double> g, const Grid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size()) {
    throw Error(ErrorKind::dimension, "function vectors must match the grid");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) sum += grid.weights[k] * f[k] * g[k];
  return sum;
}

double l2_distance(std::span<const double> f, std::span<const double> g, const Grid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size()) {
    throw Error(ErrorKind::dimension, "function vectors must match the grid");
  }
  std::vector<double> diff(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) diff[k] = f[k] - g[k];
  return std::sqrt(quad_inner(diff, diff, grid));
}

}  // namespace frsf
