#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frsf/basisfit.hpp"
#include "frsf/exec.hpp"
#include "frsf/longdata.hpp"
#include "frsf/smoother.hpp"

namespace frsf {

/// Discretization of [a, b] with step h (last gap may be shorter) and
/// trapezoidal quadrature weights.
struct Grid {
  double step = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  Domain domain() const { return {nodes.front(), nodes.back()}; }
};

Grid build_grid(Domain domain, double h);

/// Grid nodes with explicit (possibly non-uniform) positions; trapezoidal weights.
Grid grid_from_nodes(std::vector<double> nodes, double step);

/// A subject's values at a subset of grid nodes (ascending indices).
struct GriddedSubject {
  std::string subject_id;
  std::vector<std::size_t> node_indices;
  std::vector<double> values;
  double event_time = 0.0;
  bool event = false;

  std::size_t size() const { return node_indices.size(); }
};

/// Evaluates each curve at every grid node in [a, T*]. Curves are aligned
/// with dataset.subjects.
std::vector<GriddedSubject> resample_curves(const Dataset& dataset, const std::vector<CfdCurve>& curves,
                                            const Grid& grid);

/// Raw observations carried onto the grid by last-observation-carried-forward
/// (nodes before the first observation take the first value), no curve fit.
std::vector<GriddedSubject> resample_step(const Dataset& dataset, const Grid& grid);

/// Pooled scatterplot {(t_g, Y_ig)} in merged form.
Binned1d pooled_scatter(const std::vector<GriddedSubject>& gridded, const Grid& grid);

std::vector<double> estimate_mean(const std::vector<GriddedSubject>& gridded, const Grid& grid,
                                  double bw, Exec exec = Exec::parallel);

struct RawCovariance {
  std::size_t row = 0, col = 0;  // grid node indices, row != col
  double s = 0.0, t = 0.0;
  double value = 0.0;
};

/// All ordered off-diagonal products (Y_ig - mu_g)(Y_ig' - mu_g').
std::vector<RawCovariance> raw_covariances(const std::vector<GriddedSubject>& gridded,
                                           std::span<const double> mean, const Grid& grid);

/// Same products merged per (g, g') cell; memory bounded by the grid, not the data.
Binned2d raw_covariance_bins(const std::vector<GriddedSubject>& gridded, std::span<const double> mean,
                             const Grid& grid);

/// Merges cells onto the nearest of `nodes` per axis (locations become count-weighted means).
Binned2d coarsen_bins(const Binned2d& fine, std::span<const double> nodes);

/// Local-plane smooth of the raw covariances onto grid x grid, symmetrized.
/// When the grid has more than work_grid_max nodes the surface is smoothed on
/// an equally spaced working grid and bilinearly interpolated.
Eigen::MatrixXd smooth_cov_surface(const Binned2d& raw, double bw, const Grid& grid,
                                   std::size_t work_grid_max = 101, Exec exec = Exec::parallel);

Eigen::MatrixXd smooth_cov_surface(const std::vector<RawCovariance>& raw, double bw, const Grid& grid,
                                   std::size_t work_grid_max = 101, Exec exec = Exec::parallel);

/// max(0, mean over the interior two quartiles of [V(t) - G(t,t)]) where V is
/// the 1-D smooth of squared residuals.
double estimate_sigma2(const std::vector<GriddedSubject>& gridded, std::span<const double> mean,
                       const Eigen::MatrixXd& cov, const Grid& grid, double bw,
                       Exec exec = Exec::parallel);

struct Spectrum {
  std::vector<double> eigenvalues;    // descending, > 0
  Eigen::MatrixXd eigenfunctions;     // G x r, quadrature-orthonormal columns
};

/// Quadrature-weighted eigenproblem of the covariance operator. Nonpositive
/// (and numerically zero) eigenvalues are discarded; each eigenfunction is
/// signed so that its integral is >= 0.
Spectrum eigendecompose(const Eigen::MatrixXd& cov, const Grid& grid);

/// Smallest p whose cumulative explained fraction reaches the threshold.
std::size_t select_p(std::span<const double> eigenvalues, double fve_threshold);

struct SmoothingReport {
  std::string kernel = "epanechnikov";
  double bw_mean = 0.0;
  double bw_cov = 0.0;
  bool bw_mean_auto = false;
  bool bw_cov_auto = false;
  std::size_t work_grid = 0;
};

struct FpcaModel {
  Grid grid;
  std::vector<double> mean;
  Eigen::MatrixXd cov;            // smoothed surface; empty after deserialization
  double sigma2 = 0.0;
  std::vector<double> eigenvalues;  // all retained positive eigenvalues
  Eigen::MatrixXd eigenfunctions;   // G x eigenvalues.size()
  double fve_threshold = 0.95;
  std::size_t p = 0;
  SmoothingReport smoothing;

  double total_variance() const;
  double fve_achieved() const;
};

struct FpcaOptions {
  double fve_threshold = 0.95;
  std::optional<double> bw_mean;  // GCV over the default ladder when unset
  std::optional<double> bw_cov;
  std::size_t work_grid_max = 101;
  int ladder_size = 10;
};

/// Default bandwidth ladder: 1.5 * median gap of the pooled abscissae to (b - a) / 4.
std::vector<double> default_bandwidth_ladder(const Binned1d& pooled, const Grid& grid, int n);

FpcaModel fit_fpca(const std::vector<GriddedSubject>& gridded, const Grid& grid,
                   const FpcaOptions& options, Exec exec = Exec::parallel);

/// Throws contract error unless eigenfunctions are quadrature-orthonormal
/// within tol and eigenvalues are positive and nonincreasing.
void check_fpca_invariants(const FpcaModel& model, double tol = 1e-8);

std::vector<double> scores_riemann(const GriddedSubject& subject, const FpcaModel& model);
std::vector<double> scores_conditional(const GriddedSubject& subject, const FpcaModel& model);

/// mu(t) + sum nu_m xi_m(t), linear interpolation between nodes.
double reconstruct(std::span<const double> scores, const FpcaModel& model, double t);

enum class ScoreMethod { riemann, conditional };

std::string to_string(ScoreMethod method);
ScoreMethod parse_score_method(const std::string& text);

/// N x p matrix in subject order.
Eigen::MatrixXd score_matrix(const std::vector<GriddedSubject>& gridded, const FpcaModel& model,
                             ScoreMethod method, Exec exec = Exec::parallel);

/// sum_g w_g f_g g_g.
double quad_inner(std::span<const double> f, std::span<const double> g, const Grid& grid);

double l2_distance(std::span<const double> f, std::span<const double> g, const Grid& grid);

}  // namespace frsf
