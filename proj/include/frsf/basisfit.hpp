#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "frsf/exec.hpp"
#include "frsf/longdata.hpp"

namespace frsf {

struct BasisConfig {
  int order = 4;   // spline order (degree + 1)
  int k_min = 4;   // smallest basis dimension tried by LOOCV
  int k_max = 15;  // largest basis dimension tried (further capped by J_i)

  void validate() const;
};

enum class CurveKind { constant, linear, spline };

/// A reconstructed censored functional datum, defined only on
/// [domain_start, domain_end] where domain_end is the subject's T*.
struct CfdCurve {
  std::string subject_id;
  double domain_start = 0.0;
  double domain_end = 0.0;
  CurveKind kind = CurveKind::constant;
  double value = 0.0;                 // constant
  double beta0 = 0.0, beta1 = 0.0;    // linear: beta0 + beta1 * t
  std::vector<double> knots;          // spline
  int order = 0;                      // spline
  std::vector<double> coefficients;   // spline
  int k_selected = 0;                 // basis dimension; 0 for constant/linear
};

/// Clamped knot vector on [a, b] with equally spaced interior knots;
/// length basis_dim + order.
std::vector<double> clamped_knots(double a, double b, int basis_dim, int order);

/// Row i holds the K basis functions evaluated at times[i].
Eigen::MatrixXd bspline_design(std::span<const double> knots, int order,
                               std::span<const double> times);

/// Least-squares coefficients via complete orthogonal decomposition
/// (minimum-norm when the design is rank deficient or underdetermined).
Eigen::VectorXd ls_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// Leave-one-observation-out prediction error sum for a design. Uses the
/// hat-matrix identity when the design has full column rank and no leverage
/// is ~1, otherwise refits without each point.
double loocv_error(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// Same quantity computed only by explicit refits; reference for tests.
double loocv_error_refit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// Basis dimension minimizing LOOCV error over [k_min, min(k_max, J)],
/// ties toward smaller K. domain_start is the follow-up start a.
int select_k_loocv(const SubjectSeries& series, double domain_start, const BasisConfig& config);

CfdCurve fit_cfd(const SubjectSeries& series, double domain_start, const BasisConfig& config);

/// Throws truncation-domain outside [domain_start, domain_end].
double eval_curve(const CfdCurve& curve, double t);

std::vector<CfdCurve> fit_cfd_all(const Dataset& dataset, const BasisConfig& config,
                                  Exec exec = Exec::parallel);

}  // namespace frsf
