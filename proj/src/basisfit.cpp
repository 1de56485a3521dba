#include "frsf/basisfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frsf/error.hpp"

namespace frsf {

void BasisConfig::validate() const {
  if (order < 2) throw Error(ErrorKind::parameter, "spline order must be >= 2");
  if (k_min < order) throw Error(ErrorKind::parameter, "k_min must be >= spline order");
  if (k_min > k_max) throw Error(ErrorKind::parameter, "k_min must be <= k_max");
}

std::vector<double> clamped_knots(double a, double b, int basis_dim, int order) {
  if (order < 1 || basis_dim < order) {
    throw Error(ErrorKind::parameter, "basis dimension must be >= spline order");
  }
  if (!(a < b)) throw Error(ErrorKind::domain, "knot span must satisfy a < b");
  const int interior = basis_dim - order;
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(basis_dim + order));
  knots.insert(knots.end(), static_cast<std::size_t>(order), a);
  for (int k = 1; k <= interior; ++k) {
    knots.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(interior + 1));
  }
  knots.insert(knots.end(), static_cast<std::size_t>(order), b);
  return knots;
}

Eigen::MatrixXd bspline_design(std::span<const double> knots, int order,
                               std::span<const double> times) {
  const int n_knots = static_cast<int>(knots.size());
  const int k_dim = n_knots - order;
  if (order < 1 || k_dim < 1) throw Error(ErrorKind::parameter, "invalid knot vector for order");
  for (int i = 1; i < n_knots; ++i) {
    if (knots[i] < knots[i - 1]) throw Error(ErrorKind::parameter, "knots must be nondecreasing");
  }
  const double lo = knots[order - 1];
  const double hi = knots[k_dim];
  if (!(lo < hi)) throw Error(ErrorKind::parameter, "knot vector has an empty span");
  const int degree = order - 1;

  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), k_dim);
  std::vector<double> basis(static_cast<std::size_t>(order));
  std::vector<double> left(static_cast<std::size_t>(order));
  std::vector<double> right(static_cast<std::size_t>(order));
  for (std::size_t r = 0; r < times.size(); ++r) {
    const double t = times[r];
    if (!(t >= lo && t <= hi)) {
      throw Error(ErrorKind::domain, "time outside the knot span");
    }
    // Span index s with knots[s] <= t < knots[s+1]; the right end closes the last span.
    int span;
    if (t >= hi) {
      span = k_dim - 1;
      while (knots[span] >= hi) --span;
    } else {
      span = static_cast<int>(std::upper_bound(knots.begin() + degree, knots.begin() + k_dim + 1, t) -
                              knots.begin()) - 1;
    }
    // Triangular Cox-de Boor evaluation of the order nonzero functions.
    basis[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = t - knots[span + 1 - j];
      right[j] = knots[span + j] - t;
      double saved = 0.0;
      for (int k = 0; k < j; ++k) {
        const double temp = basis[k] / (right[k + 1] + left[j - k]);
        basis[k] = saved + right[k + 1] * temp;
        saved = left[j - k] * temp;
      }
      basis[j] = saved;
    }
    for (int k = 0; k <= degree; ++k) design(static_cast<Eigen::Index>(r), span - degree + k) = basis[k];
  }
  return design;
}

Eigen::VectorXd ls_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.rows() == 0 || design.cols() == 0 || y.size() == 0) {
    throw Error(ErrorKind::dimension, "least squares on empty input");
  }
  if (design.rows() != y.size()) {
    throw Error(ErrorKind::dimension, "design rows and response length differ");
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  return cod.solve(y);
}

double loocv_error_refit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  const Eigen::Index n = design.rows();
  if (n < 2) throw Error(ErrorKind::dimension, "LOOCV needs at least two observations");
  double total = 0.0;
  Eigen::MatrixXd sub(n - 1, design.cols());
  Eigen::VectorXd ysub(n - 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0, r = 0; i < n; ++i) {
      if (i == j) continue;
      sub.row(r) = design.row(i);
      ysub(r) = y(i);
      ++r;
    }
    const Eigen::VectorXd c = ls_fit(sub, ysub);
    const double resid = y(j) - design.row(j).dot(c);
    total += resid * resid;
  }
  return total;
}

double loocv_error(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (n > k) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == k) {
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
      const Eigen::VectorXd leverage = q.rowwise().squaredNorm();
      if (leverage.maxCoeff() < 1.0 - 1e-8) {
        const Eigen::VectorXd resid = y - design * qr.solve(y);
        double total = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double e = resid(j) / (1.0 - leverage(j));
          total += e * e;
        }
        return total;
      }
    }
  }
  return loocv_error_refit(design, y);
}

namespace {

struct SeriesView {
  std::vector<double> times;
  Eigen::VectorXd values;
};

SeriesView view_of(const SubjectSeries& series) {
  SeriesView v;
  v.values.resize(static_cast<Eigen::Index>(series.observations.size()));
  for (std::size_t j = 0; j < series.observations.size(); ++j) {
    v.times.push_back(series.observations[j].time);
    v.values(static_cast<Eigen::Index>(j)) = series.observations[j].value;
  }
  for (std::size_t j = 1; j < v.times.size(); ++j) {
    if (!(v.times[j] > v.times[j - 1])) {
      throw Error(ErrorKind::degenerate_series,
                  "subject '" + series.id + "' has non-increasing observation times");
    }
  }
  return v;
}

}  // namespace

int select_k_loocv(const SubjectSeries& series, double domain_start, const BasisConfig& config) {
  config.validate();
  const SeriesView v = view_of(series);
  const int j_count = static_cast<int>(v.times.size());
  const int k_hi = std::min(config.k_max, j_count);
  const int k_lo = std::min(config.k_min, k_hi);
  if (j_count < 2 || k_lo < config.order) {
    throw Error(ErrorKind::degenerate_series,
                "subject '" + series.id + "' has too few observations for LOOCV");
  }
  const double tie_tol = 1e-10 * std::max(v.values.squaredNorm(), std::numeric_limits<double>::min());
  int best_k = 0;
  double best_cv = std::numeric_limits<double>::infinity();
  for (int k = k_lo; k <= k_hi; ++k) {
    const auto knots = clamped_knots(domain_start, series.event_time, k, config.order);
    const Eigen::MatrixXd design = bspline_design(knots, config.order, v.times);
    const double cv = loocv_error(design, v.values);
    if (!std::isfinite(cv)) continue;
    if (best_k == 0 || cv < best_cv - tie_tol) {
      best_k = k;
      best_cv = cv;
    }
  }
  if (best_k == 0) {
    throw Error(ErrorKind::degenerate_series,
                "subject '" + series.id + "': every candidate basis fit is singular");
  }
  return best_k;
}

CfdCurve fit_cfd(const SubjectSeries& series, double domain_start, const BasisConfig& config) {
  config.validate();
  if (series.observations.empty()) {
    throw Error(ErrorKind::missing_series, "subject '" + series.id + "' has no observations");
  }
  const SeriesView v = view_of(series);
  CfdCurve curve;
  curve.subject_id = series.id;
  curve.domain_start = domain_start;
  curve.domain_end = series.event_time;
  const int j_count = static_cast<int>(v.times.size());
  if (j_count == 1) {
    curve.kind = CurveKind::constant;
    curve.value = v.values(0);
    return curve;
  }
  if (j_count == 2) {
    curve.kind = CurveKind::linear;
    curve.beta1 = (v.values(1) - v.values(0)) / (v.times[1] - v.times[0]);
    curve.beta0 = v.values(0) - curve.beta1 * v.times[0];
    return curve;
  }
  int order = config.order;
  int k;
  if (j_count >= config.order + 1) {
    k = select_k_loocv(series, domain_start, config);
  } else {
    // Too few points for the configured order: drop the order to J.
    order = std::min(config.order, j_count);
    k = order;
  }
  curve.kind = CurveKind::spline;
  curve.order = order;
  curve.k_selected = k;
  curve.knots = clamped_knots(domain_start, series.event_time, k, order);
  const Eigen::MatrixXd design = bspline_design(curve.knots, order, v.times);
  const Eigen::VectorXd c = ls_fit(design, v.values);
  curve.coefficients.assign(c.data(), c.data() + c.size());
  return curve;
}

double eval_curve(const CfdCurve& curve, double t) {
  if (!(t >= curve.domain_start && t <= curve.domain_end)) {
    throw Error(ErrorKind::truncation_domain,
                "curve '" + curve.subject_id + "' is defined only on [" +
                    format_real(curve.domain_start) + ", " + format_real(curve.domain_end) +
                    "], asked at " + format_real(t));
  }
  switch (curve.kind) {
    case CurveKind::constant:
      return curve.value;
    case CurveKind::linear:
      return curve.beta0 + curve.beta1 * t;
    case CurveKind::spline: {
      const double at[1] = {t};
      const Eigen::MatrixXd row = bspline_design(curve.knots, curve.order, at);
      double sum = 0.0;
      for (Eigen::Index k = 0; k < row.cols(); ++k) sum += row(0, k) * curve.coefficients[static_cast<std::size_t>(k)];
      return sum;
    }
  }
  return 0.0;
}

std::vector<CfdCurve> fit_cfd_all(const Dataset& dataset, const BasisConfig& config, Exec exec) {
  std::vector<CfdCurve> curves(dataset.size());
  for_each_index(dataset.size(), exec, [&](std::size_t i) {
    try {
      curves[i] = fit_cfd(dataset.subjects[i], dataset.domain.a, config);
    } catch (const Error& e) {
      throw e.with_context("subject '" + dataset.subjects[i].id + "'");
    }
  });
  return curves;
}

}  // namespace frsf
