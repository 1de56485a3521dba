#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "frsf/exec.hpp"
#include "frsf/fstree.hpp"

namespace frsf {

struct ForestParams {
  int n_trees = 500;
  int q = 0;  // 0 = ceil(sqrt(#features))
  TreeParams tree;
  std::uint64_t seed = 0;

  int resolved_q(std::size_t n_features) const;
  void validate(std::size_t n_features) const;
};

struct Forest {
  std::vector<SurvivalTree> trees;
  std::vector<std::vector<int>> inbag;  // per tree, multiplicity of each training row
  std::vector<std::string> feature_names;
  std::vector<double> event_times;  // distinct training event times
  ForestParams params;              // q resolved
  std::size_t n_train = 0;
  /// Per tree and node: sum of the leaf CHF over event_times (unused for internal nodes).
  std::vector<std::vector<double>> leaf_mortality;

  std::size_t size() const { return trees.size(); }
  bool is_oob(std::size_t tree, std::size_t row) const { return inbag[tree][row] == 0; }
  /// Recomputes leaf_mortality from the trees and event_times.
  void refresh_cache();
};

Forest fit_forest(const FeatureFrame& frame, const ForestParams& params, Exec exec = Exec::parallel);

/// Training rows that are in-bag for every tree.
std::vector<std::size_t> never_oob(const Forest& forest);

/// Pointwise average of step functions on the union of their knots.
StepFunction average_steps(std::span<const StepFunction* const> fs);

StepFunction ensemble_chf_ib(const Forest& forest, std::span<const double> x);
StepFunction ensemble_chf_oob(const Forest& forest, const FeatureFrame& frame, std::size_t subject);

/// Sum of the CHF over eval_times.
double predict_mortality(const StepFunction& chf, std::span<const double> eval_times);

/// In-bag ensemble mortality of x from the leaf cache (trees summed in index order).
double mortality_ib(const Forest& forest, std::span<const double> x);

/// OOB mortality per training row; NaN where a row is never OOB.
std::vector<double> oob_mortality(const Forest& forest, const FeatureFrame& frame);

/// Row i, column k: OOB ensemble CHF of row i at times[k]; NaN rows where never OOB.
Eigen::MatrixXd oob_chf_at(const Forest& forest, const FeatureFrame& frame, std::span<const double> times,
                           Exec exec = Exec::parallel);

/// 1 - Harrell C of OOB mortalities over rows OOB at least once.
double oob_error(const Forest& forest, const FeatureFrame& frame);

/// OOB error using only the first b trees, for b = 1..B. NaN where the
/// concordance is undefined for that prefix.
std::vector<double> oob_error_curve(const Forest& forest, const FeatureFrame& frame, Exec exec = Exec::parallel);

/// Mean increase in OOB error when `feature` is permuted among each tree's OOB rows.
double vimp_permutation(const Forest& forest, const FeatureFrame& frame, const std::string& feature,
                        int n_repeats, std::uint64_t seed);

struct VimpRow {
  std::string feature;
  double importance = 0.0;
  double relative_importance = 0.0;  // NaN when undefined
};

struct VimpTable {
  std::vector<VimpRow> rows;      // descending importance
  bool relative_defined = true;   // false when no importance is positive
  std::string to_csv() const;
};

VimpTable vimp_table(const Forest& forest, const FeatureFrame& frame, int n_repeats, std::uint64_t seed,
                     Exec exec = Exec::parallel);

}  // namespace frsf
