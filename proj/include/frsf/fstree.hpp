#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frsf/rng.hpp"
#include "frsf/survstats.hpp"

namespace frsf {

/// Split candidates (score columns then scalar covariates) with outcomes.
/// columns[f][i] is feature f of row i.
struct FeatureFrame {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<double> time;
  std::vector<bool> event;

  std::size_t rows() const { return time.size(); }
  std::size_t features() const { return names.size(); }
  std::vector<double> row(std::size_t i) const;
  /// Index of the named feature, or name error.
  std::size_t feature_index(const std::string& name) const;
  void validate() const;
};

struct TreeParams {
  int q = 1;                  // features drawn per node
  int min_node_events = 1;    // per daughter
  int min_node_size = 6;      // nodes smaller than this are not split
  int max_depth = -1;         // negative = unlimited
  int n_split_candidates = 10;
  std::uint64_t seed = 0;

  void validate(std::size_t n_features) const;
};

/// Training row with its bootstrap multiplicity.
struct WeightedRow {
  std::size_t row = 0;
  double weight = 1.0;
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double stat = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  int depth = 0;
  // leaf payload
  RiskTable risk;
  StepFunction chf;
  StepFunction survival;
  std::vector<std::size_t> members;  // distinct training rows in the leaf

  bool is_leaf() const { return feature < 0; }
};

struct SurvivalTree {
  std::vector<TreeNode> nodes;  // root at 0
  std::vector<std::string> feature_names;
  TreeParams params;

  /// Node index of the leaf x falls in (x_f <= c goes left).
  std::size_t leaf_of(std::span<const double> x) const;
  std::size_t leaf_count() const;
};

/// Best log-rank split of `rows` over the candidate features (visited in the
/// given order; thresholds ascending; first maximum kept). Thresholds are
/// distinct observed values other than the largest, drawn by rank.
std::optional<Split> best_split(const FeatureFrame& frame, std::span<const WeightedRow> rows,
                                std::span<const std::size_t> candidate_features, const TreeParams& params,
                                Rng& rng);

SurvivalTree grow_tree(const FeatureFrame& frame, const TreeParams& params);
SurvivalTree grow_tree(const FeatureFrame& frame, std::span<const WeightedRow> rows, const TreeParams& params);

const StepFunction& predict_chf(const SurvivalTree& tree, std::span<const double> x);
const StepFunction& predict_survival(const SurvivalTree& tree, std::span<const double> x);

/// Rebuilds a leaf's estimators from its risk table.
void finalize_leaf(TreeNode& node);

}  // namespace frsf
