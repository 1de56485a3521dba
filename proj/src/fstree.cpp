#include "frsf/fstree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "frsf/error.hpp"

namespace frsf {

std::vector<double> FeatureFrame::row(std::size_t i) const {
  std::vector<double> x(columns.size());
  for (std::size_t f = 0; f < columns.size(); ++f) x[f] = columns[f][i];
  return x;
}

std::size_t FeatureFrame::feature_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::name, "unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

void FeatureFrame::validate() const {
  if (names.size() != columns.size()) throw Error(ErrorKind::dimension, "feature names and columns differ");
  if (names.empty()) throw Error(ErrorKind::dimension, "feature frame has no features");
  if (event.size() != time.size()) throw Error(ErrorKind::dimension, "times and events differ in length");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw Error(ErrorKind::name, "duplicate feature name '" + n + "'");
  }
  for (std::size_t f = 0; f < columns.size(); ++f) {
    if (columns[f].size() != time.size()) {
      throw Error(ErrorKind::dimension, "feature '" + names[f] + "' has the wrong number of rows");
    }
    for (double v : columns[f]) {
      if (!std::isfinite(v)) throw Error(ErrorKind::input, "feature '" + names[f] + "' has a non-finite value");
    }
  }
  for (double t : time) {
    if (!std::isfinite(t)) throw Error(ErrorKind::input, "non-finite survival time");
  }
}

void TreeParams::validate(std::size_t n_features) const {
  if (q < 1 || static_cast<std::size_t>(q) > n_features) {
    throw Error(ErrorKind::parameter, "mtry must lie in [1, number of features]");
  }
  if (min_node_events < 1) throw Error(ErrorKind::parameter, "min_node_events must be >= 1");
  if (min_node_size < 2) throw Error(ErrorKind::parameter, "min_node_size must be >= 2");
  if (n_split_candidates < 1) throw Error(ErrorKind::parameter, "nsplit must be >= 1");
}

std::size_t SurvivalTree::leaf_of(std::span<const double> x) const {
  if (x.size() != feature_names.size()) {
    throw Error(ErrorKind::dimension, "feature vector length does not match the tree");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::input, "feature value is not finite");
  }
  std::size_t k = 0;
  while (!nodes[k].is_leaf()) {
    const auto& n = nodes[k];
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return k;
}

std::size_t SurvivalTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) {
    return n.is_leaf();
  }));
}

namespace {

double weighted_events(const FeatureFrame& frame, std::span<const WeightedRow> rows) {
  double e = 0.0;
  for (const auto& r : rows) {
    if (frame.event[r.row]) e += r.weight;
  }
  return e;
}

double weighted_size(std::span<const WeightedRow> rows) {
  double s = 0.0;
  for (const auto& r : rows) s += r.weight;
  return s;
}

}  // namespace

std::optional<Split> best_split(const FeatureFrame& frame, std::span<const WeightedRow> rows,
                                std::span<const std::size_t> candidate_features, const TreeParams& params,
                                Rng& rng) {
  if (rows.size() < 2) return std::nullopt;
  // Rows sorted by time once; group flags change per candidate.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return frame.time[rows[x].row] < frame.time[rows[y].row];
  });
  std::vector<SurvPoint> sorted(rows.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = rows[order[k]];
    sorted[k] = {frame.time[r.row], frame.event[r.row], r.weight};
  }
  const double min_events = params.min_node_events;
  const double total_events = weighted_events(frame, rows);
  std::vector<char> in_left(rows.size());

  std::optional<Split> best;
  for (std::size_t f : candidate_features) {
    const auto& col = frame.columns[f];
    std::vector<double> distinct;
    distinct.reserve(rows.size());
    for (const auto& r : rows) distinct.push_back(col[r.row]);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) continue;
    distinct.pop_back();  // the maximum sends every row left

    std::vector<double> thresholds;
    const auto cap = static_cast<std::size_t>(params.n_split_candidates);
    if (distinct.size() <= cap) {
      thresholds = distinct;
    } else {
      auto ranks = rng.sample_without_replacement(distinct.size(), cap);
      std::sort(ranks.begin(), ranks.end());
      for (std::size_t k : ranks) thresholds.push_back(distinct[k]);
    }
    for (double c : thresholds) {
      double left_events = 0.0;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& r = rows[order[k]];
        in_left[k] = col[r.row] <= c ? 1 : 0;
        if (in_left[k] && frame.event[r.row]) left_events += r.weight;
      }
      if (left_events < min_events || total_events - left_events < min_events) continue;
      const double stat = logrank_stat_sorted(sorted, in_left);
      if (!best || stat > best->stat) best = Split{f, c, stat};
    }
  }
  return best;
}

void finalize_leaf(TreeNode& node) {
  node.chf = nelson_aalen(node.risk);
  node.survival = kaplan_meier(node.risk);
}

namespace {

struct Grower {
  const FeatureFrame& frame;
  const TreeParams& params;
  SurvivalTree tree;

  int grow(std::vector<WeightedRow> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().depth = depth;
    Rng rng(derive_seed({params.seed, static_cast<std::uint64_t>(id)}));

    const bool depth_ok = params.max_depth < 0 || depth < params.max_depth;
    const bool size_ok = weighted_size(rows) >= params.min_node_size;
    const bool events_ok = weighted_events(frame, rows) >= 2.0 * params.min_node_events;
    std::optional<Split> split;
    if (depth_ok && size_ok && events_ok) {
      auto features = rng.sample_without_replacement(frame.features(), static_cast<std::size_t>(params.q));
      std::sort(features.begin(), features.end());
      split = best_split(frame, rows, features, params, rng);
    }
    if (!split) {
      TreeNode& leaf = tree.nodes[static_cast<std::size_t>(id)];
      std::vector<SurvPoint> pts;
      pts.reserve(rows.size());
      for (const auto& r : rows) {
        pts.push_back({frame.time[r.row], frame.event[r.row], r.weight});
        leaf.members.push_back(r.row);
      }
      std::sort(leaf.members.begin(), leaf.members.end());
      leaf.risk = risk_table(pts);
      finalize_leaf(leaf);
      return id;
    }
    std::vector<WeightedRow> left, right;
    const auto& col = frame.columns[split->feature];
    for (const auto& r : rows) (col[r.row] <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(split->feature);
    tree.nodes[static_cast<std::size_t>(id)].threshold = split->threshold;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

}  // namespace

SurvivalTree grow_tree(const FeatureFrame& frame, std::span<const WeightedRow> rows, const TreeParams& params) {
  frame.validate();
  params.validate(frame.features());
  if (rows.empty()) throw Error(ErrorKind::empty_sample, "cannot grow a tree on zero rows");
  for (const auto& r : rows) {
    if (r.row >= frame.rows() || !(r.weight > 0.0)) {
      throw Error(ErrorKind::input, "tree rows must index the frame with positive weight");
    }
  }
  if (weighted_events(frame, rows) <= 0.0) {
    throw Error(ErrorKind::unlearnable, "no events in the training rows");
  }
  Grower g{frame, params, {}};
  g.tree.feature_names = frame.names;
  g.tree.params = params;
  g.grow(std::vector<WeightedRow>(rows.begin(), rows.end()), 0);
  return std::move(g.tree);
}

SurvivalTree grow_tree(const FeatureFrame& frame, const TreeParams& params) {
  std::vector<WeightedRow> rows(frame.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {i, 1.0};
  return grow_tree(frame, rows, params);
}

const StepFunction& predict_chf(const SurvivalTree& tree, std::span<const double> x) {
  return tree.nodes[tree.leaf_of(x)].chf;
}

const StepFunction& predict_survival(const SurvivalTree& tree, std::span<const double> x) {
  return tree.nodes[tree.leaf_of(x)].survival;
}

}  // namespace frsf
