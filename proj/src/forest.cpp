#include "frsf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "frsf/error.hpp"
#include "frsf/longdata.hpp"
#include "frsf/metrics.hpp"

namespace frsf {

namespace {
constexpr int kMaxBootstrapAttempts = 100;
constexpr std::uint64_t kTreeStream = 0x74726565;  // separates tree seeds from bootstrap streams
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

int ForestParams::resolved_q(std::size_t n_features) const {
  if (q > 0) return q;
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_features))));
}

void ForestParams::validate(std::size_t n_features) const {
  if (n_trees < 1) throw Error(ErrorKind::parameter, "number of trees must be >= 1");
  if (q < 0) throw Error(ErrorKind::parameter, "mtry must be >= 1 (or 0 for the default)");
  TreeParams t = tree;
  t.q = resolved_q(n_features);
  t.validate(n_features);
}

void Forest::refresh_cache() {
  leaf_mortality.assign(trees.size(), {});
  for (std::size_t b = 0; b < trees.size(); ++b) {
    auto& cache = leaf_mortality[b];
    cache.assign(trees[b].nodes.size(), 0.0);
    for (std::size_t k = 0; k < trees[b].nodes.size(); ++k) {
      if (trees[b].nodes[k].is_leaf()) cache[k] = predict_mortality(trees[b].nodes[k].chf, event_times);
    }
  }
}

Forest fit_forest(const FeatureFrame& frame, const ForestParams& params, Exec exec) {
  frame.validate();
  params.validate(frame.features());
  const std::size_t n = frame.rows();
  if (n == 0) throw Error(ErrorKind::empty_sample, "no training rows");
  if (std::none_of(frame.event.begin(), frame.event.end(), [](bool e) { return e; })) {
    throw Error(ErrorKind::unlearnable, "no events in the training data");
  }
  Forest forest;
  forest.params = params;
  forest.params.q = params.resolved_q(frame.features());
  forest.feature_names = frame.names;
  forest.n_train = n;
  forest.event_times = risk_table(frame.time, frame.event).event_times;
  const auto B = static_cast<std::size_t>(params.n_trees);
  forest.trees.resize(B);
  forest.inbag.resize(B);

  for_each_index(B, exec, [&](std::size_t b) {
    Rng rng(derive_seed({params.seed, static_cast<std::uint64_t>(b)}));
    std::vector<int> counts;
    bool has_event = false;
    for (int attempt = 0; attempt < kMaxBootstrapAttempts && !has_event; ++attempt) {
      counts.assign(n, 0);
      for (std::size_t k = 0; k < n; ++k) ++counts[rng.index(n)];
      for (std::size_t i = 0; i < n && !has_event; ++i) has_event = counts[i] > 0 && frame.event[i];
    }
    if (!has_event) {
      throw Error(ErrorKind::unlearnable, "every bootstrap sample for tree " + std::to_string(b) +
                                              " had zero events");
    }
    std::vector<WeightedRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[i] > 0) rows.push_back({i, static_cast<double>(counts[i])});
    }
    TreeParams tp = forest.params.tree;
    tp.q = forest.params.q;
    tp.seed = derive_seed({params.seed, static_cast<std::uint64_t>(b), kTreeStream});
    forest.trees[b] = grow_tree(frame, rows, tp);
    forest.inbag[b] = std::move(counts);
  });
  forest.refresh_cache();
  return forest;
}

std::vector<std::size_t> never_oob(const Forest& forest) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < forest.n_train; ++i) {
    bool oob = false;
    for (std::size_t b = 0; b < forest.size() && !oob; ++b) oob = forest.is_oob(b, i);
    if (!oob) out.push_back(i);
  }
  return out;
}

StepFunction average_steps(std::span<const StepFunction* const> fs) {
  StepFunction out;
  if (fs.empty()) return out;
  for (const auto* f : fs) out.knots.insert(out.knots.end(), f->knots.begin(), f->knots.end());
  std::sort(out.knots.begin(), out.knots.end());
  out.knots.erase(std::unique(out.knots.begin(), out.knots.end()), out.knots.end());
  // Mean as first + mean deviation from it, so B copies of one function
  // average to that function bit for bit.
  const double count = static_cast<double>(fs.size());
  const StepFunction& first = *fs.front();
  std::vector<double> anchor(out.knots.size());
  for (std::size_t k = 0; k < out.knots.size(); ++k) anchor[k] = first.evaluate(out.knots[k]);
  out.values.assign(out.knots.size(), 0.0);
  double left = 0.0;
  for (const auto* f : fs) {
    left += f->left_value - first.left_value;
    for (std::size_t k = 0; k < out.knots.size(); ++k) out.values[k] += f->evaluate(out.knots[k]) - anchor[k];
  }
  out.left_value = first.left_value + left / count;
  for (std::size_t k = 0; k < out.knots.size(); ++k) out.values[k] = anchor[k] + out.values[k] / count;
  return out;
}

StepFunction ensemble_chf_ib(const Forest& forest, std::span<const double> x) {
  std::vector<const StepFunction*> fs;
  fs.reserve(forest.size());
  for (const auto& tree : forest.trees) fs.push_back(&predict_chf(tree, x));
  return average_steps(fs);
}

StepFunction ensemble_chf_oob(const Forest& forest, const FeatureFrame& frame, std::size_t subject) {
  if (subject >= forest.n_train || subject >= frame.rows()) {
    throw Error(ErrorKind::dimension, "subject index out of range");
  }
  const auto x = frame.row(subject);
  std::vector<const StepFunction*> fs;
  for (std::size_t b = 0; b < forest.size(); ++b) {
    if (forest.is_oob(b, subject)) fs.push_back(&predict_chf(forest.trees[b], x));
  }
  if (fs.empty()) {
    throw Error(ErrorKind::coverage, "subject " + std::to_string(subject) +
                                         " is in-bag for every tree; increase the number of trees");
  }
  return average_steps(fs);
}

double predict_mortality(const StepFunction& chf, std::span<const double> eval_times) {
  if (eval_times.empty()) throw Error(ErrorKind::parameter, "mortality needs at least one evaluation time");
  double sum = 0.0;
  for (double t : eval_times) sum += chf.evaluate(t);
  return sum;
}

double mortality_ib(const Forest& forest, std::span<const double> x) {
  double sum = 0.0;
  for (std::size_t b = 0; b < forest.size(); ++b) sum += forest.leaf_mortality[b][forest.trees[b].leaf_of(x)];
  return sum / static_cast<double>(forest.size());
}

namespace {

// Shared by the baseline and permuted paths so unchanged routes give identical bits.
std::vector<double> finish_mean(const std::vector<double>& sum, const std::vector<int>& count) {
  std::vector<double> out(sum.size(), kNaN);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] > 0) out[i] = sum[i] / count[i];
  }
  return out;
}

// Leaf reached by row i when feature f takes value v (f < 0: unmodified row).
std::size_t route(const SurvivalTree& tree, const FeatureFrame& frame, std::size_t i, long f, double v) {
  std::size_t k = 0;
  while (!tree.nodes[k].is_leaf()) {
    const auto& n = tree.nodes[k];
    const double x = n.feature == f ? v : frame.columns[static_cast<std::size_t>(n.feature)][i];
    k = static_cast<std::size_t>(x <= n.threshold ? n.left : n.right);
  }
  return k;
}

double error_of(const std::vector<double>& mortality, const FeatureFrame& frame) {
  std::vector<double> m, t;
  std::vector<bool> e;
  for (std::size_t i = 0; i < mortality.size(); ++i) {
    if (std::isnan(mortality[i])) continue;
    m.push_back(mortality[i]);
    t.push_back(frame.time[i]);
    e.push_back(frame.event[i]);
  }
  return 1.0 - concordance_index(m, t, e).c;
}

void check_frame(const Forest& forest, const FeatureFrame& frame) {
  if (frame.rows() != forest.n_train || frame.names != forest.feature_names) {
    throw Error(ErrorKind::dimension, "frame does not match the forest's training data");
  }
}

}  // namespace

std::vector<double> oob_mortality(const Forest& forest, const FeatureFrame& frame) {
  check_frame(forest, frame);
  std::vector<double> sum(frame.rows(), 0.0);
  std::vector<int> count(frame.rows(), 0);
  for (std::size_t b = 0; b < forest.size(); ++b) {
    for (std::size_t i = 0; i < frame.rows(); ++i) {
      if (!forest.is_oob(b, i)) continue;
      sum[i] += forest.leaf_mortality[b][route(forest.trees[b], frame, i, -1, 0.0)];
      ++count[i];
    }
  }
  return finish_mean(sum, count);
}

Eigen::MatrixXd oob_chf_at(const Forest& forest, const FeatureFrame& frame, std::span<const double> times,
                           Exec exec) {
  check_frame(forest, frame);
  const auto n = static_cast<Eigen::Index>(frame.rows());
  const auto k = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, k);
  for_each_index(frame.rows(), exec, [&](std::size_t i) {
    int count = 0;
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t b = 0; b < forest.size(); ++b) {
      if (!forest.is_oob(b, i)) continue;
      const auto& chf = forest.trees[b].nodes[route(forest.trees[b], frame, i, -1, 0.0)].chf;
      for (Eigen::Index c = 0; c < k; ++c) out(row, c) += chf.evaluate(times[static_cast<std::size_t>(c)]);
      ++count;
    }
    if (count == 0) {
      out.row(row).setConstant(kNaN);
    } else {
      out.row(row) /= static_cast<double>(count);
    }
  });
  return out;
}

double oob_error(const Forest& forest, const FeatureFrame& frame) {
  return error_of(oob_mortality(forest, frame), frame);
}

std::vector<double> oob_error_curve(const Forest& forest, const FeatureFrame& frame, Exec exec) {
  check_frame(forest, frame);
  const std::size_t n = frame.rows();
  // leaf mortality of each (tree, row) pair, computed once
  std::vector<std::vector<double>> contrib(forest.size(), std::vector<double>(n, kNaN));
  for_each_index(forest.size(), exec, [&](std::size_t b) {
    for (std::size_t i = 0; i < n; ++i) {
      if (forest.is_oob(b, i)) contrib[b][i] = forest.leaf_mortality[b][route(forest.trees[b], frame, i, -1, 0.0)];
    }
  });
  std::vector<std::vector<double>> prefix_mortality(forest.size());
  std::vector<double> sum(n, 0.0);
  std::vector<int> count(n, 0);
  for (std::size_t b = 0; b < forest.size(); ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(contrib[b][i])) continue;
      sum[i] += contrib[b][i];
      ++count[i];
    }
    prefix_mortality[b] = finish_mean(sum, count);
  }
  std::vector<double> curve(forest.size(), kNaN);
  for_each_index(forest.size(), exec, [&](std::size_t b) {
    try {
      curve[b] = error_of(prefix_mortality[b], frame);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::undefined_concordance) throw;
    }
  });
  return curve;
}

namespace {

double permuted_error(const Forest& forest, const FeatureFrame& frame, std::size_t f, int repeat,
                      std::uint64_t seed) {
  const std::size_t n = frame.rows();
  std::vector<double> sum(n, 0.0);
  std::vector<int> count(n, 0);
  std::vector<std::size_t> oob;
  std::vector<double> values;
  for (std::size_t b = 0; b < forest.size(); ++b) {
    oob.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (forest.is_oob(b, i)) oob.push_back(i);
    }
    if (oob.empty()) continue;
    values.resize(oob.size());
    for (std::size_t k = 0; k < oob.size(); ++k) values[k] = frame.columns[f][oob[k]];
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(repeat)}));
    rng.shuffle(values);
    for (std::size_t k = 0; k < oob.size(); ++k) {
      const std::size_t i = oob[k];
      sum[i] += forest.leaf_mortality[b][route(forest.trees[b], frame, i, static_cast<long>(f), values[k])];
      ++count[i];
    }
  }
  return error_of(finish_mean(sum, count), frame);
}

}  // namespace

double vimp_permutation(const Forest& forest, const FeatureFrame& frame, const std::string& feature,
                        int n_repeats, std::uint64_t seed) {
  check_frame(forest, frame);
  if (n_repeats < 1) throw Error(ErrorKind::parameter, "VIMP repeats must be >= 1");
  const std::size_t f = frame.feature_index(feature);
  const double base = oob_error(forest, frame);
  double total = 0.0;
  for (int r = 0; r < n_repeats; ++r) total += permuted_error(forest, frame, f, r, seed) - base;
  return total / n_repeats;
}

VimpTable vimp_table(const Forest& forest, const FeatureFrame& frame, int n_repeats, std::uint64_t seed,
                     Exec exec) {
  check_frame(forest, frame);
  if (n_repeats < 1) throw Error(ErrorKind::parameter, "VIMP repeats must be >= 1");
  const double base = oob_error(forest, frame);
  const std::size_t nf = frame.features();
  const auto reps = static_cast<std::size_t>(n_repeats);
  std::vector<double> errors(nf * reps);
  for_each_index(errors.size(), exec, [&](std::size_t task) {
    errors[task] = permuted_error(forest, frame, task / reps, static_cast<int>(task % reps), seed);
  });
  VimpTable table;
  for (std::size_t f = 0; f < nf; ++f) {
    double total = 0.0;
    for (std::size_t r = 0; r < reps; ++r) total += errors[f * reps + r] - base;
    table.rows.push_back({frame.names[f], total / n_repeats, kNaN});
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const VimpRow& x, const VimpRow& y) { return x.importance > y.importance; });
  const double top = table.rows.front().importance;
  table.relative_defined = top > 0.0;
  if (table.relative_defined) {
    for (auto& row : table.rows) row.relative_importance = row.importance / top;
  }
  return table;
}

std::string VimpTable::to_csv() const {
  std::ostringstream out;
  out << "variable,importance,relative_importance\n";
  for (const auto& r : rows) {
    out << r.feature << ',' << format_real(r.importance) << ','
        << (relative_defined ? format_real(r.relative_importance) : std::string("NA")) << '\n';
  }
  return out.str();
}

}  // namespace frsf
