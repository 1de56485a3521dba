#include "doctest.h"

#include <cmath>

#include "frsf/error.hpp"
#include "frsf/forest.hpp"
#include "frsf/metrics.hpp"
#include "frsf/rng.hpp"
#include "oracles.hpp"

using namespace frsf;

namespace {

FeatureFrame sim_frame(std::size_t n, std::size_t n_noise, double gamma, std::uint64_t seed) {
  Rng rng(seed);
  FeatureFrame f;
  f.names.push_back("signal");
  for (std::size_t k = 0; k < n_noise; ++k) f.names.push_back("noise" + std::to_string(k));
  f.columns.assign(f.names.size(), {});
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& col : f.columns) col.push_back(rng.normal());
    const double t = rng.exponential(0.2 * std::exp(gamma * f.columns[0].back()));
    const double c = rng.uniform(0.0, 15.0);
    f.time.push_back(std::min(t, c));
    f.event.push_back(t <= c);
  }
  return f;
}

SurvivalTree leaf_tree(StepFunction chf) {
  SurvivalTree t;
  t.feature_names = {"x"};
  TreeNode n;
  n.chf = std::move(chf);
  t.nodes.push_back(n);
  return t;
}

Forest hand_forest(std::vector<StepFunction> chfs, std::vector<std::vector<int>> inbag, std::vector<double> ev) {
  Forest f;
  for (auto& c : chfs) f.trees.push_back(leaf_tree(std::move(c)));
  f.inbag = std::move(inbag);
  f.feature_names = {"x"};
  f.event_times = std::move(ev);
  f.n_train = f.inbag.front().size();
  f.refresh_cache();
  return f;
}

ForestParams params(int trees, std::uint64_t seed) {
  ForestParams p;
  p.n_trees = trees;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("one-tree forest is a tree grown on its bootstrap sample") {
  const auto f = sim_frame(80, 2, 1.0, 3);
  const auto forest = fit_forest(f, params(1, 11));
  REQUIRE(forest.size() == 1);
  std::vector<WeightedRow> rows;
  int total = 0;
  for (std::size_t i = 0; i < f.rows(); ++i) {
    total += forest.inbag[0][i];
    if (forest.inbag[0][i] > 0) rows.push_back({i, static_cast<double>(forest.inbag[0][i])});
  }
  CHECK(total == 80);
  TreeParams tp = forest.params.tree;
  tp.q = forest.params.q;
  tp.seed = derive_seed({11, 0, 0x74726565});
  const auto tree = grow_tree(f, rows, tp);
  REQUIRE(tree.nodes.size() == forest.trees[0].nodes.size());
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    CHECK(tree.nodes[k].feature == forest.trees[0].nodes[k].feature);
    CHECK(tree.nodes[k].threshold == forest.trees[0].nodes[k].threshold);
    CHECK(tree.nodes[k].members == forest.trees[0].nodes[k].members);
  }
}

TEST_CASE("mean OOB fraction for N = 500 over 50 trees") {
  const auto f = sim_frame(500, 1, 1.0, 4);
  ForestParams p = params(50, 5);
  p.tree.max_depth = 1;
  const auto forest = fit_forest(f, p);
  double oob = 0.0;
  for (std::size_t b = 0; b < forest.size(); ++b) {
    for (std::size_t i = 0; i < f.rows(); ++i) {
      oob += forest.is_oob(b, i) ? 1.0 : 0.0;
      CHECK(forest.inbag[b][i] >= 0);  // in-bag and OOB partition each tree's rows
    }
  }
  oob /= 50.0 * 500.0;
  CHECK(oob >= 0.35);
  CHECK(oob <= 0.39);
}

TEST_CASE("two hand-built trees average pointwise") {
  const auto forest = hand_forest({StepFunction{{1.0, 2.0}, {0.5, 1.5}, 0.0}, StepFunction{{1.5}, {1.0}, 0.0}},
                                  {{1, 0}, {0, 1}}, {1.0, 1.5, 2.0});
  const std::vector<double> x{0.0};
  const auto h = ensemble_chf_ib(forest, x);
  CHECK(h.evaluate(0.5) == 0.0);
  CHECK(h.evaluate(1.0) == 0.25);
  CHECK(h.evaluate(1.5) == 0.75);
  CHECK(h.evaluate(2.0) == 1.25);
  // 0.25 + 0.75 + 1.25 over the three event times
  CHECK(mortality_ib(forest, x) == doctest::Approx(2.25));
  CHECK(predict_mortality(h, forest.event_times) == doctest::Approx(2.25));
  for (std::size_t k = 1; k < h.values.size(); ++k) CHECK(h.values[k] >= h.values[k - 1]);
  // subject 0 is OOB only in tree 1, subject 1 only in tree 0
  FeatureFrame frame;
  frame.names = {"x"};
  frame.columns = {{0.0, 0.0}};
  frame.time = {1.0, 2.0};
  frame.event = {true, true};
  CHECK(ensemble_chf_oob(forest, frame, 0).evaluate(1.7) == 1.0);
  CHECK(ensemble_chf_oob(forest, frame, 1).evaluate(1.7) == 0.5);
}

TEST_CASE("copies of one tree average to that tree") {
  const StepFunction chf{{0.5, 1.0, 4.0}, {0.1, 0.4, 0.9}, 0.0};
  const auto forest = hand_forest({chf, chf, chf}, {{1}, {1}, {1}}, {0.5, 1.0, 4.0});
  const std::vector<double> x{0.0};
  const auto h = ensemble_chf_ib(forest, x);
  for (double t : {0.0, 0.5, 0.7, 1.0, 3.0, 4.0, 9.0}) CHECK(h.evaluate(t) == chf.evaluate(t));
}

TEST_CASE("never-OOB subject is a coverage error") {
  const auto forest = hand_forest({StepFunction{{1.0}, {1.0}, 0.0}}, {{1, 0}}, {1.0});
  FeatureFrame frame;
  frame.names = {"x"};
  frame.columns = {{0.0, 0.0}};
  frame.time = {1.0, 2.0};
  frame.event = {true, false};
  try {
    ensemble_chf_oob(forest, frame, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::coverage);
  }
  CHECK(never_oob(forest) == std::vector<std::size_t>{0});
  CHECK(std::isnan(oob_mortality(forest, frame)[0]));
}

TEST_CASE("OOB ensemble matches brute force from the masks on a toy forest") {
  const auto f = sim_frame(10, 1, 1.0, 8);
  ForestParams p = params(5, 3);
  p.tree.min_node_size = 3;
  const auto forest = fit_forest(f, p);
  std::vector<double> times{0.0, 0.5, 1.0, 2.0, 5.0, 10.0};
  for (double t : forest.event_times) times.push_back(t);
  const auto grid = oob_chf_at(forest, f, times);
  const auto mort = oob_mortality(forest, f);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    std::vector<std::size_t> oob_trees;
    for (std::size_t b = 0; b < 5; ++b) {
      if (forest.inbag[b][i] == 0) oob_trees.push_back(b);
    }
    if (oob_trees.empty()) {
      CHECK(std::isnan(mort[i]));
      continue;
    }
    const auto h = ensemble_chf_oob(forest, f, i);
    double m = 0.0;
    for (double t : forest.event_times) {
      double sum = 0.0;
      for (auto b : oob_trees) sum += predict_chf(forest.trees[b], f.row(i)).evaluate(t);
      m += sum / static_cast<double>(oob_trees.size());
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
      double sum = 0.0;
      for (auto b : oob_trees) sum += predict_chf(forest.trees[b], f.row(i)).evaluate(times[k]);
      const double expect = sum / static_cast<double>(oob_trees.size());
      CHECK(std::abs(h.evaluate(times[k]) - expect) <= 1e-12);
      CHECK(std::abs(grid(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) - expect) <= 1e-12);
    }
    CHECK(std::abs(mort[i] - m) <= 1e-10);
  }
}

TEST_CASE("poisoning in-bag trees does not move an OOB prediction") {
  const auto f = sim_frame(60, 1, 1.0, 9);
  auto forest = fit_forest(f, params(20, 1));
  const std::size_t i = 7;
  const auto before = ensemble_chf_oob(forest, f, i);
  for (std::size_t b = 0; b < forest.size(); ++b) {
    if (forest.is_oob(b, i)) continue;
    for (auto& n : forest.trees[b].nodes) {
      for (double& v : n.chf.values) v += 1000.0;
    }
  }
  forest.refresh_cache();
  const auto after = ensemble_chf_oob(forest, f, i);
  CHECK(before.knots == after.knots);
  CHECK(before.values == after.values);
}

TEST_CASE("mortality examples") {
  const std::vector<double> ev{1, 2, 3};
  CHECK(predict_mortality(StepFunction{}, ev) == 0.0);
  const StepFunction h{{1, 2, 3}, {0.1, 0.3, 0.6}, 0.0};
  CHECK(predict_mortality(h, ev) == doctest::Approx(1.0).epsilon(1e-15));
  const StepFunction bigger{{1, 2, 3}, {0.2, 0.3, 0.6}, 0.0};
  CHECK(predict_mortality(bigger, ev) > predict_mortality(h, ev));
}

TEST_CASE("OOB error is one minus the C-index of OOB mortality and is rank-invariant") {
  const auto f = sim_frame(150, 2, 1.0, 12);
  const auto forest = fit_forest(f, params(40, 2));
  const auto mort = oob_mortality(forest, f);
  std::vector<double> m, t, em;
  std::vector<bool> e;
  for (std::size_t i = 0; i < f.rows(); ++i) {
    if (std::isnan(mort[i])) continue;
    m.push_back(mort[i]);
    em.push_back(std::exp(mort[i]));
    t.push_back(f.time[i]);
    e.push_back(f.event[i]);
  }
  const double err = oob_error(forest, f);
  CHECK(err == doctest::Approx(1.0 - oracle::cindex(m, t, e)).epsilon(1e-12));
  CHECK(concordance_index(em, t, e).c == concordance_index(m, t, e).c);
  const auto curve = oob_error_curve(forest, f);
  REQUIRE(curve.size() == 40);
  CHECK(curve.back() == doctest::Approx(err).epsilon(1e-12));
}

TEST_CASE("unused feature has importance exactly zero and ranks last") {
  auto f = sim_frame(120, 1, 1.5, 13);
  f.names.push_back("unused");
  f.columns.push_back(std::vector<double>(f.rows(), 1.0));  // constant, never split on
  const auto forest = fit_forest(f, params(30, 4));
  CHECK(vimp_permutation(forest, f, "unused", 5, 1) == 0.0);
  const auto table = vimp_table(forest, f, 5, 1);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows.back().feature == "unused");
  CHECK(table.rows.front().relative_importance == 1.0);
  try {
    vimp_permutation(forest, f, "nope", 1, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::name);
  }
}

TEST_CASE("single feature has relative importance one; nonpositive tables are flagged") {
  const auto f = sim_frame(150, 0, 2.0, 14);
  const auto forest = fit_forest(f, params(30, 6));
  const auto table = vimp_table(forest, f, 3, 2);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.relative_defined);
  CHECK(table.rows[0].relative_importance == 1.0);
  CHECK(table.to_csv().rfind("variable,importance,relative_importance\n", 0) == 0);

  auto flat = f;
  flat.names = {"c"};
  flat.columns = {std::vector<double>(f.rows(), 2.0)};
  const auto root_only = fit_forest(flat, params(5, 6));
  const auto none = vimp_table(root_only, flat, 2, 2);
  CHECK_FALSE(none.relative_defined);
  CHECK(std::isnan(none.rows[0].relative_importance));
  CHECK(none.to_csv().find("NA") != std::string::npos);
}

TEST_CASE("pure-noise feature importance is small") {
  const auto f = sim_frame(300, 1, 1.0, 15);
  const auto forest = fit_forest(f, params(100, 7));
  CHECK(std::abs(vimp_permutation(forest, f, "noise0", 10, 3)) <= 0.02);
  CHECK(vimp_permutation(forest, f, "signal", 10, 3) > vimp_permutation(forest, f, "noise0", 10, 3));
}

TEST_CASE("forest fitting and VIMP are deterministic") {
  const auto f = sim_frame(100, 2, 1.0, 16);
  const auto a = fit_forest(f, params(15, 9)), b = fit_forest(f, params(15, 9));
  CHECK(a.inbag == b.inbag);
  CHECK(a.leaf_mortality == b.leaf_mortality);
  CHECK(oob_mortality(a, f) == oob_mortality(b, f));
  CHECK(vimp_table(a, f, 3, 5).to_csv() == vimp_table(b, f, 3, 5).to_csv());
}

TEST_CASE("invalid forest parameters") {
  const auto f = sim_frame(20, 1, 1.0, 17);
  ForestParams p = params(0, 1);
  CHECK_THROWS_AS(fit_forest(f, p), Error);
  p = params(2, 1);
  p.q = 5;
  CHECK_THROWS_AS(fit_forest(f, p), Error);
  CHECK(ForestParams{}.resolved_q(5) == 3);
  CHECK(ForestParams{}.resolved_q(4) == 2);
  auto none = f;
  none.event.assign(none.rows(), false);
  CHECK_THROWS_AS(fit_forest(none, params(2, 1)), Error);
}
