#include "doctest.h"

#include <cmath>

#include "frsf/error.hpp"
#include "frsf/metrics.hpp"
#include "frsf/rng.hpp"
#include "oracles.hpp"

using namespace frsf;

TEST_CASE("C-index: perfect ranking, all ties, the N = 5 hand case") {
  const std::vector<double> t{1, 2, 3, 4, 5};
  const std::vector<bool> all(5, true);
  CHECK(concordance_index(std::vector<double>{5, 4, 3, 2, 1}, t, all).c == 1.0);
  CHECK(concordance_index(std::vector<double>(5, 1.0), t, all).c == 0.5);
  const std::vector<bool> e{true, true, false, true, false};
  const std::vector<double> m{5, 4, 3, 2, 1};
  std::int64_t pairs = 0;
  CHECK(oracle::cindex(m, t, e, &pairs) == 1.0);
  const auto c = concordance_index(m, t, e);
  CHECK(c.c == 1.0);
  CHECK(c.n_pairs == pairs);
  CHECK(c.n_pairs == 4 + 3 + 1);
}

TEST_CASE("C-index matches pair enumeration on random data with ties") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed({31, static_cast<std::uint64_t>(trial)}));
    const std::size_t n = 2 + rng.index(60);
    std::vector<double> m, t;
    std::vector<bool> e;
    for (std::size_t i = 0; i < n; ++i) {
      m.push_back(std::floor(rng.uniform() * 8));
      t.push_back(std::floor(rng.uniform() * 10));
      e.push_back(rng.uniform() < 0.6);
    }
    std::int64_t pairs = 0;
    const double expect = oracle::cindex(m, t, e, &pairs);
    if (pairs == 0) {
      CHECK_THROWS_AS(concordance_index(m, t, e), Error);
      continue;
    }
    const auto c = concordance_index(m, t, e);
    CHECK(c.n_pairs == pairs);
    CHECK(c.c == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("C-index invariances") {
  Rng rng(8);
  std::vector<double> m, t, em, neg;
  std::vector<bool> e;
  for (int i = 0; i < 80; ++i) {
    m.push_back(rng.normal());
    t.push_back(rng.exponential(1.0));
    e.push_back(rng.uniform() < 0.7);
    em.push_back(std::exp(m.back()));
    neg.push_back(-m.back());
  }
  const double c = concordance_index(m, t, e).c;
  CHECK(concordance_index(em, t, e).c == c);
  CHECK(concordance_index(neg, t, e).c == doctest::Approx(1.0 - c).epsilon(1e-12));
}

TEST_CASE("no comparable pair is undefined") {
  const std::vector<double> m{1, 2}, t{1, 2};
  try {
    concordance_index(m, t, {false, false});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::undefined_concordance);
  }
}

TEST_CASE("Brier: oracle predictor, constant one half, four-term IPCW hand case") {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<bool> all(4, true);
  const auto g_all = censoring_km(t, all);
  for (double at : {0.5, 1.0, 2.5, 3.9}) {
    std::vector<double> oracle_s;
    for (double ti : t) oracle_s.push_back(ti > at ? 1.0 : 0.0);
    CHECK(brier_score(oracle_s, at, t, all, g_all) == 0.0);
    CHECK(brier_score(std::vector<double>(4, 0.5), at, t, all, g_all) == 0.25);
  }
  // subject 2 censored at 2: G = 1 before 2, 2/3 from 2 on
  const std::vector<bool> e{true, false, true, true};
  const auto g = censoring_km(t, e);
  CHECK(g.evaluate(1.9) == 1.0);
  CHECK(g.evaluate(2.0) == doctest::Approx(2.0 / 3.0));
  const std::vector<double> s{0.2, 0.5, 0.6, 0.9};
  const double expect = (0.2 * 0.2 / 1.0 + 0.0 + 0.4 * 0.4 / (2.0 / 3.0) + 0.1 * 0.1 / (2.0 / 3.0)) / 4.0;
  CHECK(brier_score(s, 2.5, t, e, g) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("Brier without censoring equals the unweighted squared error") {
  Rng rng(2);
  std::vector<double> t, s;
  for (int i = 0; i < 60; ++i) {
    t.push_back(rng.exponential(0.5));
    s.push_back(rng.uniform());
  }
  const std::vector<bool> all(t.size(), true);
  const auto g = censoring_km(t, all);
  for (double at : {0.3, 1.0, 2.0, 4.0}) {
    double plain = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) plain += std::pow((t[i] > at ? 1.0 : 0.0) - s[i], 2);
    plain /= static_cast<double>(t.size());
    const double bs = brier_score(s, at, t, all, g);
    CHECK(std::abs(bs - plain) <= 1e-12);
    CHECK(bs >= 0.0);
    CHECK(bs <= 1.0);
  }
}

TEST_CASE("Brier is not evaluable where the censoring survival is zero") {
  const std::vector<double> t{1, 2};
  const std::vector<bool> e{true, false};
  const auto g = censoring_km(t, e);
  try {
    brier_score(std::vector<double>{0.5, 0.5}, 3.0, t, e, g);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::evaluability);
  }
}

TEST_CASE("CRPS") {
  const std::vector<BrierPoint> quarter{{1.0, 0.25}, {2.0, 0.25}, {5.0, 0.25}};
  CHECK(std::abs(crps(quarter, 6.0) - 0.25) <= 1e-12);
  const std::vector<BrierPoint> zero{{1.0, 0.0}, {2.0, 0.0}};
  CHECK(crps(zero, 3.0) == 0.0);
  // flat 0 on [0,1], ramp to 1 on [1,3], flat 1 on [3,4]
  const std::vector<BrierPoint> ramp{{1.0, 0.0}, {3.0, 1.0}};
  CHECK(crps(ramp, 4.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(crps(zero, 0.0), Error);
}

TEST_CASE("CRPS of a constant one-half predictor without censoring is 0.25") {
  Rng rng(6);
  std::vector<double> t;
  for (int i = 0; i < 100; ++i) t.push_back(rng.exponential(1.0));
  const std::vector<bool> all(t.size(), true);
  const auto g = censoring_km(t, all);
  std::vector<BrierPoint> curve;
  for (double at : brier_eval_times(t, all)) curve.push_back({at, brier_score(std::vector<double>(t.size(), 0.5), at, t, all, g)});
  CHECK(std::abs(crps(curve, sample_quantile(t, 0.95)) - 0.25) <= 1e-12);
}

TEST_CASE("evaluation times and type-7 quantiles") {
  CHECK(sample_quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(sample_quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(sample_quantile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK(sample_quantile({1, 2, 3, 4, 5}, 0.95) == doctest::Approx(4.8));
  const std::vector<double> t{1, 2, 3, 4, 5, 2};
  const std::vector<bool> e{true, true, false, true, true, true};
  // 95th percentile of follow-up is 4.75, so 5 is excluded; 3 is censored
  CHECK(brier_eval_times(t, e) == std::vector<double>{1, 2, 4});
}
