#include "doctest.h"

#include <cmath>

#include "frsf/error.hpp"
#include "frsf/longdata.hpp"
#include "frsf/simulate.hpp"

using namespace frsf;

namespace {

double latent_curve(const SimConfig& cfg, const std::vector<double>& nu, double t) {
  double x = true_mean(cfg, t);
  for (std::size_t m = 0; m < nu.size(); ++m) x += nu[m] * eigenfunction(cfg.eigen_family, static_cast<int>(m), t, cfg.domain);
  return x;
}

}  // namespace

TEST_CASE("eigenfunction families are orthonormal on the domain") {
  const Domain d{2.0, 7.0};
  for (auto fam : {EigenFamily::legendre, EigenFamily::fourier}) {
    for (int m = 0; m < 4; ++m) {
      for (int k = 0; k < 4; ++k) {
        // composite Simpson with 2000 panels
        const int n = 2000;
        const double h = d.length() / n;
        double s = 0.0;
        for (int j = 0; j <= n; ++j) {
          const double t = d.a + j * h;
          const double w = (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
          s += w * eigenfunction(fam, m, t, d) * eigenfunction(fam, k, t, d);
        }
        s *= h / 3.0;
        CHECK(std::abs(s - (m == k ? 1.0 : 0.0)) <= 1e-8);
      }
    }
  }
}

TEST_CASE("noiseless dense observations equal the latent curve") {
  SimConfig cfg;
  cfg.n_subjects = 20;
  cfg.sigma2 = 0.0;
  cfg.eigenvalues = {1.0, 0.5, 0.25};
  cfg.mean_family = MeanFamily::polynomial;
  cfg.mean_params = {1.0, -2.0, 0.5};
  const auto sim = gen_dataset(cfg);
  for (std::size_t i = 0; i < sim.dataset.size(); ++i) {
    const auto& s = sim.dataset.subjects[i];
    CHECK(s.observations.front().time == cfg.domain.a);
    for (const auto& o : s.observations) {
      CHECK(o.time <= s.event_time);
      CHECK(std::abs(o.value - latent_curve(cfg, sim.truth.scores[i], o.time)) <= 1e-12);
    }
  }
}

TEST_CASE("event fraction matches the closed form when the hazard ignores the scores") {
  SimConfig cfg;
  cfg.n_subjects = 2000;
  cfg.domain = {0.0, 30.0};  // administrative end beyond c_max, so delta = 1{T <= C}
  cfg.lambda0 = 0.1;
  cfg.c_max = 20.0;
  cfg.dt = 5.0;
  cfg.seed = 77;
  const auto sim = gen_dataset(cfg);
  double events = 0.0;
  for (const auto& s : sim.dataset.subjects) events += s.event ? 1.0 : 0.0;
  const double lc = cfg.lambda0 * cfg.c_max;
  const double analytic = 1.0 - (1.0 - std::exp(-lc)) / lc;  // integral of (1 - e^{-l c}) / c_max over [0, c_max]
  CHECK(std::abs(events / 2000.0 - analytic) <= 0.03);
}

TEST_CASE("score variances within 10% of the eigenvalues at N = 5000") {
  SimConfig cfg;
  cfg.n_subjects = 5000;
  cfg.eigenvalues = {3.0, 1.0, 0.3};
  cfg.dt = 5.0;
  cfg.seed = 5;
  const auto sim = gen_dataset(cfg);
  for (std::size_t m = 0; m < 3; ++m) {
    double s = 0.0, ss = 0.0;
    for (const auto& nu : sim.truth.scores) {
      s += nu[m];
      ss += nu[m] * nu[m];
    }
    const double n = 5000.0;
    const double var = (ss - s * s / n) / (n - 1.0);
    CHECK(std::abs(var / cfg.eigenvalues[m] - 1.0) <= 0.1);
  }
}

TEST_CASE("outcomes follow T* = a + min(T, C, b - a)") {
  SimConfig cfg;
  cfg.n_subjects = 200;
  cfg.domain = {1.0, 6.0};
  cfg.gamma = {1.0, 0.0};
  cfg.scheme = ObservationScheme::sparse;
  const auto sim = gen_dataset(cfg);
  for (std::size_t i = 0; i < sim.dataset.size(); ++i) {
    const auto& s = sim.dataset.subjects[i];
    const double t = sim.truth.event_time[i], c = sim.truth.censor_time[i];
    CHECK(s.event_time == doctest::Approx(1.0 + std::min({t, c, 5.0})));
    CHECK(s.event == (t <= c && t <= 5.0));
    CHECK(s.observations.size() >= 1);
    CHECK(s.observations.size() <= static_cast<std::size_t>(cfg.j_max));
    CHECK(s.observations.front().time == 1.0);
  }
}

TEST_CASE("generated data pass the dataset assembler and are reproducible") {
  SimConfig cfg;
  cfg.n_subjects = 50;
  cfg.noise_covariates = true;
  cfg.scheme = ObservationScheme::sparse;
  cfg.seed = 9;
  const auto a = gen_dataset(cfg), b = gen_dataset(cfg);
  const auto obs = format_observations_csv(a.dataset);
  const auto subj = format_subjects_csv(a.dataset);
  CHECK(obs == format_observations_csv(b.dataset));
  CHECK(subj == format_subjects_csv(b.dataset));
  CHECK(a.truth.to_csv() == b.truth.to_csv());
  const auto back = assemble_dataset(parse_observations(obs), parse_subjects(subj), a.dataset.domain);
  CHECK(back.size() == 50);
  CHECK(back.covariate_names == std::vector<std::string>{"Age", "Gender"});
  CHECK(a.truth.to_csv().rfind("subject_id,nu1,nu2,latent_event_time,latent_censor_time\n", 0) == 0);
  cfg.seed = 10;
  CHECK(format_subjects_csv(gen_dataset(cfg).dataset) != subj);
}

TEST_CASE("invalid configurations are parameter errors") {
  SimConfig cfg;
  cfg.eigenvalues = {0.5, 1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.eigenvalues = {1, 1, 1, 1, 1};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.sigma2 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.j_min = 4;
  cfg.j_max = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.gamma = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
}
