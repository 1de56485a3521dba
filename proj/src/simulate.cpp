#include "frsf/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "frsf/error.hpp"
#include "frsf/rng.hpp"

namespace frsf {

void SimConfig::validate() const {
  if (n_subjects == 0) throw Error(ErrorKind::parameter, "n_subjects must be >= 1");
  if (!(domain.a < domain.b)) throw Error(ErrorKind::parameter, "domain must satisfy a < b");
  if (eigenvalues.empty() || eigenvalues.size() > 4) {
    throw Error(ErrorKind::parameter, "between 1 and 4 eigenvalues are supported");
  }
  for (std::size_t m = 0; m < eigenvalues.size(); ++m) {
    if (!(eigenvalues[m] > 0.0) || (m > 0 && eigenvalues[m] > eigenvalues[m - 1])) {
      throw Error(ErrorKind::parameter, "eigenvalues must be positive and nonincreasing");
    }
  }
  if (gamma.size() > eigenvalues.size()) {
    throw Error(ErrorKind::parameter, "gamma has more entries than eigenvalues");
  }
  if (!(sigma2 >= 0.0)) throw Error(ErrorKind::parameter, "sigma2 must be >= 0");
  if (!(dt > 0.0)) throw Error(ErrorKind::parameter, "dt must be > 0");
  if (j_min < 1 || j_max < j_min) {
    throw Error(ErrorKind::parameter, "sparse scheme needs 1 <= j_min <= j_max");
  }
  if (!(lambda0 > 0.0)) throw Error(ErrorKind::parameter, "lambda0 must be > 0");
  if (!(c_max > 0.0)) throw Error(ErrorKind::parameter, "c_max must be > 0");
  const std::size_t need = mean_family == MeanFamily::sine ? 2 : 1;
  if (mean_params.size() < need) throw Error(ErrorKind::parameter, "too few mean parameters");
}

double eigenfunction(EigenFamily family, int m, double t, Domain domain) {
  const double tau = domain.length();
  const double u = (t - domain.a) / tau;
  if (family == EigenFamily::legendre) {
    const double x = 2.0 * u - 1.0;
    double p = 1.0;
    switch (m) {
      case 0: p = 1.0; break;
      case 1: p = x; break;
      case 2: p = 0.5 * (3.0 * x * x - 1.0); break;
      case 3: p = 0.5 * (5.0 * x * x * x - 3.0 * x); break;
      default: throw Error(ErrorKind::parameter, "Legendre index out of range");
    }
    return std::sqrt((2.0 * m + 1.0) / tau) * p;
  }
  if (m < 0 || m > 3) throw Error(ErrorKind::parameter, "Fourier index out of range");
  const double k = static_cast<double>(m / 2 + 1);
  const double arg = 2.0 * std::numbers::pi * k * u;
  return std::sqrt(2.0 / tau) * (m % 2 == 0 ? std::sin(arg) : std::cos(arg));
}

double true_mean(const SimConfig& config, double t) {
  const double u = (t - config.domain.a) / config.domain.length();
  switch (config.mean_family) {
    case MeanFamily::constant:
      return config.mean_params[0];
    case MeanFamily::sine:
      return config.mean_params[0] + config.mean_params[1] * std::sin(2.0 * std::numbers::pi * u);
    case MeanFamily::polynomial: {
      double v = 0.0;
      for (auto it = config.mean_params.rbegin(); it != config.mean_params.rend(); ++it) v = v * u + *it;
      return v;
    }
  }
  return 0.0;
}

std::string GroundTruth::to_csv() const {
  std::ostringstream out;
  out << "subject_id";
  const std::size_t m = scores.empty() ? 0 : scores.front().size();
  for (std::size_t k = 0; k < m; ++k) out << ",nu" << (k + 1);
  out << ",latent_event_time,latent_censor_time\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (double v : scores[i]) out << ',' << format_real(v);
    out << ',' << format_real(event_time[i]) << ',' << format_real(censor_time[i]) << '\n';
  }
  return out.str();
}

SimResult gen_dataset(const SimConfig& config) {
  config.validate();
  const std::size_t n = config.n_subjects;
  const std::size_t m = config.eigenvalues.size();
  const Domain dom = config.domain;
  SimResult result;
  auto& ds = result.dataset;
  auto& truth = result.truth;
  ds.domain = dom;
  if (config.noise_covariates) ds.covariate_names = {"Age", "Gender"};
  const int width = static_cast<int>(std::to_string(n).size());

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed({config.seed, static_cast<std::uint64_t>(i)}));
    std::vector<double> nu(m);
    double eta = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      nu[k] = std::sqrt(config.eigenvalues[k]) * rng.normal();
      if (k < config.gamma.size()) eta += config.gamma[k] * nu[k];  // missing entries are 0
    }
    const double t_latent = rng.exponential(config.lambda0 * std::exp(eta));
    const double c_latent = rng.uniform(0.0, config.c_max);
    const double follow = std::min({t_latent, c_latent, dom.length()});
    SubjectSeries s;
    std::string id = std::to_string(i + 1);
    s.id = "S" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    s.event_time = dom.a + follow;
    s.event = t_latent <= c_latent && t_latent <= dom.length();

    std::vector<double> times;
    if (config.scheme == ObservationScheme::dense) {
      for (std::size_t k = 0;; ++k) {
        const double t = dom.a + static_cast<double>(k) * config.dt;
        if (t > s.event_time) break;
        times.push_back(t);
      }
    } else {
      const auto span = static_cast<std::size_t>(config.j_max - config.j_min + 1);
      const int j = config.j_min + static_cast<int>(rng.index(span));
      times.push_back(dom.a);
      for (int k = 1; k < j; ++k) {
        const double t = dom.a + (1.0 - rng.uniform()) * follow;  // (a, T*]
        times.push_back(t);
      }
      std::sort(times.begin(), times.end());
      times.erase(std::unique(times.begin(), times.end()), times.end());
    }
    const double sd = std::sqrt(config.sigma2);
    for (double t : times) {
      double x = true_mean(config, t);
      for (std::size_t k = 0; k < m; ++k) x += nu[k] * eigenfunction(config.eigen_family, static_cast<int>(k), t, dom);
      s.observations.push_back({t, x + (sd > 0.0 ? sd * rng.normal() : 0.0)});
    }
    if (config.noise_covariates) {
      const double age = 60.0 + 10.0 * rng.normal();
      const double gender = rng.uniform() < 0.5 ? 0.0 : 1.0;
      s.covariates = {age, gender};
    }
    truth.ids.push_back(s.id);
    truth.scores.push_back(std::move(nu));
    truth.event_time.push_back(t_latent);
    truth.censor_time.push_back(c_latent);
    ds.subjects.push_back(std::move(s));
  }
  return result;
}

}  // namespace frsf
