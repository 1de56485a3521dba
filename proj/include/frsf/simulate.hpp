#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frsf/longdata.hpp"

namespace frsf {

enum class MeanFamily { constant, sine, polynomial };
enum class EigenFamily { legendre, fourier };
enum class ObservationScheme { dense, sparse };

struct SimConfig {
  std::size_t n_subjects = 200;
  Domain domain{0.0, 10.0};
  MeanFamily mean_family = MeanFamily::sine;
  /// constant: {c}; sine: {offset, amplitude} for offset + amplitude sin(2 pi u);
  /// polynomial: coefficients in u = (t - a) / (b - a), lowest degree first.
  std::vector<double> mean_params{0.0, 1.0};
  EigenFamily eigen_family = EigenFamily::legendre;
  std::vector<double> eigenvalues{1.0, 0.5};
  double sigma2 = 0.1;
  ObservationScheme scheme = ObservationScheme::dense;
  double dt = 1.0;  // dense spacing
  int j_min = 2, j_max = 5;  // sparse counts
  double lambda0 = 0.1;       // baseline hazard
  std::vector<double> gamma;  // log-hazard coefficients on the leading true scores; missing = 0
  double c_max = 20.0;        // censoring ~ Uniform(0, c_max), plus administrative censoring at b
  bool noise_covariates = false;  // adds Age ~ N(60, 10) and Gender ~ Bernoulli(0.5)
  std::uint64_t seed = 1;

  void validate() const;
};

/// Orthonormal family member m (0-based) on [a, b].
double eigenfunction(EigenFamily family, int m, double t, Domain domain);
double true_mean(const SimConfig& config, double t);

struct GroundTruth {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> scores;  // per subject, one per eigenvalue
  std::vector<double> event_time;            // latent T (may exceed b)
  std::vector<double> censor_time;           // latent C

  std::string to_csv() const;
};

struct SimResult {
  Dataset dataset;
  GroundTruth truth;
};

/// Subject i uses its own stream derived from (seed, i).
SimResult gen_dataset(const SimConfig& config);

}  // namespace frsf
