#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "frsf/basisfit.hpp"
#include "frsf/forest.hpp"
#include "frsf/metrics.hpp"
#include "frsf/pace.hpp"
#include "frsf/serialize.hpp"

namespace frsf {

/// How subject curves reach the grid before FPCA.
/// cfd: per-subject basis reconstruction; step: raw observations carried forward.
enum class FeatureMode { cfd, step };

std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(const std::string& text);

struct PipelineConfig {
  FeatureMode mode = FeatureMode::cfd;
  double h = 0.5;
  double fve = 0.95;
  ScoreMethod score_method = ScoreMethod::conditional;
  BasisConfig basis;
  std::optional<double> bw_mean;
  std::optional<double> bw_cov;
  std::size_t work_grid_max = 101;
  ForestParams forest;
};

struct CurveSummary {
  std::size_t constant = 0, linear = 0, spline = 0;
  double mean_k = 0.0;  // over spline subjects
  int min_k = 0, max_k = 0;
};

struct FittedModel {
  PipelineConfig config;
  Domain domain;
  std::vector<std::string> covariate_names;
  FpcaModel fpca;
  Forest forest;
  FeatureFrame frame;  // training features, kept for OOB error and VIMP
  CurveSummary curves;
};

/// PC1..PCp followed by the covariates.
std::vector<std::string> feature_names(std::size_t p, const std::vector<std::string>& covariates);

/// Grid values of every subject under the given mode.
std::vector<GriddedSubject> grid_subjects(const Dataset& dataset, const Grid& grid, const PipelineConfig& config,
                                          CurveSummary* summary, Exec exec);

FeatureFrame build_frame(const Eigen::MatrixXd& scores, const Dataset& dataset);

FittedModel fit_pipeline(const Dataset& dataset, const PipelineConfig& config, Exec exec = Exec::parallel);

/// Features of new subjects through the persisted FPCA model. Covariates are
/// matched by name; missing ones are a schema error listing them.
FeatureFrame features_for(const FittedModel& model, const Dataset& dataset, Exec exec = Exec::parallel);

struct OobEvaluation {
  double cindex = 0.0;
  double rpe = 0.0;  // 1 - cindex
  std::int64_t n_pairs = 0;
  std::size_t n_evaluated = 0;   // rows OOB at least once
  std::vector<BrierPoint> brier;
  double t_max = 0.0;
  double crps = 0.0;
  std::vector<double> error_curve;  // OOB error after each tree prefix
};

OobEvaluation evaluate_oob(const FittedModel& model, Exec exec = Exec::parallel);

Json model_to_json(const FittedModel& model);
FittedModel model_from_json(const Json& j);

Json config_to_json(const PipelineConfig& config);

}  // namespace frsf
