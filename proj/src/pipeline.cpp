#include "frsf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "frsf/error.hpp"

namespace frsf {
namespace {

template <typename F>
auto in_module(const char* module, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_context(module);
  }
}

}  // namespace

std::string to_string(FeatureMode mode) { return mode == FeatureMode::cfd ? "cfd" : "std"; }

FeatureMode parse_feature_mode(const std::string& text) {
  if (text == "cfd") return FeatureMode::cfd;
  if (text == "std") return FeatureMode::step;
  throw Error(ErrorKind::parameter, "feature mode must be 'cfd' or 'std'");
}

std::vector<std::string> feature_names(std::size_t p, const std::vector<std::string>& covariates) {
  std::vector<std::string> names;
  for (std::size_t m = 0; m < p; ++m) names.push_back("PC" + std::to_string(m + 1));
  names.insert(names.end(), covariates.begin(), covariates.end());
  return names;
}

std::vector<GriddedSubject> grid_subjects(const Dataset& dataset, const Grid& grid, const PipelineConfig& config,
                                          CurveSummary* summary, Exec exec) {
  if (config.mode == FeatureMode::step) return resample_step(dataset, grid);
  const auto curves = fit_cfd_all(dataset, config.basis, exec);
  if (summary) {
    *summary = {};
    double k_sum = 0.0;
    for (const auto& c : curves) {
      if (c.kind == CurveKind::constant) ++summary->constant;
      if (c.kind == CurveKind::linear) ++summary->linear;
      if (c.kind == CurveKind::spline) {
        if (summary->spline == 0 || c.k_selected < summary->min_k) summary->min_k = c.k_selected;
        summary->max_k = std::max(summary->max_k, c.k_selected);
        ++summary->spline;
        k_sum += c.k_selected;
      }
    }
    if (summary->spline > 0) summary->mean_k = k_sum / static_cast<double>(summary->spline);
  }
  return resample_curves(dataset, curves, grid);
}

FeatureFrame build_frame(const Eigen::MatrixXd& scores, const Dataset& dataset) {
  if (static_cast<std::size_t>(scores.rows()) != dataset.size()) {
    throw Error(ErrorKind::dimension, "score matrix rows must match the subjects");
  }
  FeatureFrame f;
  const auto p = static_cast<std::size_t>(scores.cols());
  f.names = feature_names(p, dataset.covariate_names);
  f.columns.assign(f.names.size(), std::vector<double>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.subjects[i];
    for (std::size_t m = 0; m < p; ++m) {
      f.columns[m][i] = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m));
    }
    for (std::size_t c = 0; c < s.covariates.size(); ++c) f.columns[p + c][i] = s.covariates[c];
    f.time.push_back(s.event_time);
    f.event.push_back(s.event);
  }
  f.validate();
  return f;
}

FittedModel fit_pipeline(const Dataset& dataset, const PipelineConfig& config, Exec exec) {
  if (dataset.size() == 0) throw Error(ErrorKind::empty_sample, "dataset has no subjects");
  FittedModel model;
  model.config = config;
  model.domain = dataset.domain;
  model.covariate_names = dataset.covariate_names;
  const Grid grid = in_module("pace", [&] { return build_grid(dataset.domain, config.h); });
  const auto gridded = in_module(config.mode == FeatureMode::cfd ? "basisfit" : "pace",
                                 [&] { return grid_subjects(dataset, grid, config, &model.curves, exec); });
  FpcaOptions options;
  options.fve_threshold = config.fve;
  options.bw_mean = config.bw_mean;
  options.bw_cov = config.bw_cov;
  options.work_grid_max = config.work_grid_max;
  model.fpca = in_module("pace", [&] { return fit_fpca(gridded, grid, options, exec); });
  const Eigen::MatrixXd scores =
      in_module("pace", [&] { return score_matrix(gridded, model.fpca, config.score_method, exec); });
  model.frame = in_module("fstree", [&] { return build_frame(scores, dataset); });
  model.forest = in_module("frsf", [&] { return fit_forest(model.frame, config.forest, exec); });
  model.config.forest = model.forest.params;
  return model;
}

FeatureFrame features_for(const FittedModel& model, const Dataset& dataset, Exec exec) {
  std::vector<std::string> missing, unexpected;
  std::vector<std::size_t> source(model.covariate_names.size());
  for (std::size_t c = 0; c < model.covariate_names.size(); ++c) {
    const auto& name = model.covariate_names[c];
    const auto it = std::find(dataset.covariate_names.begin(), dataset.covariate_names.end(), name);
    if (it == dataset.covariate_names.end()) {
      missing.push_back(name);
    } else {
      source[c] = static_cast<std::size_t>(it - dataset.covariate_names.begin());
    }
  }
  for (const auto& name : dataset.covariate_names) {
    if (std::find(model.covariate_names.begin(), model.covariate_names.end(), name) ==
        model.covariate_names.end()) {
      unexpected.push_back(name);
    }
  }
  if (!missing.empty() || !unexpected.empty()) {
    std::string msg = "covariates do not match the model";
    auto list = [](const std::vector<std::string>& v) {
      std::string out;
      for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
      return out;
    };
    if (!missing.empty()) msg += "; missing: " + list(missing);
    if (!unexpected.empty()) msg += "; unexpected: " + list(unexpected);
    throw Error(ErrorKind::schema, msg);
  }
  Dataset aligned = dataset;
  aligned.covariate_names = model.covariate_names;
  for (auto& s : aligned.subjects) {
    std::vector<double> cov(source.size());
    for (std::size_t c = 0; c < source.size(); ++c) cov[c] = s.covariates[source[c]];
    s.covariates = std::move(cov);
  }
  if (aligned.size() == 0) {
    FeatureFrame empty;
    empty.names = feature_names(model.fpca.p, model.covariate_names);
    empty.columns.assign(empty.names.size(), {});
    return empty;
  }
  const auto gridded = in_module(model.config.mode == FeatureMode::cfd ? "basisfit" : "pace", [&] {
    return grid_subjects(aligned, model.fpca.grid, model.config, nullptr, exec);
  });
  const Eigen::MatrixXd scores =
      in_module("pace", [&] { return score_matrix(gridded, model.fpca, model.config.score_method, exec); });
  return build_frame(scores, aligned);
}

OobEvaluation evaluate_oob(const FittedModel& model, Exec exec) {
  const auto& frame = model.frame;
  const auto& forest = model.forest;
  OobEvaluation out;
  const auto mortality = oob_mortality(forest, frame);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < mortality.size(); ++i) {
    if (!std::isnan(mortality[i])) rows.push_back(i);
  }
  out.n_evaluated = rows.size();
  std::vector<double> m, t;
  std::vector<bool> e;
  for (std::size_t i : rows) {
    m.push_back(mortality[i]);
    t.push_back(frame.time[i]);
    e.push_back(frame.event[i]);
  }
  const Concordance c = concordance_index(m, t, e);
  out.cindex = c.c;
  out.rpe = 1.0 - c.c;
  out.n_pairs = c.n_pairs;

  const auto eval_times = brier_eval_times(frame.time, frame.event);
  if (eval_times.empty()) throw Error(ErrorKind::evaluability, "no event times available for the Brier curve");
  out.t_max = sample_quantile(frame.time, 0.95);
  const StepFunction censor = censoring_km(frame.time, frame.event);
  const Eigen::MatrixXd chf = oob_chf_at(forest, frame, eval_times, exec);
  std::vector<double> surv(rows.size());
  for (std::size_t k = 0; k < eval_times.size(); ++k) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      surv[r] = std::exp(-chf(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(k)));
    }
    out.brier.push_back({eval_times[k], brier_score(surv, eval_times[k], t, e, censor)});
  }
  out.crps = crps(out.brier, out.t_max);
  out.error_curve = oob_error_curve(forest, frame, exec);
  return out;
}

Json config_to_json(const PipelineConfig& c) {
  Json j;
  j["feature_mode"] = to_string(c.mode);
  j["h"] = c.h;
  j["fve"] = c.fve;
  j["score_method"] = to_string(c.score_method);
  j["basis_order"] = c.basis.order;
  j["k_min"] = c.basis.k_min;
  j["k_max"] = c.basis.k_max;
  j["bw_mean"] = c.bw_mean ? Json(*c.bw_mean) : Json("auto");
  j["bw_cov"] = c.bw_cov ? Json(*c.bw_cov) : Json("auto");
  j["work_grid_max"] = c.work_grid_max;
  j["ntrees"] = c.forest.n_trees;
  j["mtry"] = c.forest.q;
  j["min_node_events"] = c.forest.tree.min_node_events;
  j["min_node_size"] = c.forest.tree.min_node_size;
  j["max_depth"] = c.forest.tree.max_depth;
  j["nsplit"] = c.forest.tree.n_split_candidates;
  j["seed"] = c.forest.seed;
  return j;
}

namespace {

PipelineConfig config_from_json(const Json& j) {
  PipelineConfig c;
  c.mode = parse_feature_mode(get_field<std::string>(j, "feature_mode"));
  c.h = get_field<double>(j, "h");
  c.fve = get_field<double>(j, "fve");
  c.score_method = parse_score_method(get_field<std::string>(j, "score_method"));
  c.basis.order = get_field<int>(j, "basis_order");
  c.basis.k_min = get_field<int>(j, "k_min");
  c.basis.k_max = get_field<int>(j, "k_max");
  if (j.at("bw_mean").is_number()) c.bw_mean = j.at("bw_mean").get<double>();
  if (j.at("bw_cov").is_number()) c.bw_cov = j.at("bw_cov").get<double>();
  c.work_grid_max = get_field<std::size_t>(j, "work_grid_max");
  c.forest.n_trees = get_field<int>(j, "ntrees");
  c.forest.q = get_field<int>(j, "mtry");
  c.forest.tree.min_node_events = get_field<int>(j, "min_node_events");
  c.forest.tree.min_node_size = get_field<int>(j, "min_node_size");
  c.forest.tree.max_depth = get_field<int>(j, "max_depth");
  c.forest.tree.n_split_candidates = get_field<int>(j, "nsplit");
  c.forest.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

Json model_to_json(const FittedModel& m) {
  Json j;
  j["format"] = "frsf-model";
  j["version"] = 1;
  j["config"] = config_to_json(m.config);
  j["domain"] = {m.domain.a, m.domain.b};
  j["covariate_names"] = m.covariate_names;
  j["curves"] = {{"constant", m.curves.constant},
                 {"linear", m.curves.linear},
                 {"spline", m.curves.spline},
                 {"mean_k", m.curves.mean_k},
                 {"min_k", m.curves.min_k},
                 {"max_k", m.curves.max_k}};
  j["fpca"] = to_json(m.fpca);
  j["forest"] = to_json(m.forest);
  j["training_frame"] = to_json(m.frame);
  return j;
}

FittedModel model_from_json(const Json& j) {
  try {
    if (get_field<std::string>(j, "format") != "frsf-model") {
      throw Error(ErrorKind::schema, "not a model file");
    }
    FittedModel m;
    m.config = config_from_json(j.at("config"));
    const auto dom = get_field<std::vector<double>>(j, "domain");
    if (dom.size() != 2) throw Error(ErrorKind::schema, "domain must have two entries");
    m.domain = {dom[0], dom[1]};
    m.covariate_names = get_field<std::vector<std::string>>(j, "covariate_names");
    const Json& cs = j.at("curves");
    m.curves.constant = get_field<std::size_t>(cs, "constant");
    m.curves.linear = get_field<std::size_t>(cs, "linear");
    m.curves.spline = get_field<std::size_t>(cs, "spline");
    m.curves.mean_k = get_field<double>(cs, "mean_k");
    m.curves.min_k = get_field<int>(cs, "min_k");
    m.curves.max_k = get_field<int>(cs, "max_k");
    m.fpca = fpca_from_json(j.at("fpca"));
    m.forest = forest_from_json(j.at("forest"));
    m.frame = frame_from_json(j.at("training_frame"));
    if (m.frame.names != m.forest.feature_names || m.frame.rows() != m.forest.n_train) {
      throw Error(ErrorKind::schema, "training frame does not match the forest");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, std::string("malformed model file: ") + e.what());
  }
}

}  // namespace frsf
