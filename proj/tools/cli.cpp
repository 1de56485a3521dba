#include "cli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "frsf/error.hpp"
#include "frsf/exec.hpp"
#include "frsf/longdata.hpp"
#include "frsf/pipeline.hpp"
#include "frsf/rng.hpp"
#include "frsf/simulate.hpp"

namespace frsf::cli {
namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974;
constexpr std::uint64_t kForestStream = 0x666f72657374;

struct FitFlags {
  std::string obs, subjects;
  std::vector<double> domain;
  std::string feature_mode = "cfd";
  double h = 0.5;
  double fve = 0.95;
  std::string score_method = "conditional";
  int basis_order = 4, k_min = 4, k_max = 15;
  std::string bw_mean = "auto", bw_cov = "auto";
  int ntrees = 500, mtry = 0;
  int min_node_events = 1, min_node_size = 6, nsplit = 10, max_depth = -1;
  std::uint64_t seed = 1;
};

struct EvalFlags {
  std::vector<double> train_frac{0.8};
  int repeats = 1;
  std::string arms;
};

struct SimFlags {
  std::size_t n = 200;
  std::vector<double> domain{0.0, 10.0};
  std::string mean = "sine";
  std::vector<double> mean_params{0.0, 1.0};
  std::string eigen_family = "legendre";
  std::vector<double> eigenvalues{1.0, 0.5};
  double sigma2 = 0.1;
  std::string scheme = "dense";
  double dt = 1.0;
  int j_min = 2, j_max = 5;
  double lambda0 = 0.1;
  std::vector<double> gamma;
  double c_max = 20.0;
  bool noise_covariates = false;
  std::uint64_t seed = 1;
};

struct Common {
  std::string config;
  std::string out = ".";
  int threads = 0;
};

std::optional<double> parse_bandwidth(const std::string& text, const char* name) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::parameter, std::string(name) + " must be 'auto' or a positive number");
  }
}

PipelineConfig pipeline_config(const FitFlags& f) {
  PipelineConfig c;
  c.mode = parse_feature_mode(f.feature_mode);
  c.h = f.h;
  c.fve = f.fve;
  c.score_method = parse_score_method(f.score_method);
  c.basis.order = f.basis_order;
  c.basis.k_min = f.k_min;
  c.basis.k_max = f.k_max;
  c.basis.validate();
  c.bw_mean = parse_bandwidth(f.bw_mean, "bw-mean");
  c.bw_cov = parse_bandwidth(f.bw_cov, "bw-cov");
  c.forest.n_trees = f.ntrees;
  c.forest.q = f.mtry;
  c.forest.tree.min_node_events = f.min_node_events;
  c.forest.tree.min_node_size = f.min_node_size;
  c.forest.tree.n_split_candidates = f.nsplit;
  c.forest.tree.max_depth = f.max_depth;
  c.forest.seed = f.seed;
  if (!(c.fve > 0.0 && c.fve <= 1.0)) throw Error(ErrorKind::parameter, "fve must lie in (0, 1]");
  return c;
}

std::optional<Domain> domain_flag(const std::vector<double>& d) {
  if (d.empty()) return std::nullopt;
  if (d.size() != 2 || !(d[0] < d[1])) throw Error(ErrorKind::parameter, "--domain needs two values a < b");
  return Domain{d[0], d[1]};
}

Dataset load_dataset(const std::string& obs, const std::string& subjects, std::optional<Domain> domain) {
  if (obs.empty()) throw Error(ErrorKind::parameter, "--obs is required");
  if (subjects.empty()) throw Error(ErrorKind::parameter, "--subjects is required");
  const std::string obs_text = read_text_file(obs);
  const std::string subj_text = read_text_file(subjects);
  return assemble_dataset(parse_observations(obs_text), parse_subjects(subj_text), domain);
}

std::filesystem::path out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir + "'");
  return p;
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text_file(path.string(), j.dump(2) + "\n"); }

Json optional_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string fmt(double v) { return std::isfinite(v) ? format_real(v) : std::string("NA"); }

// ---------------------------------------------------------------- options

void add_fit_options(CLI::App* app, FitFlags& f) {
  app->add_option("--obs", f.obs, "observations CSV (subject_id,time,value)");
  app->add_option("--subjects", f.subjects, "subjects CSV (subject_id,event_time,event,covariates...)");
  app->add_option("--domain", f.domain, "follow-up domain a,b")->delimiter(',')->expected(2);
  app->add_option("--feature-mode", f.feature_mode, "cfd or std");
  app->add_option("--h", f.h, "grid step");
  app->add_option("--fve", f.fve, "fraction of variance explained threshold");
  app->add_option("--score-method", f.score_method, "riemann or conditional");
  app->add_option("--basis-order", f.basis_order, "spline order");
  app->add_option("--k-min", f.k_min, "smallest basis dimension");
  app->add_option("--k-max", f.k_max, "largest basis dimension");
  app->add_option("--bw-mean", f.bw_mean, "mean bandwidth or auto");
  app->add_option("--bw-cov", f.bw_cov, "covariance bandwidth or auto");
  app->add_option("--ntrees", f.ntrees, "number of trees");
  app->add_option("--mtry", f.mtry, "features per node (0 = ceil(sqrt(#features)))");
  app->add_option("--min-node-events", f.min_node_events, "minimum events per daughter node");
  app->add_option("--min-node-size", f.min_node_size, "smallest node that is split");
  app->add_option("--max-depth", f.max_depth, "maximum depth (negative = unlimited)");
  app->add_option("--nsplit", f.nsplit, "threshold candidates per feature");
  app->add_option("--seed", f.seed, "master seed");
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON file of option values; command-line flags take precedence");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker thread cap (results do not depend on it)");
}

std::string config_value(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw Error(ErrorKind::parameter, "config values must be scalars or arrays of scalars");
}

// Config keys are long option names; options given on the command line win.
void apply_config(CLI::App* app, const std::string& path) {
  if (path.empty()) return;
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, "config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::schema, "config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (!opt) throw Error(ErrorKind::parameter, "unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& item : value) opt->add_result(config_value(item));
    } else {
      opt->add_result(config_value(value));
    }
    opt->run_callback();
  }
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const SimFlags& s, const Common& c, std::ostream& out) {
  SimConfig cfg;
  cfg.n_subjects = s.n;
  if (s.domain.size() != 2) throw Error(ErrorKind::parameter, "--domain needs two values");
  cfg.domain = {s.domain[0], s.domain[1]};
  if (s.mean == "constant") {
    cfg.mean_family = MeanFamily::constant;
  } else if (s.mean == "sine") {
    cfg.mean_family = MeanFamily::sine;
  } else if (s.mean == "polynomial") {
    cfg.mean_family = MeanFamily::polynomial;
  } else {
    throw Error(ErrorKind::parameter, "--mean must be constant, sine or polynomial");
  }
  cfg.mean_params = s.mean_params;
  if (s.eigen_family == "legendre") {
    cfg.eigen_family = EigenFamily::legendre;
  } else if (s.eigen_family == "fourier") {
    cfg.eigen_family = EigenFamily::fourier;
  } else {
    throw Error(ErrorKind::parameter, "--eigen-family must be legendre or fourier");
  }
  cfg.eigenvalues = s.eigenvalues;
  cfg.sigma2 = s.sigma2;
  if (s.scheme == "dense") {
    cfg.scheme = ObservationScheme::dense;
  } else if (s.scheme == "sparse") {
    cfg.scheme = ObservationScheme::sparse;
  } else {
    throw Error(ErrorKind::parameter, "--scheme must be dense or sparse");
  }
  cfg.dt = s.dt;
  cfg.j_min = s.j_min;
  cfg.j_max = s.j_max;
  cfg.lambda0 = s.lambda0;
  cfg.gamma = s.gamma;
  cfg.c_max = s.c_max;
  cfg.noise_covariates = s.noise_covariates;
  cfg.seed = s.seed;
  const SimResult sim = gen_dataset(cfg);
  const auto dir = out_dir(c.out);
  write_text_file((dir / "observations.csv").string(), format_observations_csv(sim.dataset));
  write_text_file((dir / "subjects.csv").string(), format_subjects_csv(sim.dataset));
  write_text_file((dir / "ground_truth.csv").string(), sim.truth.to_csv());
  std::size_t events = 0, obs = 0;
  for (const auto& subj : sim.dataset.subjects) {
    events += subj.event ? 1 : 0;
    obs += subj.observations.size();
  }
  out << "simulated N=" << sim.dataset.size() << " events=" << events << " observations=" << obs << '\n';
  return 0;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const FitFlags& f, const Common& c, std::ostream& out) {
  const PipelineConfig config = pipeline_config(f);
  const Dataset ds = load_dataset(f.obs, f.subjects, domain_flag(f.domain));
  const FittedModel model = fit_pipeline(ds, config);
  const auto dir = out_dir(c.out);
  write_json(dir / "model.json", model_to_json(model));
  std::size_t events = 0;
  for (const auto& s : ds.subjects) events += s.event ? 1 : 0;
  out << "fit N=" << ds.size() << " events=" << events << " p=" << model.fpca.p
      << " fve=" << format_real(model.fpca.fve_achieved()) << " features=" << model.frame.features()
      << " trees=" << model.forest.size() << '\n';
  const auto uncovered = never_oob(model.forest);
  if (!uncovered.empty()) {
    out << "warning: " << uncovered.size() << " subject(s) are never out-of-bag; increase --ntrees\n";
  }
  return 0;
}

// ---------------------------------------------------------------- eval

struct Arm {
  FeatureMode mode;
  double h;
  std::string label;
};

std::vector<Arm> parse_arms(const std::string& text, double default_h) {
  std::vector<Arm> arms;
  auto make = [](FeatureMode mode, double h) {
    return Arm{mode, h, to_string(mode) + "(h=" + format_real(h) + ")"};
  };
  if (text.empty()) {
    arms.push_back(make(FeatureMode::step, default_h));
    arms.push_back(make(FeatureMode::cfd, default_h));
    return arms;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    const std::string name = item.substr(0, colon);
    double h = default_h;
    if (colon != std::string::npos) {
      try {
        h = std::stod(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error(ErrorKind::parameter, "bad arm '" + item + "'; expected std, cfd or cfd:<h>");
      }
    }
    arms.push_back(make(parse_feature_mode(name), h));
  }
  if (arms.empty()) throw Error(ErrorKind::parameter, "--arms lists no arm");
  return arms;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.covariate_names = ds.covariate_names;
  out.domain = ds.domain;
  for (std::size_t i : idx) out.subjects.push_back(ds.subjects[i]);
  return out;
}

// Stratified by event indicator; the fraction enters the seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const Dataset& ds, double frac,
                                                                            std::uint64_t seed, int repeat) {
  Rng rng(derive_seed({seed, kSplitStream, static_cast<std::uint64_t>(repeat), std::bit_cast<std::uint64_t>(frac)}));
  std::vector<std::size_t> train, test;
  for (bool stratum : {true, false}) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.subjects[i].event == stratum) group.push_back(i);
    }
    rng.shuffle(group);
    const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(group.size())));
    train.insert(train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(k));
    test.insert(test.end(), group.begin() + static_cast<std::ptrdiff_t>(k), group.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

struct Stat {
  double mean = 0.0, sd = 0.0;
};

Stat summarize(const std::vector<double>& v) {
  Stat s;
  std::vector<double> finite;
  for (double x : v) {
    if (std::isfinite(x)) finite.push_back(x);
  }
  if (finite.empty()) return {std::nan(""), std::nan("")};
  for (double x : finite) s.mean += x;
  s.mean /= static_cast<double>(finite.size());
  if (finite.size() > 1) {
    double ss = 0.0;
    for (double x : finite) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(finite.size() - 1));
  }
  return s;
}

int cmd_eval(const FitFlags& f, const EvalFlags& e, const Common& c, std::ostream& out) {
  const PipelineConfig base = pipeline_config(f);
  if (e.repeats < 1) throw Error(ErrorKind::parameter, "--repeats must be >= 1");
  if (e.train_frac.empty()) throw Error(ErrorKind::parameter, "--train-frac needs at least one value");
  for (double frac : e.train_frac) {
    if (!(frac > 0.0 && frac < 1.0)) throw Error(ErrorKind::parameter, "--train-frac must lie in (0, 1)");
  }
  const auto arms = parse_arms(e.arms, f.h);
  const Dataset ds = load_dataset(f.obs, f.subjects, domain_flag(f.domain));

  Json report;
  report["config"] = config_to_json(base);
  report["config"]["train_fractions"] = e.train_frac;
  report["config"]["repeats"] = e.repeats;
  report["definitions"] = {
      {"rpe_as_one_minus_cindex", "1 - Harrell C of out-of-bag mortality on the training split"},
      {"mortality", "ensemble cumulative hazard summed over the training event times"},
      {"crps", "IPCW Brier score integrated over [0, t_max] and divided by t_max; t_max = 95th percentile of "
               "training follow-up"},
      {"brier_weights", "inverse probability of censoring (Kaplan-Meier of censoring times)"},
      {"std_arm", "scores from raw observations carried forward onto the grid, no curve reconstruction"},
      {"cfd_arm", "scores from per-subject B-spline reconstructions on [a, T*] resampled at step h"},
      {"test_cindex", "Harrell C of in-bag ensemble mortality on the held-out split"}};
  report["n_subjects"] = ds.size();
  std::ostringstream brier_csv, curve_csv, flat_csv;
  brier_csv << "arm,train_frac,repeat,t,bs\n";
  curve_csv << "arm,train_frac,repeat,trees,oob_error\n";
  flat_csv << "metric,value\n";
  Json arm_rows = Json::array();

  for (const Arm& arm : arms) {
    for (double frac : e.train_frac) {
      Json runs = Json::array();
      std::map<std::string, std::vector<double>> metrics;
      for (int r = 0; r < e.repeats; ++r) {
        const auto [train_idx, test_idx] = split_indices(ds, frac, f.seed, r);
        const Dataset train = subset(ds, train_idx);
        const Dataset test = subset(ds, test_idx);
        PipelineConfig cfg = base;
        cfg.mode = arm.mode;
        cfg.h = arm.h;
        cfg.forest.seed = derive_seed({f.seed, kForestStream, static_cast<std::uint64_t>(r),
                                       std::bit_cast<std::uint64_t>(frac)});
        const FittedModel model = fit_pipeline(train, cfg);
        const OobEvaluation ev = evaluate_oob(model);

        double test_c = std::nan("");
        if (test.size() > 0) {
          const FeatureFrame tf = features_for(model, test);
          std::vector<double> mort(tf.rows());
          for (std::size_t i = 0; i < tf.rows(); ++i) mort[i] = mortality_ib(model.forest, tf.row(i));
          try {
            test_c = concordance_index(mort, tf.time, tf.event).c;
          } catch (const Error& err) {
            if (err.kind() != ErrorKind::undefined_concordance) throw;
          }
        }
        Json run;
        run["repeat"] = r;
        run["n_train"] = train.size();
        run["n_test"] = test.size();
        run["n_oob_evaluated"] = ev.n_evaluated;
        run["forest_seed"] = cfg.forest.seed;
        run["oob_cindex"] = ev.cindex;
        run["rpe_as_one_minus_cindex"] = ev.rpe;
        run["crps"] = ev.crps;
        run["t_max"] = ev.t_max;
        run["n_comparable_pairs"] = ev.n_pairs;
        run["test_cindex"] = optional_number(test_c);
        run["p"] = model.fpca.p;
        run["fve_achieved"] = model.fpca.fve_achieved();
        run["sigma2"] = model.fpca.sigma2;
        run["bw_mean"] = model.fpca.smoothing.bw_mean;
        run["bw_mean_auto"] = model.fpca.smoothing.bw_mean_auto;
        run["bw_cov"] = model.fpca.smoothing.bw_cov;
        run["bw_cov_auto"] = model.fpca.smoothing.bw_cov_auto;
        run["kernel"] = model.fpca.smoothing.kernel;
        run["mtry"] = model.forest.params.q;
        if (arm.mode == FeatureMode::cfd) {
          run["curves"] = {{"constant", model.curves.constant},
                           {"linear", model.curves.linear},
                           {"spline", model.curves.spline},
                           {"mean_k", model.curves.mean_k},
                           {"min_k", model.curves.min_k},
                           {"max_k", model.curves.max_k}};
        }
        runs.push_back(std::move(run));
        metrics["oob_cindex"].push_back(ev.cindex);
        metrics["rpe_as_one_minus_cindex"].push_back(ev.rpe);
        metrics["crps"].push_back(ev.crps);
        metrics["test_cindex"].push_back(test_c);
        for (const auto& p : ev.brier) {
          brier_csv << arm.label << ',' << fmt(frac) << ',' << r << ',' << fmt(p.t) << ',' << fmt(p.bs) << '\n';
        }
        for (std::size_t b = 0; b < ev.error_curve.size(); ++b) {
          curve_csv << arm.label << ',' << fmt(frac) << ',' << r << ',' << (b + 1) << ','
                    << fmt(ev.error_curve[b]) << '\n';
        }
      }
      Json summary;
      for (const auto& [name, values] : metrics) {
        const Stat s = summarize(values);
        summary[name] = {{"mean", optional_number(s.mean)}, {"sd", optional_number(s.sd)}};
        const std::string key = arm.label + "/train_frac=" + fmt(frac) + "/" + name;
        flat_csv << key << "_mean," << fmt(s.mean) << '\n' << key << "_sd," << fmt(s.sd) << '\n';
      }
      out << arm.label << " train_frac=" << fmt(frac) << " crps=" << fmt(summary["crps"]["mean"].is_null()
                                                                            ? std::nan("")
                                                                            : summary["crps"]["mean"].get<double>())
          << " rpe=" << fmt(summary["rpe_as_one_minus_cindex"]["mean"].is_null()
                                ? std::nan("")
                                : summary["rpe_as_one_minus_cindex"]["mean"].get<double>())
          << '\n';
      arm_rows.push_back({{"arm", arm.label},
                          {"feature_mode", to_string(arm.mode)},
                          {"h", arm.h},
                          {"train_frac", frac},
                          {"summary", summary},
                          {"runs", runs}});
    }
  }
  report["arms"] = std::move(arm_rows);
  const auto dir = out_dir(c.out);
  write_json(dir / "report.json", report);
  write_text_file((dir / "report.csv").string(), flat_csv.str());
  write_text_file((dir / "brier.csv").string(), brier_csv.str());
  write_text_file((dir / "error_curve.csv").string(), curve_csv.str());
  return 0;
}

// ---------------------------------------------------------------- vimp / predict

FittedModel load_model(const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::parameter, "--model is required");
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, "model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

int cmd_vimp(const std::string& model_path, int repeats, std::uint64_t seed, const Common& c, std::ostream& out) {
  const FittedModel model = load_model(model_path);
  const VimpTable table = vimp_table(model.forest, model.frame, repeats, seed);
  const auto dir = out_dir(c.out);
  write_text_file((dir / "vimp.csv").string(), table.to_csv());
  if (!table.relative_defined) out << "warning: no feature has positive importance; relative importance undefined\n";
  for (const auto& row : table.rows) {
    out << row.feature << ' ' << fmt(row.importance) << ' ' << fmt(row.relative_importance) << '\n';
  }
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& obs, const std::string& subjects,
                const Common& c, std::ostream& out) {
  const FittedModel model = load_model(model_path);
  const Dataset ds = load_dataset(obs, subjects, model.domain);
  const FeatureFrame frame = features_for(model, ds);
  const auto& times = model.forest.event_times;
  std::ostringstream csv;
  csv << "subject_id,mortality";
  for (double t : times) csv << ",surv_t" << format_real(t);
  csv << '\n';
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    const auto x = frame.row(i);
    const StepFunction chf = ensemble_chf_ib(model.forest, x);
    csv << ds.subjects[i].id << ',' << format_real(mortality_ib(model.forest, x));
    for (double t : times) csv << ',' << format_real(std::exp(-chf.evaluate(t)));
    csv << '\n';
  }
  const auto dir = out_dir(c.out);
  write_text_file((dir / "predictions.csv").string(), csv.str());
  out << "predicted " << frame.rows() << " subject(s)\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Functional random survival forests for censored longitudinal data"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help and exit");
  app.set_help_all_flag("--help-all");

  FitFlags fit_flags, eval_fit_flags;
  EvalFlags eval_flags;
  SimFlags sim_flags;
  Common sim_c, fit_c, eval_c, vimp_c, pred_c;
  std::string vimp_model, pred_model, pred_obs, pred_subjects;
  int vimp_repeats = 10;
  std::uint64_t vimp_seed = 1;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic censored functional dataset");
  add_common(sim, sim_c);
  sim->add_option("--n", sim_flags.n, "number of subjects");
  sim->add_option("--domain", sim_flags.domain, "follow-up domain a,b")->delimiter(',')->expected(2);
  sim->add_option("--mean", sim_flags.mean, "constant, sine or polynomial");
  sim->add_option("--mean-params", sim_flags.mean_params, "mean family parameters")->delimiter(',');
  sim->add_option("--eigen-family", sim_flags.eigen_family, "legendre or fourier");
  sim->add_option("--eigenvalues", sim_flags.eigenvalues, "nonincreasing eigenvalues (at most 4)")->delimiter(',');
  sim->add_option("--sigma2", sim_flags.sigma2, "measurement error variance");
  sim->add_option("--scheme", sim_flags.scheme, "dense or sparse");
  sim->add_option("--dt", sim_flags.dt, "dense observation spacing");
  sim->add_option("--j-min", sim_flags.j_min, "sparse: fewest observations");
  sim->add_option("--j-max", sim_flags.j_max, "sparse: most observations");
  sim->add_option("--lambda0", sim_flags.lambda0, "baseline hazard");
  sim->add_option("--gamma", sim_flags.gamma, "log-hazard coefficients on the true scores")->delimiter(',');
  sim->add_option("--cmax", sim_flags.c_max, "censoring times ~ Uniform(0, cmax)");
  sim->add_flag("--noise-covariates", sim_flags.noise_covariates, "add Age and Gender covariates");
  sim->add_option("--seed", sim_flags.seed, "seed");

  auto* fit = app.add_subcommand("fit", "fit curves, FPCA and the forest; writes model.json");
  add_common(fit, fit_c);
  add_fit_options(fit, fit_flags);

  auto* eval = app.add_subcommand("eval", "train/validation sweep with OOB CRPS and error per arm");
  add_common(eval, eval_c);
  add_fit_options(eval, eval_fit_flags);
  eval->add_option("--train-frac", eval_flags.train_frac, "training fractions in (0,1)")->delimiter(',');
  eval->add_option("--repeats", eval_flags.repeats, "seeded repetitions per fraction");
  eval->add_option("--arms", eval_flags.arms, "comma list of std, cfd or cfd:<h> (default std and cfd at --h)");

  auto* vimp = app.add_subcommand("vimp", "permutation variable importance; writes vimp.csv");
  add_common(vimp, vimp_c);
  vimp->add_option("--model", vimp_model, "model.json from fit");
  vimp->add_option("--repeats", vimp_repeats, "permutations per feature");
  vimp->add_option("--seed", vimp_seed, "permutation seed");

  auto* pred = app.add_subcommand("predict", "mortality and survival curves for new subjects");
  add_common(pred, pred_c);
  pred->add_option("--model", pred_model, "model.json from fit");
  pred->add_option("--obs", pred_obs, "observations CSV");
  pred->add_option("--subjects", pred_subjects, "subjects CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    auto run_sub = [&](CLI::App* sub, Common& c, auto&& body) {
      apply_config(sub, c.config);
      set_thread_count(c.threads);
      return body();
    };
    if (sim->parsed()) return run_sub(sim, sim_c, [&] { return cmd_simulate(sim_flags, sim_c, out); });
    if (fit->parsed()) return run_sub(fit, fit_c, [&] { return cmd_fit(fit_flags, fit_c, out); });
    if (eval->parsed()) {
      return run_sub(eval, eval_c, [&] { return cmd_eval(eval_fit_flags, eval_flags, eval_c, out); });
    }
    if (vimp->parsed()) {
      return run_sub(vimp, vimp_c, [&] { return cmd_vimp(vimp_model, vimp_repeats, vimp_seed, vimp_c, out); });
    }
    if (pred->parsed()) {
      return run_sub(pred, pred_c,
                     [&] { return cmd_predict(pred_model, pred_obs, pred_subjects, pred_c, out); });
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::contract ? 1 : 2;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"frsf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace frsf::cli
