#include "frsf/serialize.hpp"

#include <cmath>

#include "frsf/error.hpp"

namespace frsf {

namespace {

Json matrix_columns(const Eigen::MatrixXd& m) {
  Json cols = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::vector<double> col(m.col(c).data(), m.col(c).data() + m.rows());
    cols.push_back(col);
  }
  return cols;
}

Eigen::MatrixXd matrix_from_columns(const Json& cols, std::size_t rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto col = cols[c].get<std::vector<double>>();
    if (col.size() != rows) throw Error(ErrorKind::schema, "matrix column has the wrong length");
    for (std::size_t r = 0; r < rows; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
  }
  return m;
}

std::string kind_name(CurveKind k) {
  switch (k) {
    case CurveKind::constant: return "constant";
    case CurveKind::linear: return "linear";
    case CurveKind::spline: return "spline";
  }
  return "constant";
}

}  // namespace

Json to_json(const CfdCurve& c) {
  Json j;
  j["subject_id"] = c.subject_id;
  j["domain_start"] = c.domain_start;
  j["domain_end"] = c.domain_end;
  j["kind"] = kind_name(c.kind);
  switch (c.kind) {
    case CurveKind::constant:
      j["value"] = c.value;
      break;
    case CurveKind::linear:
      j["beta0"] = c.beta0;
      j["beta1"] = c.beta1;
      break;
    case CurveKind::spline:
      j["knots"] = c.knots;
      j["order"] = c.order;
      j["coefficients"] = c.coefficients;
      j["k_selected"] = c.k_selected;
      break;
  }
  return j;
}

CfdCurve curve_from_json(const Json& j) {
  CfdCurve c;
  c.subject_id = get_field<std::string>(j, "subject_id");
  c.domain_start = get_field<double>(j, "domain_start");
  c.domain_end = get_field<double>(j, "domain_end");
  const auto kind = get_field<std::string>(j, "kind");
  if (kind == "constant") {
    c.kind = CurveKind::constant;
    c.value = get_field<double>(j, "value");
  } else if (kind == "linear") {
    c.kind = CurveKind::linear;
    c.beta0 = get_field<double>(j, "beta0");
    c.beta1 = get_field<double>(j, "beta1");
  } else if (kind == "spline") {
    c.kind = CurveKind::spline;
    c.knots = get_field<std::vector<double>>(j, "knots");
    c.order = get_field<int>(j, "order");
    c.coefficients = get_field<std::vector<double>>(j, "coefficients");
    c.k_selected = get_field<int>(j, "k_selected");
  } else {
    throw Error(ErrorKind::schema, "unknown curve kind '" + kind + "'");
  }
  return c;
}

Json to_json(const FpcaModel& m) {
  Json j;
  j["grid"] = {{"step", m.grid.step}, {"nodes", m.grid.nodes}};
  j["mean"] = m.mean;
  j["sigma2"] = m.sigma2;
  j["fve_threshold"] = m.fve_threshold;
  j["p"] = m.p;
  j["fve_achieved"] = m.fve_achieved();
  j["eigenvalues"] = m.eigenvalues;
  j["eigenfunctions"] = matrix_columns(m.eigenfunctions);
  j["smoothing"] = {{"kernel", m.smoothing.kernel},
                    {"bw_mean", m.smoothing.bw_mean},
                    {"bw_mean_auto", m.smoothing.bw_mean_auto},
                    {"bw_cov", m.smoothing.bw_cov},
                    {"bw_cov_auto", m.smoothing.bw_cov_auto},
                    {"work_grid", m.smoothing.work_grid}};
  return j;
}

FpcaModel fpca_from_json(const Json& j) {
  FpcaModel m;
  const Json& g = j.at("grid");
  m.grid = grid_from_nodes(get_field<std::vector<double>>(g, "nodes"), get_field<double>(g, "step"));
  m.mean = get_field<std::vector<double>>(j, "mean");
  m.sigma2 = get_field<double>(j, "sigma2");
  m.fve_threshold = get_field<double>(j, "fve_threshold");
  m.p = get_field<std::size_t>(j, "p");
  m.eigenvalues = get_field<std::vector<double>>(j, "eigenvalues");
  if (!j.contains("eigenfunctions")) throw Error(ErrorKind::schema, "missing field 'eigenfunctions'");
  m.eigenfunctions = matrix_from_columns(j.at("eigenfunctions"), m.grid.size());
  if (m.mean.size() != m.grid.size()) throw Error(ErrorKind::schema, "mean length does not match the grid");
  const Json& s = j.at("smoothing");
  m.smoothing.kernel = get_field<std::string>(s, "kernel");
  m.smoothing.bw_mean = get_field<double>(s, "bw_mean");
  m.smoothing.bw_mean_auto = get_field<bool>(s, "bw_mean_auto");
  m.smoothing.bw_cov = get_field<double>(s, "bw_cov");
  m.smoothing.bw_cov_auto = get_field<bool>(s, "bw_cov_auto");
  m.smoothing.work_grid = get_field<std::size_t>(s, "work_grid");
  check_fpca_invariants(m);
  return m;
}

Json to_json(const SurvivalTree& tree) {
  Json nodes = Json::array();
  for (const auto& n : tree.nodes) {
    Json k;
    if (n.is_leaf()) {
      k["leaf"] = true;
      k["depth"] = n.depth;
      k["event_times"] = n.risk.event_times;
      k["d"] = n.risk.d;
      k["r"] = n.risk.r;
      k["n"] = n.risk.n;
      k["members"] = n.members;
    } else {
      k["leaf"] = false;
      k["depth"] = n.depth;
      k["feature"] = n.feature;
      k["feature_name"] = tree.feature_names[static_cast<std::size_t>(n.feature)];
      k["threshold"] = n.threshold;
      k["left"] = n.left;
      k["right"] = n.right;
    }
    nodes.push_back(std::move(k));
  }
  Json j;
  j["seed"] = tree.params.seed;
  j["nodes"] = std::move(nodes);
  return j;
}

SurvivalTree tree_from_json(const Json& j, const std::vector<std::string>& feature_names) {
  SurvivalTree tree;
  tree.feature_names = feature_names;
  tree.params.seed = j.at("seed").get<std::uint64_t>();
  const Json& nodes = j.at("nodes");
  if (!nodes.is_array() || nodes.empty()) throw Error(ErrorKind::schema, "tree has no nodes");
  const int count = static_cast<int>(nodes.size());
  for (const auto& k : nodes) {
    TreeNode n;
    n.depth = get_field<int>(k, "depth");
    if (get_field<bool>(k, "leaf")) {
      n.risk.event_times = get_field<std::vector<double>>(k, "event_times");
      n.risk.d = get_field<std::vector<double>>(k, "d");
      n.risk.r = get_field<std::vector<double>>(k, "r");
      n.risk.n = get_field<double>(k, "n");
      n.members = get_field<std::vector<std::size_t>>(k, "members");
      if (n.risk.d.size() != n.risk.event_times.size() || n.risk.r.size() != n.risk.event_times.size()) {
        throw Error(ErrorKind::schema, "leaf risk table columns differ in length");
      }
      finalize_leaf(n);
    } else {
      n.feature = get_field<int>(k, "feature");
      n.threshold = get_field<double>(k, "threshold");
      n.left = get_field<int>(k, "left");
      n.right = get_field<int>(k, "right");
      if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= feature_names.size() || n.left <= 0 ||
          n.right <= 0 || n.left >= count || n.right >= count) {
        throw Error(ErrorKind::schema, "internal tree node references are out of range");
      }
    }
    tree.nodes.push_back(std::move(n));
  }
  return tree;
}

Json to_json(const Forest& f) {
  Json j;
  j["n_trees"] = f.params.n_trees;
  j["mtry"] = f.params.q;
  j["min_node_events"] = f.params.tree.min_node_events;
  j["min_node_size"] = f.params.tree.min_node_size;
  j["max_depth"] = f.params.tree.max_depth;
  j["nsplit"] = f.params.tree.n_split_candidates;
  j["seed"] = f.params.seed;
  j["n_train"] = f.n_train;
  j["feature_names"] = f.feature_names;
  j["event_times"] = f.event_times;
  Json trees = Json::array();
  for (std::size_t b = 0; b < f.size(); ++b) {
    Json t = to_json(f.trees[b]);
    std::vector<std::size_t> inbag;
    for (std::size_t i = 0; i < f.n_train; ++i) {
      for (int c = 0; c < f.inbag[b][i]; ++c) inbag.push_back(i);
    }
    t["inbag"] = inbag;
    trees.push_back(std::move(t));
  }
  j["trees"] = std::move(trees);
  return j;
}

Forest forest_from_json(const Json& j) {
  Forest f;
  f.params.n_trees = get_field<int>(j, "n_trees");
  f.params.q = get_field<int>(j, "mtry");
  f.params.tree.min_node_events = get_field<int>(j, "min_node_events");
  f.params.tree.min_node_size = get_field<int>(j, "min_node_size");
  f.params.tree.max_depth = get_field<int>(j, "max_depth");
  f.params.tree.n_split_candidates = get_field<int>(j, "nsplit");
  f.params.tree.q = f.params.q;
  f.params.seed = j.at("seed").get<std::uint64_t>();
  f.n_train = get_field<std::size_t>(j, "n_train");
  f.feature_names = get_field<std::vector<std::string>>(j, "feature_names");
  f.event_times = get_field<std::vector<double>>(j, "event_times");
  for (const auto& t : j.at("trees")) {
    f.trees.push_back(tree_from_json(t, f.feature_names));
    std::vector<int> counts(f.n_train, 0);
    for (std::size_t i : get_field<std::vector<std::size_t>>(t, "inbag")) {
      if (i >= f.n_train) throw Error(ErrorKind::schema, "in-bag index out of range");
      ++counts[i];
    }
    f.inbag.push_back(std::move(counts));
  }
  if (f.trees.empty() || static_cast<int>(f.trees.size()) != f.params.n_trees) {
    throw Error(ErrorKind::schema, "tree count does not match n_trees");
  }
  f.refresh_cache();
  return f;
}

Json to_json(const FeatureFrame& frame) {
  Json j;
  j["names"] = frame.names;
  j["columns"] = frame.columns;
  j["time"] = frame.time;
  std::vector<int> ev(frame.event.begin(), frame.event.end());
  j["event"] = ev;
  return j;
}

FeatureFrame frame_from_json(const Json& j) {
  FeatureFrame f;
  f.names = get_field<std::vector<std::string>>(j, "names");
  f.columns = get_field<std::vector<std::vector<double>>>(j, "columns");
  f.time = get_field<std::vector<double>>(j, "time");
  const auto ev = get_field<std::vector<int>>(j, "event");
  f.event.assign(ev.size(), false);
  for (std::size_t i = 0; i < ev.size(); ++i) f.event[i] = ev[i] != 0;
  f.validate();
  return f;
}

}  // namespace frsf
