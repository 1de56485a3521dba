#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "frsf/longdata.hpp"
#include "frsf/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using frsf::read_text_file;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = frsf::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("frsf_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// 50-subject simulated data with Age and Gender.
fs::path simulated(const std::string& name) {
  const auto dir = scratch(name);
  const auto r = cli({"simulate", "--n", "50", "--gamma", "1,0", "--noise-covariates", "--seed", "5", "--out",
                      dir.string()});
  REQUIRE(r.code == 0);
  return dir;
}

std::vector<std::string> fit_args(const fs::path& data, const fs::path& out) {
  return {"fit", "--obs", (data / "observations.csv").string(), "--subjects", (data / "subjects.csv").string(),
          "--ntrees", "10", "--seed", "3", "--out", out.string()};
}

}  // namespace

TEST_CASE("fit is byte-identical on rerun") {
  const auto data = simulated("fit");
  const auto a = data / "a", b = data / "b";
  REQUIRE(cli(fit_args(data, a)).code == 0);
  REQUIRE(cli(fit_args(data, b)).code == 0);
  CHECK(read_text_file((a / "model.json").string()) == read_text_file((b / "model.json").string()));
}

TEST_CASE("missing subjects file exits 2 naming the problem") {
  const auto data = simulated("missing");
  auto args = fit_args(data, data / "m");
  args[4] = (data / "nope.csv").string();
  const auto r = cli(args);
  CHECK(r.code == 2);
  CHECK(r.err.find("not found") != std::string::npos);
}

TEST_CASE("grid step larger than the domain exits 2") {
  const auto data = simulated("bigh");
  auto args = fit_args(data, data / "m");
  args.insert(args.end(), {"--h", "1000"});
  const auto r = cli(args);
  CHECK(r.code == 2);
  CHECK(r.err.find("parameter") != std::string::npos);
}

TEST_CASE("unknown flags and bad fractions exit 2") {
  CHECK(cli({"fit", "--bogus"}).code == 2);
  const auto data = simulated("frac");
  auto args = fit_args(data, data / "e");
  args[0] = "eval";
  args.insert(args.end(), {"--train-frac", "1.5"});
  CHECK(cli(args).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("eval aggregates repeats and the fraction enters the split seed") {
  const auto data = simulated("eval");
  auto args = fit_args(data, data / "e");
  args[0] = "eval";
  args.insert(args.end(), {"--train-frac", "0.5,0.8", "--repeats", "3", "--arms", "std,cfd"});
  const auto r = cli(args);
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(read_text_file((data / "e" / "report.json").string()));
  // one entry per (arm, fraction), fractions inner
  REQUIRE(report["arms"].size() == 4);
  const auto& half = report["arms"][0];
  const auto& most = report["arms"][1];
  CHECK(half["train_frac"] == 0.5);
  CHECK(most["train_frac"] == 0.8);
  CHECK(half["runs"].size() == 3);
  CHECK(half["summary"]["crps"].contains("mean"));
  CHECK(half["summary"]["crps"].contains("sd"));
  CHECK(half["runs"][0]["n_train"] != most["runs"][0]["n_train"]);
  const auto csv = read_text_file((data / "e" / "report.csv").string());
  CHECK(csv.rfind("metric,value\n", 0) == 0);
  CHECK(csv.find("train_frac=0.8/rpe_as_one_minus_cindex_mean") != std::string::npos);
}

TEST_CASE("vimp puts the signal first and is stable") {
  const auto data = simulated("vimp");
  REQUIRE(cli(fit_args(data, data / "m")).code == 0);
  const auto model = (data / "m" / "model.json").string();
  REQUIRE(cli({"vimp", "--model", model, "--repeats", "3", "--out", (data / "v1").string()}).code == 0);
  REQUIRE(cli({"vimp", "--model", model, "--repeats", "3", "--out", (data / "v2").string()}).code == 0);
  const auto a = read_text_file((data / "v1" / "vimp.csv").string());
  CHECK(a == read_text_file((data / "v2" / "vimp.csv").string()));
  CHECK(a.rfind("variable,importance,relative_importance\n", 0) == 0);
  CHECK(cli({"vimp", "--model", (data / "none.json").string()}).code == 2);
}

TEST_CASE("predict on the training data reproduces in-bag mortality") {
  const auto data = simulated("predict");
  REQUIRE(cli(fit_args(data, data / "m")).code == 0);
  const auto model_path = (data / "m" / "model.json").string();
  REQUIRE(cli({"predict", "--model", model_path, "--obs", (data / "observations.csv").string(), "--subjects",
               (data / "subjects.csv").string(), "--out", (data / "p").string()})
              .code == 0);
  const auto model = frsf::model_from_json(frsf::Json::parse(read_text_file(model_path)));
  std::istringstream csv(read_text_file((data / "p" / "predictions.csv").string()));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("subject_id,mortality", 0) == 0);
  std::size_t i = 0;
  while (std::getline(csv, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    const double m = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    CHECK(m == doctest::Approx(frsf::mortality_ib(model.forest, model.frame.row(i))).epsilon(1e-12));
    ++i;
  }
  CHECK(i == 50);
}

TEST_CASE("predict schema mismatch and empty input") {
  const auto data = simulated("schema");
  REQUIRE(cli(fit_args(data, data / "m")).code == 0);
  const auto model = (data / "m" / "model.json").string();
  frsf::write_text_file((data / "s_bad.csv").string(), "subject_id,event_time,event,Age\nS001,3,1,50\n");
  frsf::write_text_file((data / "o_one.csv").string(), "subject_id,time,value\nS001,0,1.0\n");
  const auto bad = cli({"predict", "--model", model, "--obs", (data / "o_one.csv").string(), "--subjects",
                        (data / "s_bad.csv").string(), "--out", (data / "p").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("Gender") != std::string::npos);
  frsf::write_text_file((data / "s_extra.csv").string(),
                        "subject_id,event_time,event,Age,Gender,Charlson\nS001,3,1,50,1,2\n");
  CHECK(cli({"predict", "--model", model, "--obs", (data / "o_one.csv").string(), "--subjects",
             (data / "s_extra.csv").string(), "--out", (data / "p").string()})
            .code == 2);
  frsf::write_text_file((data / "s_empty.csv").string(), "subject_id,event_time,event,Age,Gender\n");
  frsf::write_text_file((data / "o_empty.csv").string(), "subject_id,time,value\n");
  const auto empty = cli({"predict", "--model", model, "--obs", (data / "o_empty.csv").string(), "--subjects",
                          (data / "s_empty.csv").string(), "--out", (data / "pe").string()});
  CHECK(empty.code == 0);
  const auto text = read_text_file((data / "pe" / "predictions.csv").string());
  CHECK(text.rfind("subject_id,mortality", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
}

TEST_CASE("config file supplies defaults and flags win") {
  const auto data = simulated("config");
  frsf::write_text_file((data / "cfg.json").string(), R"({"ntrees": 4, "seed": 99})");
  auto args = fit_args(data, data / "c");
  args.insert(args.end(), {"--config", (data / "cfg.json").string()});
  const auto r = cli(args);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(read_text_file((data / "c" / "model.json").string()));
  CHECK(j["config"]["ntrees"] == 10);  // flag wins
  CHECK(j["config"]["seed"] == 3);
  auto only = std::vector<std::string>{"fit", "--obs", (data / "observations.csv").string(), "--subjects",
                                       (data / "subjects.csv").string(), "--config", (data / "cfg.json").string(),
                                       "--out", (data / "d").string()};
  REQUIRE(cli(only).code == 0);
  const auto k = nlohmann::json::parse(read_text_file((data / "d" / "model.json").string()));
  CHECK(k["config"]["ntrees"] == 4);
  CHECK(k["config"]["seed"] == 99);
}
