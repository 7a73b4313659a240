#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bnn/experiment.hpp"
#include "bnn/rng.hpp"

using namespace bnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// tiny regression pipeline: 2-feature synthetic data, linear model
std::string toy_hmc_config() {
  return R"({
    "kind": "hmc",
    "seed": 3,
    "model": {"input_dim": 2, "hidden": [], "activation": "identity",
              "head": "regression_fixed_std", "fixed_noise_std": 0.5},
    "prior": {"family": "gaussian", "variance": 1.0},
    "data": {"source": "synthetic",
             "synthetic": {"intervals": [[0.0, 1.0]], "points_per_interval": 8,
                            "teacher_hidden": [4], "noise_std": 0.1}},
    "hmc": {"step_size": 0.05, "n_burnin": 2, "n_samples": 3, "n_chains": 1}
  })";
}

std::string toy_sgd_config() {
  return R"({
    "kind": "sgd",
    "seed": 5,
    "model": {"input_dim": 2, "hidden": [], "activation": "identity",
              "head": "regression_fixed_std", "fixed_noise_std": 0.5},
    "prior": {"family": "gaussian", "variance": 1.0},
    "data": {"source": "synthetic",
             "synthetic": {"intervals": [[0.0, 1.0]], "points_per_interval": 8,
                            "teacher_hidden": [4], "noise_std": 0.1}},
    "train": {"base_lr": 0.05, "n_epochs": 40}
  })";
}

}  // namespace

TEST_CASE("minimal config parses with defaults materialized") {
  const auto config = parse_config(toy_sgd_config());
  CHECK(config.kind == ExperimentKind::Sgd);
  CHECK(config.seed == 5);
  CHECK(config.resolved.at("posterior").at("temperature") == 1.0);
  CHECK(config.resolved.at("train").at("momentum") == 0.0);
  CHECK(config.resolved.at("train").at("schedule") == "constant");
}

TEST_CASE("unknown keys are rejected with their path") {
  const std::string bad = R"({
    "kind": "sgd",
    "model": {"input_dim": 2, "head": "regression_fixed_std"},
    "prior": {"family": "gaussian"},
    "data": {"source": "synthetic"},
    "train": {"base_lr": 0.1, "learning_rate": 0.1}
  })";
  try {
    parse_config(bad);
    FAIL("expected a config error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("$.train.learning_rate") != std::string::npos);
    CHECK(msg.find("unknown key") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("{\"kind\": \"warp\"}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("not json"), std::invalid_argument);
}

TEST_CASE("parse-serialize round-trip is stable") {
  const auto config = parse_config(toy_hmc_config());
  const auto again = parse_config(serialize_config(config));
  CHECK(config.resolved == again.resolved);
}

TEST_CASE("hmc run writes the advertised artifacts") {
  TempDir dir("bnn_exp_hmc");
  const auto config = parse_config(toy_hmc_config());
  const auto result = run_experiment(config, dir.path);
  CHECK(result.manifest.at("status") == "ok");
  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(fs::exists(dir.path / "metrics.csv"));
  const SampleStore store = load_store((dir.path / "chain_0.bnns").string());
  CHECK(store.samples.rows() == 3);
  const std::string metrics = slurp(dir.path / "metrics.csv");
  CHECK(metrics.find("chain0_accept_rate") != std::string::npos);
  // config snapshot in the manifest matches the resolved config
  CHECK(result.manifest.at("config") == config.resolved);
}

TEST_CASE("identical config and seed reproduce bitwise-identical artifacts") {
  TempDir a("bnn_exp_rerun_a"), b("bnn_exp_rerun_b");
  const auto config = parse_config(toy_hmc_config());
  run_experiment(config, a.path);
  run_experiment(config, b.path);
  CHECK(slurp(a.path / "metrics.csv") == slurp(b.path / "metrics.csv"));
  CHECK(slurp(a.path / "chain_0.bnns") == slurp(b.path / "chain_0.bnns"));
}

TEST_CASE("compare kind reports agreement and total variation") {
  TempDir dir("bnn_exp_compare");
  fs::create_directories(dir.path);
  // two small stores over a 3-class model and a matching dataset file
  ModelSpec model;
  model.input_dim = 2;
  model.hidden_widths = {3};
  model.head = HeadKind::Classification;
  model.num_classes = 3;
  for (int which = 0; which < 2; ++which) {
    SampleStore store;
    store.chain_id = "test";
    store.samples.resize(4, param_count(model));
    for (Eigen::Index i = 0; i < 4; ++i)
      store.samples.row(i) =
          init_params(model, 0.5,
                      static_cast<std::uint64_t>(10 * which + i))
              .transpose();
    save_store(store, (dir.path / ("store" + std::to_string(which) + ".bnns"))
                          .string());
  }
  Dataset data;
  Rng rng(30);
  data.inputs.resize(6, 2);
  for (Eigen::Index i = 0; i < 12; ++i) data.inputs(i / 2, i % 2) = rng.normal();
  data.labels = {0, 1, 2, 0, 1, 2};
  save_classification(dir.path / "test.bin", data, 3);

  nlohmann::json cfg = {
      {"kind", "compare"},
      {"stores", {(dir.path / "store0.bnns").string(),
                  (dir.path / "store1.bnns").string()}},
      {"model", {{"input_dim", 2}, {"hidden", {3}}, {"head", "classification"},
                 {"num_classes", 3}}},
      {"test_data", {{"source", "classification"},
                     {"path", (dir.path / "test.bin").string()}}}};
  const auto result =
      run_experiment(parse_config(cfg.dump()), dir.path / "run");
  const std::string metrics = slurp(dir.path / "run" / "metrics.csv");
  CHECK(metrics.find("agreement") != std::string::npos);
  CHECK(metrics.find("total_variation") != std::string::npos);
  CHECK(result.manifest.at("status") == "ok");
}

TEST_CASE("failed runs leave a manifest naming the stage") {
  TempDir dir("bnn_exp_fail");
  nlohmann::json cfg = {
      {"kind", "bma_eval"},
      {"stores", {"/nonexistent/store.bnns"}},
      {"model", {{"input_dim", 2}, {"head", "classification"},
                 {"num_classes", 2}}},
      {"test_data", {{"source", "classification"},
                     {"path", "/nonexistent/data.bin"}}}};
  CHECK_THROWS(run_experiment(parse_config(cfg.dump()), dir.path));
  const auto manifest =
      nlohmann::json::parse(slurp(dir.path / "manifest.json"));
  CHECK(manifest.at("status") == "failed");
  CHECK(manifest.at("failed_stage") == "stores");
  CHECK(manifest.contains("error"));
}

TEST_CASE("temperature sweep fans out children and aggregates") {
  TempDir dir("bnn_exp_sweep");
  nlohmann::json cfg = nlohmann::json::parse(toy_sgd_config());
  nlohmann::json sweep = {
      {"kind", "temperature_sweep"},
      {"seed", 1},
      {"workers", 2},
      {"sweep", {{"values", {0.1, 1.0, 10.0}}, {"seeds", {1, 2}},
                 {"child", cfg}}}};
  const auto result = run_experiment(parse_config(sweep.dump()), dir.path);
  CHECK(result.manifest.at("status") == "ok");

  // 3 axis values x 2 seeds = 6 child manifests
  int children = 0;
  for (const auto& entry : fs::directory_iterator(dir.path))
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
      ++children;
  CHECK(children == 6);

  // recompute one aggregate cell by hand from the child metric files
  const std::string sweep_csv = slurp(dir.path / "sweep.csv");
  CHECK(sweep_csv.rfind("axis,value,metric,mean,std\n", 0) == 0);
  auto child_metric = [&](double value, std::uint64_t seed) {
    std::ostringstream name;
    name << "temperature_" << value << "_seed_" << seed;
    const std::string metrics = slurp(dir.path / name.str() / "metrics.csv");
    const auto pos = metrics.find("final_log_joint,");
    REQUIRE(pos != std::string::npos);
    return std::stod(metrics.substr(pos + 16));
  };
  const double m1 = child_metric(0.1, 1), m2 = child_metric(0.1, 2);
  const double mean = (m1 + m2) / 2.0;
  std::ostringstream want;
  want.precision(17);
  want << "temperature," << 0.1 << ",final_log_joint," << mean << ',';
  CHECK(sweep_csv.find(want.str()) != std::string::npos);
}

TEST_CASE("an axis of length one with one seed is a single child run") {
  TempDir dir("bnn_exp_sweep1");
  nlohmann::json cfg = nlohmann::json::parse(toy_sgd_config());
  nlohmann::json sweep = {
      {"kind", "prior_sweep"},
      {"seed", 5},
      {"sweep", {{"values", {1.0}}, {"child", cfg}}}};
  run_experiment(parse_config(sweep.dump()), dir.path);

  // the single child must match a direct run of the child config
  TempDir solo("bnn_exp_solo");
  run_experiment(parse_config(toy_sgd_config()), solo.path);
  CHECK(slurp(dir.path / "prior_variance_1_seed_5" / "metrics.csv") ==
        slurp(solo.path / "metrics.csv"));
}

TEST_CASE("synth_gen writes the dataset and teacher") {
  TempDir dir("bnn_exp_synth");
  const std::string cfg = R"({
    "kind": "synth_gen", "seed": 4,
    "data": {"source": "synthetic",
             "synthetic": {"teacher_hidden": [6], "points_per_interval": 5}}
  })";
  const auto result = run_experiment(parse_config(cfg), dir.path);
  CHECK(result.manifest.at("status") == "ok");
  const std::string csv = slurp(dir.path / "dataset.csv");
  CHECK(csv.rfind("x,x_squared,y\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);  // header + 15 rows
  CHECK(fs::exists(dir.path / "teacher.bnns"));
}
