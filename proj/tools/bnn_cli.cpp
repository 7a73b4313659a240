// Command-line front end for the workbench. Links only the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bnn/bnn_capi.h"

namespace {

int status_to_exit(bnn_status status) {
  switch (status) {
    case BNN_OK: return 0;
    case BNN_ERR_INVALID: return 1;
    case BNN_ERR_RUNTIME: return 2;
  }
  return 2;
}

struct Options {
  std::string out_dir = "out";
  bool quiet = false;
};

void note(const Options& opt, const std::string& message) {
  if (!opt.quiet) std::cout << message << '\n';
}

int report(const Options& opt, bnn_status status, const std::string& what) {
  if (status != BNN_OK) {
    std::cerr << "error: " << what << ": " << bnn_last_error() << '\n';
  } else {
    note(opt, what + ": ok -> " + opt.out_dir);
  }
  return status_to_exit(status);
}

// Reads the config file and applies command-line overrides to the raw JSON
// before handing it to the library, so seed-derived defaults re-resolve.
int run_config(const Options& opt, const std::string& config_path,
               const std::optional<std::uint64_t>& seed,
               const std::optional<int>& workers,
               const std::string& expect_kind_contains,
               const std::string& what) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in.good()) {
    std::cerr << "error: cannot read config file '" << config_path << "'\n";
    return 1;
  }
  std::ostringstream text;
  text << in.rdbuf();

  std::string config = text.str();
  nlohmann::json parsed =
      nlohmann::json::parse(config, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    std::cerr << "error: '" << config_path << "' is not a JSON object\n";
    return 1;
  }
  if (!expect_kind_contains.empty()) {
    const std::string kind = parsed.value("kind", "");
    if (kind.find(expect_kind_contains) == std::string::npos) {
      std::cerr << "error: config kind '" << kind << "' does not match this "
                << "subcommand (expected a '" << expect_kind_contains
                << "' kind)\n";
      return 1;
    }
  }
  if (seed) parsed["seed"] = *seed;
  if (workers) parsed["workers"] = *workers;
  config = parsed.dump();

  return report(opt, bnn_run_experiment(config.c_str(), opt.out_dir.c_str()),
                what);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian neural network posterior workbench"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--out", opt.out_dir, "Output directory for run artifacts");
  app.add_flag("--quiet", opt.quiet, "Suppress progress output");

  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--workers", workers, "Override the config worker count");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("config", config_path, "Experiment config file")->required();

  auto* sweep =
      app.add_subcommand("sweep", "Fan out a sweep config over its axis");
  sweep->add_option("config", config_path, "Sweep config file")->required();

  auto* scan =
      app.add_subcommand("scan", "Scan a 2D posterior subspace from a config");
  scan->add_option("config", config_path, "Subspace-scan config file")
      ->required();

  std::vector<std::string> store_paths;
  std::string data_path;
  auto* diag = app.add_subcommand("diag", "Diagnostics");
  auto* rhat = diag->add_subcommand(
      "rhat", "Split-free Gelman-Rubin R-hat across chain stores");
  rhat->add_option("stores", store_paths, "Two or more .bnns stores")
      ->required()
      ->expected(2, -1);
  rhat->add_option("--data", data_path,
                   "Optional test data for function-space R-hat");
  diag->require_subcommand(1);

  std::string store_path, ref_path;
  auto* eval = app.add_subcommand("eval", "Evaluation");
  auto* bma = eval->add_subcommand(
      "bma", "Posterior-averaged test metrics for one store");
  bma->add_option("store", store_path, "Sample store (.bnns)")->required();
  bma->add_option("data", data_path,
                  "Test data (.bin classification container or table)")
      ->required();
  eval->require_subcommand(1);

  auto* compare = app.add_subcommand(
      "compare", "Agreement / total variation between two stores");
  compare->add_option("store_ref", ref_path, "Reference store")->required();
  compare->add_option("store", store_path, "Store to compare")->required();
  compare->add_option("data", data_path, "Shared test data")->required();

  // global flags stay usable after subcommand positionals
  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();
    for (auto* nested : sub->get_subcommands({})) nested->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage and config problems exit 1
  }

  if (run->parsed())
    return run_config(opt, config_path, seed, workers, "", "run");
  if (sweep->parsed())
    return run_config(opt, config_path, seed, workers, "sweep", "sweep");
  if (scan->parsed())
    return run_config(opt, config_path, seed, workers, "subspace_scan",
                      "scan");
  if (diag->parsed()) {
    std::vector<const char*> paths;
    paths.reserve(store_paths.size());
    for (const auto& p : store_paths) paths.push_back(p.c_str());
    return report(opt,
                  bnn_diag_rhat(paths.data(), static_cast<int>(paths.size()),
                                data_path.empty() ? nullptr : data_path.c_str(),
                                opt.out_dir.c_str()),
                  "diag rhat");
  }
  if (eval->parsed())
    return report(opt,
                  bnn_eval_bma(store_path.c_str(), data_path.c_str(),
                               opt.out_dir.c_str()),
                  "eval bma");
  if (compare->parsed())
    return report(opt,
                  bnn_compare(ref_path.c_str(), store_path.c_str(),
                              data_path.c_str(), opt.out_dir.c_str()),
                  "compare");
  return 1;
}
