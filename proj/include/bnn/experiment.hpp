#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bnn/approx.hpp"
#include "bnn/data.hpp"
#include "bnn/hmc.hpp"
#include "bnn/posterior.hpp"

namespace bnn {

enum class ExperimentKind {
  Hmc,
  Sgld,
  Sghmc,
  Sgd,
  Ensemble,
  Mfvi,
  Rhat,
  Burnin,
  BmaEval,
  Compare,
  SubspaceScan,
  SynthGen,
  TemperatureSweep,
  PriorSweep,
  RobustnessSweep,
};

std::string kind_name(ExperimentKind kind);
ExperimentKind kind_from_name(const std::string& name);

// Parsed and fully resolved experiment description. `resolved` materializes
// every default so the manifest always shows the values actually used.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Hmc;
  std::uint64_t seed = 0;
  int workers = 1;
  nlohmann::json resolved;
};

// Strict JSON parsing: unknown keys anywhere are rejected with a
// path-qualified error ("$.hmc.step_sizes: unknown key").
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);

struct RunResult {
  std::filesystem::path run_dir;
  nlohmann::json manifest;
};

// Executes the configured pipeline inside `out_dir` (created if needed).
// Artifacts: manifest.json, metrics.csv, BNNS stores, kind-specific CSV/JSON.
// Failures still write a manifest with status "failed" and the causing stage,
// then rethrow.
RunResult run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& out_dir);

// Fan-out over the sweep axis (and seed list) with isolated child run
// directories, then a tidy aggregate CSV (axis value, metric, mean, std).
RunResult run_sweep(const ExperimentConfig& config,
                    const std::filesystem::path& out_dir);

// Helpers shared with the C API / CLI; all built from resolved config blocks.
ModelSpec model_from_json(const nlohmann::json& j);
PriorSpec prior_from_json(const nlohmann::json& j);
Dataset dataset_from_json(const nlohmann::json& j, std::uint64_t seed,
                          int* num_classes = nullptr);

}  // namespace bnn
