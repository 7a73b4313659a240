#include "bnn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bnn/diagnostics.hpp"
#include "bnn/evaluate.hpp"
#include "bnn/rng.hpp"
#include "bnn/subspace.hpp"

namespace bnn {
namespace {

using nlohmann::json;

constexpr const char* kCodeVersion = "bnn-workbench 0.1.0";

[[noreturn]] void config_error(const std::string& path,
                               const std::string& message) {
  throw std::invalid_argument(path + ": " + message);
}

// Strict object view: every key must be consumed, leftovers are errors.
class StrictView {
 public:
  StrictView(const json& obj, std::string path)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) config_error(path_, "expected a JSON object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& raw(const std::string& key) {
    mark(key);
    return obj_.at(key);
  }

  template <typename T>
  T require(const std::string& key) {
    if (!obj_.contains(key)) config_error(path_, "missing key '" + key + "'");
    return convert<T>(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!obj_.contains(key)) return fallback;
    return convert<T>(key);
  }

  StrictView child(const std::string& key) {
    mark(key);
    return StrictView(obj_.at(key), path_ + "." + key);
  }

  void done() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) config_error(path_ + "." + key, "unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  void mark(const std::string& key) { seen_.insert(key); }

  template <typename T>
  T convert(const std::string& key) {
    mark(key);
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      config_error(path_ + "." + key, "wrong type");
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string metrics_csv(const std::vector<std::pair<std::string, double>>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,value\n";
  for (const auto& [key, value] : rows) out << key << ',' << value << '\n';
  return out.str();
}

Activation activation_from_name(const std::string& name,
                                const std::string& path) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "swish") return Activation::Swish;
  config_error(path, "unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Swish: return "swish";
  }
  return "swish";
}

HeadKind head_from_name(const std::string& name, const std::string& path) {
  if (name == "regression_mean_std") return HeadKind::RegressionMeanStd;
  if (name == "regression_fixed_std") return HeadKind::RegressionFixedStd;
  if (name == "classification") return HeadKind::Classification;
  config_error(path, "unknown head '" + name + "'");
}

std::string head_name(HeadKind h) {
  switch (h) {
    case HeadKind::RegressionMeanStd: return "regression_mean_std";
    case HeadKind::RegressionFixedStd: return "regression_fixed_std";
    case HeadKind::Classification: return "classification";
  }
  return "classification";
}

json model_to_json(const ModelSpec& model) {
  return {{"input_dim", model.input_dim},
          {"hidden", model.hidden_widths},
          {"activation", activation_name(model.activation)},
          {"head", head_name(model.head)},
          {"num_classes", model.num_classes},
          {"fixed_noise_std", model.fixed_noise_std}};
}

json prior_to_json(const PriorSpec& prior) {
  json j;
  switch (prior.family) {
    case PriorFamily::Gaussian:
      j = {{"family", "gaussian"}, {"variance", prior.variance}};
      break;
    case PriorFamily::MixtureOfGaussians:
      j = {{"family", "mixture"},
           {"mog_variance1", prior.mog_variance1},
           {"mog_variance2", prior.mog_variance2},
           {"mog_weight1", prior.mog_weight1}};
      break;
    case PriorFamily::Logistic:
      j = {{"family", "logistic"},
           {"logistic_variance", prior.logistic_variance}};
      break;
  }
  return j;
}

ModelSpec model_from_view(StrictView view) {
  ModelSpec model;
  model.input_dim = view.require<int>("input_dim");
  model.hidden_widths = view.get<std::vector<int>>("hidden", {});
  model.activation =
      activation_from_name(view.get<std::string>("activation", "swish"),
                           view.path() + ".activation");
  model.head = head_from_name(view.get<std::string>("head", "classification"),
                              view.path() + ".head");
  model.num_classes = view.get<int>("num_classes", 2);
  model.fixed_noise_std = view.get<double>("fixed_noise_std", 1.0);
  view.done();
  model.validate();
  return model;
}

PriorSpec prior_from_view(StrictView view) {
  PriorSpec prior;
  const std::string family = view.get<std::string>("family", "gaussian");
  if (family == "gaussian") {
    prior.family = PriorFamily::Gaussian;
    prior.variance = view.get<double>("variance", 1.0);
  } else if (family == "mixture") {
    prior.family = PriorFamily::MixtureOfGaussians;
    prior.mog_variance1 = view.get<double>("mog_variance1", 1.0);
    prior.mog_variance2 = view.get<double>("mog_variance2", 0.01);
    prior.mog_weight1 = view.get<double>("mog_weight1", 0.5);
  } else if (family == "logistic") {
    prior.family = PriorFamily::Logistic;
    prior.logistic_variance = view.get<double>("logistic_variance", 1.0);
  } else {
    config_error(view.path() + ".family", "unknown prior family '" + family + "'");
  }
  view.done();
  prior.validate();
  return prior;
}

struct DataBlock {
  std::string source;  // synthetic | table | classification
  std::string path;
  std::string use = "full";  // table only: train | test | full
  char delimiter = 0;
  SplitSpec split;
  bool has_split = false;
  SyntheticRegressionConfig synthetic;
  double corrupt_sigma = 0.0;
  std::uint64_t corrupt_seed = 0;
  json resolved;
};

DataBlock data_from_view(StrictView view, std::uint64_t default_seed) {
  DataBlock block;
  block.source = view.require<std::string>("source");
  if (block.source == "synthetic") {
    if (view.has("synthetic")) {
      StrictView syn = view.child("synthetic");
      auto pairs = syn.get<std::vector<std::vector<double>>>(
          "intervals", {{-10.0, -6.0}, {6.0, 10.0}, {14.0, 18.0}});
      block.synthetic.intervals.clear();
      for (const auto& pair : pairs) {
        if (pair.size() != 2)
          config_error(syn.path() + ".intervals", "each interval is [lo, hi]");
        block.synthetic.intervals.emplace_back(pair[0], pair[1]);
      }
      block.synthetic.points_per_interval =
          syn.get<int>("points_per_interval", 40);
      block.synthetic.teacher_hidden =
          syn.get<std::vector<int>>("teacher_hidden", {100, 100, 100});
      block.synthetic.teacher_weight_std =
          syn.get<double>("teacher_weight_std", 0.1);
      block.synthetic.noise_std = syn.get<double>("noise_std", 0.02);
      block.synthetic.seed = syn.get<std::uint64_t>("seed", default_seed);
      syn.done();
    } else {
      block.synthetic.seed = default_seed;
    }
  } else if (block.source == "table" || block.source == "classification") {
    block.path = view.require<std::string>("path");
    const std::string delim = view.get<std::string>("delimiter", "");
    if (delim.size() > 1)
      config_error(view.path() + ".delimiter", "must be a single character");
    block.delimiter = delim.empty() ? 0 : delim[0];
    if (view.has("split")) {
      StrictView sp = view.child("split");
      block.split.train_fraction = sp.get<double>("fraction", 0.9);
      block.split.seed = sp.get<std::uint64_t>("seed", default_seed);
      block.split.index = sp.get<int>("index", 0);
      sp.done();
      block.has_split = true;
    }
    block.use = view.get<std::string>("use", "full");
    if (block.use != "train" && block.use != "test" && block.use != "full")
      config_error(view.path() + ".use", "expected train, test or full");
  } else {
    config_error(view.path() + ".source",
                 "unknown source '" + block.source + "'");
  }
  block.corrupt_sigma = view.get<double>("corrupt_sigma", 0.0);
  block.corrupt_seed = view.get<std::uint64_t>("corrupt_seed", default_seed);
  view.done();

  block.resolved = {{"source", block.source},
                    {"corrupt_sigma", block.corrupt_sigma},
                    {"corrupt_seed", block.corrupt_seed}};
  if (block.source == "synthetic") {
    json intervals = json::array();
    for (const auto& [lo, hi] : block.synthetic.intervals)
      intervals.push_back({lo, hi});
    block.resolved["synthetic"] = {
        {"intervals", intervals},
        {"points_per_interval", block.synthetic.points_per_interval},
        {"teacher_hidden", block.synthetic.teacher_hidden},
        {"teacher_weight_std", block.synthetic.teacher_weight_std},
        {"noise_std", block.synthetic.noise_std},
        {"seed", block.synthetic.seed}};
  } else {
    block.resolved["path"] = block.path;
    block.resolved["use"] = block.use;
    if (block.has_split)
      block.resolved["split"] = {{"fraction", block.split.train_fraction},
                                 {"seed", block.split.seed},
                                 {"index", block.split.index}};
  }
  return block;
}

struct LoadedData {
  Dataset data;
  int num_classes = 0;
  double target_std = 1.0;  // standardization scale when a split was applied
};

LoadedData load_block(const DataBlock& block) {
  LoadedData out;
  if (block.source == "synthetic") {
    out.data = gen_synthetic_regression(block.synthetic).train;
  } else if (block.source == "table") {
    if (block.has_split) {
      const auto split = load_uci(block.path, block.split, block.delimiter);
      out.target_std = split.standardizer.target_std;
      if (block.use == "train")
        out.data = split.train;
      else if (block.use == "test")
        out.data = split.test;
      else
        config_error("$.data.use", "split tables need use = train or test");
    } else {
      out.data = load_regression_table(block.path, block.delimiter);
    }
  } else {
    out.data = load_classification(block.path, &out.num_classes);
  }
  if (block.corrupt_sigma > 0.0)
    out.data = corrupt_gaussian(out.data, block.corrupt_sigma,
                                block.corrupt_seed);
  return out;
}

TrainConfig train_from_view(StrictView view, std::uint64_t default_seed) {
  TrainConfig cfg;
  const std::string schedule = view.get<std::string>("schedule", "constant");
  if (schedule == "constant")
    cfg.schedule = LrSchedule::Constant;
  else if (schedule == "cosine")
    cfg.schedule = LrSchedule::Cosine;
  else if (schedule == "cyclical")
    cfg.schedule = LrSchedule::Cyclical;
  else
    config_error(view.path() + ".schedule", "unknown schedule '" + schedule + "'");
  cfg.n_cycles = view.get<int>("n_cycles", 1);
  cfg.base_lr = view.get<double>("base_lr", 1e-3);
  cfg.batch_size = view.get<Eigen::Index>("batch_size", 0);
  cfg.n_epochs = view.get<long>("n_epochs", 100);
  cfg.momentum = view.get<double>("momentum", 0.0);
  cfg.seed = view.get<std::uint64_t>("seed", default_seed);
  const std::string precond = view.get<std::string>("preconditioner", "none");
  if (precond == "none")
    cfg.preconditioner = Preconditioner::None;
  else if (precond == "rms")
    cfg.preconditioner = Preconditioner::Rms;
  else
    config_error(view.path() + ".preconditioner", "unknown preconditioner");
  cfg.rms_decay = view.get<double>("rms_decay", 0.99);
  cfg.rms_epsilon = view.get<double>("rms_epsilon", 1e-8);
  cfg.n_burnin_epochs = view.get<long>("n_burnin_epochs", 0);
  cfg.thin_epochs = view.get<long>("thin_epochs", 10);
  view.done();
  return cfg;
}

json train_to_json(const TrainConfig& cfg) {
  const char* schedule = cfg.schedule == LrSchedule::Constant ? "constant"
                         : cfg.schedule == LrSchedule::Cosine ? "cosine"
                                                              : "cyclical";
  return {{"schedule", schedule},
          {"n_cycles", cfg.n_cycles},
          {"base_lr", cfg.base_lr},
          {"batch_size", cfg.batch_size},
          {"n_epochs", cfg.n_epochs},
          {"momentum", cfg.momentum},
          {"seed", cfg.seed},
          {"preconditioner",
           cfg.preconditioner == Preconditioner::Rms ? "rms" : "none"},
          {"rms_decay", cfg.rms_decay},
          {"rms_epsilon", cfg.rms_epsilon},
          {"n_burnin_epochs", cfg.n_burnin_epochs},
          {"thin_epochs", cfg.thin_epochs}};
}

// ---------------------------------------------------------------------------
// resolved-config construction

json resolve_config(const json& root);

json resolve_sweep_child(const json& child) {
  if (!child.is_object())
    config_error("$.sweep.child", "expected a JSON object");
  return resolve_config(child);
}

json resolve_config(const json& root) {
  StrictView view(root, "$");
  json resolved;
  const std::string kind = view.require<std::string>("kind");
  resolved["kind"] = kind;
  const ExperimentKind k = kind_from_name(kind);
  resolved["seed"] = view.get<std::uint64_t>("seed", 0);
  resolved["workers"] = view.get<int>("workers", 1);
  if (resolved["workers"].get<int>() < 1)
    config_error("$.workers", "must be >= 1");
  const std::uint64_t seed = resolved["seed"].get<std::uint64_t>();

  auto need_model = [&] {
    resolved["model"] = model_to_json(model_from_view(view.child("model")));
  };
  auto need_prior = [&] {
    resolved["prior"] = prior_to_json(prior_from_view(view.child("prior")));
  };
  auto need_data = [&] {
    resolved["data"] = data_from_view(view.child("data"), seed).resolved;
  };
  auto maybe_test_data = [&] {
    if (view.has("test_data"))
      resolved["test_data"] =
          data_from_view(view.child("test_data"), seed).resolved;
  };
  auto need_posterior = [&] {
    if (view.has("posterior")) {
      StrictView pv = view.child("posterior");
      resolved["posterior"] = {
          {"temperature", pv.get<double>("temperature", 1.0)},
          {"num_shards", pv.get<int>("num_shards", 1)}};
      pv.done();
    } else {
      resolved["posterior"] = {{"temperature", 1.0}, {"num_shards", 1}};
    }
  };
  auto need_train = [&] {
    resolved["train"] = train_to_json(
        view.has("train") ? train_from_view(view.child("train"), seed)
                          : TrainConfig{.seed = seed});
  };
  auto need_stores = [&](std::size_t min_count) {
    const auto stores = view.require<std::vector<std::string>>("stores");
    if (stores.size() < min_count)
      config_error("$.stores", "need at least " + std::to_string(min_count) +
                                   " store paths");
    resolved["stores"] = stores;
  };

  switch (k) {
    case ExperimentKind::Hmc: {
      need_model();
      need_prior();
      need_data();
      need_posterior();
      maybe_test_data();
      StrictView hv = view.child("hmc");
      json h;
      h["step_size"] = hv.require<double>("step_size");
      if (hv.has("trajectory_length"))
        h["trajectory_length"] = hv.require<double>("trajectory_length");
      h["n_burnin"] = hv.get<int>("n_burnin", 10);
      h["n_samples"] = hv.require<int>("n_samples");
      h["n_chains"] = hv.get<int>("n_chains", 1);
      hv.done();
      if (h["step_size"].get<double>() <= 0)
        config_error("$.hmc.step_size", "must be > 0");
      if (h["n_samples"].get<int>() < 1)
        config_error("$.hmc.n_samples", "must be >= 1");
      if (h["n_chains"].get<int>() < 1)
        config_error("$.hmc.n_chains", "must be >= 1");
      resolved["hmc"] = h;
      break;
    }
    case ExperimentKind::Sgld:
    case ExperimentKind::Sghmc:
    case ExperimentKind::Sgd: {
      need_model();
      need_prior();
      need_data();
      need_posterior();
      maybe_test_data();
      need_train();
      break;
    }
    case ExperimentKind::Ensemble: {
      need_model();
      need_prior();
      need_data();
      need_posterior();
      maybe_test_data();
      need_train();
      StrictView ev = view.child("ensemble");
      resolved["ensemble"] = {{"n_models", ev.require<int>("n_models")}};
      ev.done();
      if (resolved["ensemble"]["n_models"].get<int>() < 1)
        config_error("$.ensemble.n_models", "must be >= 1");
      break;
    }
    case ExperimentKind::Mfvi: {
      need_model();
      need_prior();
      need_data();
      need_posterior();
      maybe_test_data();
      need_train();
      json m = {{"init_std", 0.01}, {"n_draws", 100}};
      if (view.has("mfvi")) {
        StrictView mv = view.child("mfvi");
        m["init_std"] = mv.get<double>("init_std", 0.01);
        m["n_draws"] = mv.get<int>("n_draws", 100);
        mv.done();
      }
      if (m["n_draws"].get<int>() < 1)
        config_error("$.mfvi.n_draws", "must be >= 1");
      resolved["mfvi"] = m;
      break;
    }
    case ExperimentKind::Rhat: {
      need_stores(2);
      if (view.has("model")) need_model();
      if (view.has("test_data"))
        resolved["test_data"] =
            data_from_view(view.child("test_data"), seed).resolved;
      break;
    }
    case ExperimentKind::Burnin: {
      need_stores(1);
      need_model();
      resolved["test_data"] =
          data_from_view(view.child("test_data"), seed).resolved;
      StrictView bv = view.child("burnin");
      resolved["burnin"] = {
          {"metric", bv.get<std::string>("metric", "nll")},
          {"grid", bv.require<std::vector<Eigen::Index>>("grid")},
          {"window", bv.get<Eigen::Index>("window", 100)}};
      bv.done();
      const std::string metric = resolved["burnin"]["metric"];
      if (metric != "nll" && metric != "accuracy")
        config_error("$.burnin.metric", "expected nll or accuracy");
      break;
    }
    case ExperimentKind::BmaEval: {
      need_stores(1);
      need_model();
      resolved["test_data"] =
          data_from_view(view.child("test_data"), seed).resolved;
      break;
    }
    case ExperimentKind::Compare: {
      need_stores(2);
      need_model();
      resolved["test_data"] =
          data_from_view(view.child("test_data"), seed).resolved;
      break;
    }
    case ExperimentKind::SubspaceScan: {
      need_stores(1);
      need_model();
      need_prior();
      need_data();
      need_posterior();
      StrictView sv = view.child("subspace");
      json s;
      s["anchor_indices"] =
          sv.get<std::vector<Eigen::Index>>("anchor_indices", {0, 1, 2});
      if (s["anchor_indices"].size() != 3)
        config_error("$.subspace.anchor_indices", "need exactly 3 indices");
      s["resolution"] = sv.get<int>("resolution", 20);
      if (sv.has("ranges")) {
        StrictView rv = sv.child("ranges");
        s["ranges"] = {{"a_min", rv.require<double>("a_min")},
                       {"a_max", rv.require<double>("a_max")},
                       {"b_min", rv.require<double>("b_min")},
                       {"b_max", rv.require<double>("b_max")}};
        rv.done();
      }
      sv.done();
      resolved["subspace"] = s;
      break;
    }
    case ExperimentKind::SynthGen: {
      need_data();
      if (resolved["data"]["source"] != "synthetic")
        config_error("$.data.source", "synth_gen requires synthetic data");
      break;
    }
    case ExperimentKind::TemperatureSweep:
    case ExperimentKind::PriorSweep:
    case ExperimentKind::RobustnessSweep: {
      StrictView sv = view.child("sweep");
      json s;
      const char* default_axis =
          k == ExperimentKind::TemperatureSweep ? "temperature"
          : k == ExperimentKind::PriorSweep    ? "prior_variance"
                                               : "noise_sigma";
      s["axis"] = sv.get<std::string>("axis", default_axis);
      static const std::set<std::string> axes = {
          "temperature", "prior_variance", "noise_sigma", "trajectory_length",
          "n_chains"};
      if (!axes.count(s["axis"].get<std::string>()))
        config_error("$.sweep.axis", "unknown axis");
      s["values"] = sv.require<std::vector<double>>("values");
      if (s["values"].empty())
        config_error("$.sweep.values", "need at least one value");
      s["seeds"] = sv.get<std::vector<std::uint64_t>>("seeds", {seed});
      if (s["seeds"].empty()) config_error("$.sweep.seeds", "need >= 1 seed");
      // keep the raw child so per-seed resolution can fill seed-dependent
      // defaults; validate it once up front for early errors
      s["child"] = sv.raw("child");
      resolve_sweep_child(s["child"]);
      sv.done();
      resolved["sweep"] = s;
      break;
    }
  }
  view.done();
  return resolved;
}

// ---------------------------------------------------------------------------
// execution

PosteriorSpec posterior_from_resolved(const json& resolved,
                                      LoadedData* loaded_out = nullptr) {
  PosteriorSpec post;
  post.model = model_from_json(resolved.at("model"));
  post.prior = prior_from_json(resolved.at("prior"));
  const DataBlock block = data_from_view(
      StrictView(resolved.at("data"), "$.data"), resolved.at("seed"));
  LoadedData loaded = load_block(block);
  if (post.model.is_classification() && loaded.num_classes > 0 &&
      loaded.num_classes != post.model.num_classes)
    throw std::invalid_argument(
        "model num_classes does not match the dataset");
  post.data = std::move(loaded.data);
  post.temperature = resolved.at("posterior").at("temperature");
  post.num_shards = resolved.at("posterior").at("num_shards");
  if (loaded_out) {
    loaded_out->num_classes = loaded.num_classes;
    loaded_out->target_std = loaded.target_std;
  }
  return post;
}

std::optional<LoadedData> test_data_from_resolved(const json& resolved) {
  if (!resolved.contains("test_data")) return std::nullopt;
  const DataBlock block = data_from_view(
      StrictView(resolved.at("test_data"), "$.test_data"), resolved.at("seed"));
  return load_block(block);
}

void append_test_metrics(std::vector<std::pair<std::string, double>>& metrics,
                         const std::vector<ParameterVector>& samples,
                         const ModelSpec& model, const LoadedData& test,
                         const std::string& prefix) {
  const auto pred = bma_predict(samples, model, test.data.inputs);
  if (model.is_classification()) {
    metrics.emplace_back(prefix + "accuracy", accuracy(pred, test.data.labels));
    metrics.emplace_back(prefix + "nll", nll(pred, test.data.labels));
    metrics.emplace_back(prefix + "ece", ece(pred, test.data.labels));
  } else {
    metrics.emplace_back(prefix + "rmse", rmse(pred, test.data.targets));
    metrics.emplace_back(
        prefix + "test_ll",
        gaussian_test_ll(samples, model, test.data.inputs, test.data.targets));
    if (test.target_std != 1.0) {
      metrics.emplace_back(prefix + "rmse_orig",
                           rmse(pred, test.data.targets) * test.target_std);
      metrics.emplace_back(
          prefix + "test_ll_orig",
          gaussian_test_ll(samples, model, test.data.inputs,
                           test.data.targets) -
              std::log(test.target_std));
    }
  }
}

SampleStore store_from_samples(const std::vector<ParameterVector>& samples,
                               const std::string& chain_id, json config) {
  // callers pass a config snapshot; a "model" entry makes stores
  // self-describing for downstream evaluation
  SampleStore store;
  store.chain_id = chain_id;
  if (samples.empty()) throw std::runtime_error("no samples to store");
  store.samples.resize(static_cast<Eigen::Index>(samples.size()),
                       samples[0].size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    store.samples.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  store.config = std::move(config);
  return store;
}

struct StageTracker {
  std::string current = "setup";
};

void execute(const json& resolved, const std::filesystem::path& dir,
             StageTracker& stage, json& artifacts) {
  const ExperimentKind kind = kind_from_name(resolved.at("kind"));
  const std::uint64_t seed = resolved.at("seed");
  const int workers = resolved.at("workers");
  std::vector<std::pair<std::string, double>> metrics;

  auto emit_store = [&](const SampleStore& store, const std::string& name) {
    save_store(store, (dir / name).string());
    artifacts.push_back(name);
  };
  auto load_store_at = [&](std::size_t index) {
    const auto paths = resolved.at("stores").get<std::vector<std::string>>();
    return load_store(paths.at(index));
  };

  switch (kind) {
    case ExperimentKind::Hmc: {
      stage.current = "posterior";
      LoadedData info;
      const PosteriorSpec post = posterior_from_resolved(resolved, &info);
      const json& h = resolved.at("hmc");
      HmcConfig cfg;
      cfg.step_size = h.at("step_size");
      cfg.trajectory_length =
          h.contains("trajectory_length")
              ? h.at("trajectory_length").get<double>()
              : suggest_trajectory_length(post.prior.marginal_std());
      cfg.n_burnin = h.at("n_burnin");
      cfg.n_samples = h.at("n_samples");
      cfg.n_chains = h.at("n_chains");
      cfg.seed = seed;
      cfg.workers = workers;
      stage.current = "sampling";
      auto chains = run_chains(cfg, post);
      stage.current = "artifacts";
      std::vector<ParameterVector> pooled;
      for (std::size_t c = 0; c < chains.size(); ++c) {
        chains[c].config["model"] = resolved.at("model");
        emit_store(chains[c], "chain_" + std::to_string(c) + ".bnns");
        double accepted = 0;
        for (bool a : chains[c].accepted) accepted += a ? 1.0 : 0.0;
        metrics.emplace_back("chain" + std::to_string(c) + "_accept_rate",
                             accepted / chains[c].accepted.size());
        const auto samples = store_samples(chains[c]);
        pooled.insert(pooled.end(), samples.begin(), samples.end());
      }
      metrics.emplace_back("n_leapfrog",
                           static_cast<double>(cfg.n_leapfrog()));
      if (const auto test = test_data_from_resolved(resolved)) {
        stage.current = "evaluation";
        append_test_metrics(metrics, pooled, post.model, *test, "bma_");
      }
      break;
    }
    case ExperimentKind::Sgd: {
      stage.current = "posterior";
      const PosteriorSpec post = posterior_from_resolved(resolved);
      TrainConfig cfg =
          train_from_view(StrictView(resolved.at("train"), "$.train"), seed);
      stage.current = "training";
      const ParameterVector w = train_sgd(cfg, post);
      stage.current = "artifacts";
      emit_store(store_from_samples({w}, "sgd",
                     {{"train", resolved.at("train")},
                      {"model", resolved.at("model")}}),
                 "store.bnns");
      ParameterVector grad;
      metrics.emplace_back("final_log_joint", value_and_grad(post, w, grad));
      if (const auto test = test_data_from_resolved(resolved)) {
        stage.current = "evaluation";
        append_test_metrics(metrics, {w}, post.model, *test, "");
      }
      break;
    }
    case ExperimentKind::Ensemble: {
      stage.current = "posterior";
      const PosteriorSpec post = posterior_from_resolved(resolved);
      TrainConfig cfg =
          train_from_view(StrictView(resolved.at("train"), "$.train"), seed);
      const int n_models = resolved.at("ensemble").at("n_models");
      stage.current = "training";
      const auto members = deep_ensemble(n_models, cfg, post, workers);
      stage.current = "artifacts";
      emit_store(store_from_samples(members, "ensemble",
                     {{"train", resolved.at("train")},
                      {"model", resolved.at("model")},
                      {"ensemble", resolved.at("ensemble")}}),
                 "store.bnns");
      if (const auto test = test_data_from_resolved(resolved)) {
        stage.current = "evaluation";
        append_test_metrics(metrics, members, post.model, *test, "bma_");
      }
      break;
    }
    case ExperimentKind::Sgld:
    case ExperimentKind::Sghmc: {
      stage.current = "posterior";
      const PosteriorSpec post = posterior_from_resolved(resolved);
      TrainConfig cfg =
          train_from_view(StrictView(resolved.at("train"), "$.train"), seed);
      stage.current = "sampling";
      SampleStore store = kind == ExperimentKind::Sgld
                              ? sgld_run(cfg, post)
                              : sghmc_run(cfg, post);
      stage.current = "artifacts";
      store.config["model"] = resolved.at("model");
      emit_store(store, "store.bnns");
      metrics.emplace_back("n_samples",
                           static_cast<double>(store.samples.rows()));
      if (const auto test = test_data_from_resolved(resolved)) {
        stage.current = "evaluation";
        append_test_metrics(metrics, store_samples(store), post.model, *test,
                            "bma_");
      }
      break;
    }
    case ExperimentKind::Mfvi: {
      stage.current = "posterior";
      const PosteriorSpec post = posterior_from_resolved(resolved);
      TrainConfig cfg =
          train_from_view(StrictView(resolved.at("train"), "$.train"), seed);
      const double init_std = resolved.at("mfvi").at("init_std");
      const int n_draws = resolved.at("mfvi").at("n_draws");
      stage.current = "training";
      const auto vp = mfvi_fit(
          cfg, post, init_params(post.model, 0.01, mix64(seed) ^ 0x3f),
          init_std);
      stage.current = "artifacts";
      const auto draws = mfvi_sample(vp, n_draws, mix64(seed) ^ 0x77);
      emit_store(store_from_samples(draws, "mfvi",
                     {{"train", resolved.at("train")},
                      {"model", resolved.at("model")},
                      {"mfvi", resolved.at("mfvi")}}),
                 "store.bnns");
      metrics.emplace_back("final_elbo", vp.elbo_trace.back());
      if (const auto test = test_data_from_resolved(resolved)) {
        stage.current = "evaluation";
        append_test_metrics(metrics, draws, post.model, *test, "bma_");
      }
      break;
    }
    case ExperimentKind::Rhat: {
      stage.current = "stores";
      const auto paths = resolved.at("stores").get<std::vector<std::string>>();
      std::vector<SampleStore> stores;
      for (const auto& p : paths) stores.push_back(load_store(p));
      stage.current = "diagnostics";
      const auto report = rhat_weights(stores);
      write_text(dir / "rhat_weights.csv", report.to_csv());
      write_text(dir / "rhat_weights.json", report.to_json());
      artifacts.push_back("rhat_weights.csv");
      artifacts.push_back("rhat_weights.json");
      metrics.emplace_back("weight_fraction_below_1.1",
                           report.fraction_below_1p1);
      if (resolved.contains("model") && resolved.contains("test_data")) {
        const ModelSpec model = model_from_json(resolved.at("model"));
        const auto test = test_data_from_resolved(resolved);
        const auto freport =
            rhat_functions(stores, model, test->data.inputs);
        write_text(dir / "rhat_functions.csv",
                   freport.per_probability.to_csv());
        write_text(dir / "rhat_functions.json",
                   freport.per_probability.to_json());
        artifacts.push_back("rhat_functions.csv");
        artifacts.push_back("rhat_functions.json");
        metrics.emplace_back("function_fraction_below_1.1",
                             freport.per_probability.fraction_below_1p1);
      }
      break;
    }
    case ExperimentKind::Burnin: {
      stage.current = "stores";
      const SampleStore store = load_store_at(0);
      const ModelSpec model = model_from_json(resolved.at("model"));
      const auto test = test_data_from_resolved(resolved);
      stage.current = "diagnostics";
      const auto metric = resolved.at("burnin").at("metric") == "accuracy"
                              ? BurninMetric::Accuracy
                              : BurninMetric::Nll;
      const auto trace = burnin_trace(
          store, model, test->data, metric,
          resolved.at("burnin").at("grid").get<std::vector<Eigen::Index>>(),
          resolved.at("burnin").at("window"));
      std::ostringstream out;
      out.precision(17);
      out << "n_burnin,bma,individual\n";
      for (const auto& p : trace)
        out << p.n_burnin << ',' << p.bma_value << ',' << p.individual_value
            << '\n';
      write_text(dir / "burnin_trace.csv", out.str());
      artifacts.push_back("burnin_trace.csv");
      metrics.emplace_back("first_bma", trace.front().bma_value);
      metrics.emplace_back("last_bma", trace.back().bma_value);
      break;
    }
    case ExperimentKind::BmaEval: {
      stage.current = "stores";
      const SampleStore store = load_store_at(0);
      const ModelSpec model = model_from_json(resolved.at("model"));
      const auto test = test_data_from_resolved(resolved);
      stage.current = "evaluation";
      const auto samples = store_samples(store);
      append_test_metrics(metrics, samples, model, *test, "bma_");
      if (model.is_classification()) {
        const auto pred = bma_predict(samples, model, test->data.inputs);
        const Vector h = predictive_entropy(pred);
        std::ostringstream out;
        out.precision(17);
        out << "input,entropy,confidence\n";
        const auto conf = confidences(pred);
        for (Eigen::Index i = 0; i < h.size(); ++i)
          out << i << ',' << h[i] << ',' << conf[static_cast<std::size_t>(i)]
              << '\n';
        write_text(dir / "entropy.csv", out.str());
        artifacts.push_back("entropy.csv");
      }
      break;
    }
    case ExperimentKind::Compare: {
      stage.current = "stores";
      const SampleStore ref = load_store_at(0);
      const SampleStore other = load_store_at(1);
      const ModelSpec model = model_from_json(resolved.at("model"));
      const auto test = test_data_from_resolved(resolved);
      stage.current = "evaluation";
      const auto p_ref = bma_predict(ref, model, test->data.inputs);
      const auto p = bma_predict(other, model, test->data.inputs);
      metrics.emplace_back("agreement", agreement(p_ref, p));
      metrics.emplace_back("total_variation", total_variation(p_ref, p));
      break;
    }
    case ExperimentKind::SubspaceScan: {
      stage.current = "stores";
      const SampleStore store = load_store_at(0);
      const auto anchors =
          resolved.at("subspace").at("anchor_indices")
              .get<std::vector<Eigen::Index>>();
      for (Eigen::Index a : anchors)
        if (a < 0 || a >= store.samples.rows())
          throw std::out_of_range("anchor index outside the store");
      stage.current = "posterior";
      const PosteriorSpec post = posterior_from_resolved(resolved);
      stage.current = "scan";
      const auto basis =
          build_subspace(store.samples.row(anchors[0]).transpose(),
                         store.samples.row(anchors[1]).transpose(),
                         store.samples.row(anchors[2]).transpose());
      ScanRanges ranges = default_ranges(basis);
      if (resolved.at("subspace").contains("ranges")) {
        const json& r = resolved.at("subspace").at("ranges");
        ranges = {r.at("a_min"), r.at("a_max"), r.at("b_min"), r.at("b_max")};
      }
      const auto grid =
          scan_grid(basis, ranges, resolved.at("subspace").at("resolution"),
                    post, workers);
      write_text(dir / "log_likelihood.csv", grid.field_csv(grid.log_likelihood));
      write_text(dir / "log_prior.csv", grid.field_csv(grid.log_prior_field));
      write_text(dir / "log_posterior.csv", grid.field_csv(grid.log_posterior));
      write_text(dir / "scan_meta.json", grid.metadata_json());
      for (const char* name : {"log_likelihood.csv", "log_prior.csv",
                               "log_posterior.csv", "scan_meta.json"})
        artifacts.push_back(name);
      metrics.emplace_back("max_log_posterior", grid.log_posterior.maxCoeff());
      break;
    }
    case ExperimentKind::SynthGen: {
      stage.current = "generation";
      const DataBlock block = data_from_view(
          StrictView(resolved.at("data"), "$.data"), seed);
      const auto gen = gen_synthetic_regression(block.synthetic);
      std::ostringstream out;
      out.precision(17);
      out << "x,x_squared,y\n";
      for (Eigen::Index i = 0; i < gen.train.size(); ++i)
        out << gen.train.inputs(i, 0) << ',' << gen.train.inputs(i, 1) << ','
            << gen.train.targets[i] << '\n';
      write_text(dir / "dataset.csv", out.str());
      artifacts.push_back("dataset.csv");
      emit_store(store_from_samples({gen.teacher.params}, "teacher",
                                    resolved.at("data")),
                 "teacher.bnns");
      metrics.emplace_back("n_points", static_cast<double>(gen.train.size()));
      break;
    }
    default:
      throw std::logic_error("sweep kinds are executed by run_sweep");
  }

  stage.current = "metrics";
  write_text(dir / "metrics.csv", metrics_csv(metrics));
  artifacts.push_back("metrics.csv");
}

json base_manifest(const json& resolved) {
  return {{"kind", resolved.at("kind")},
          {"seed", resolved.at("seed")},
          {"code_version", kCodeVersion},
          {"config", resolved},
          {"artifacts", json::array()},
          {"status", "running"}};
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Hmc: return "hmc";
    case ExperimentKind::Sgld: return "sgld";
    case ExperimentKind::Sghmc: return "sghmc";
    case ExperimentKind::Sgd: return "sgd";
    case ExperimentKind::Ensemble: return "ensemble";
    case ExperimentKind::Mfvi: return "mfvi";
    case ExperimentKind::Rhat: return "rhat";
    case ExperimentKind::Burnin: return "burnin";
    case ExperimentKind::BmaEval: return "bma_eval";
    case ExperimentKind::Compare: return "compare";
    case ExperimentKind::SubspaceScan: return "subspace_scan";
    case ExperimentKind::SynthGen: return "synth_gen";
    case ExperimentKind::TemperatureSweep: return "temperature_sweep";
    case ExperimentKind::PriorSweep: return "prior_sweep";
    case ExperimentKind::RobustnessSweep: return "robustness_sweep";
  }
  throw std::logic_error("unreachable");
}

ExperimentKind kind_from_name(const std::string& name) {
  static const std::map<std::string, ExperimentKind> kinds = {
      {"hmc", ExperimentKind::Hmc},
      {"sgld", ExperimentKind::Sgld},
      {"sghmc", ExperimentKind::Sghmc},
      {"sgd", ExperimentKind::Sgd},
      {"ensemble", ExperimentKind::Ensemble},
      {"mfvi", ExperimentKind::Mfvi},
      {"rhat", ExperimentKind::Rhat},
      {"burnin", ExperimentKind::Burnin},
      {"bma_eval", ExperimentKind::BmaEval},
      {"compare", ExperimentKind::Compare},
      {"subspace_scan", ExperimentKind::SubspaceScan},
      {"synth_gen", ExperimentKind::SynthGen},
      {"temperature_sweep", ExperimentKind::TemperatureSweep},
      {"prior_sweep", ExperimentKind::PriorSweep},
      {"robustness_sweep", ExperimentKind::RobustnessSweep}};
  const auto it = kinds.find(name);
  if (it == kinds.end())
    throw std::invalid_argument("$.kind: unknown experiment kind '" + name +
                                "'");
  return it->second;
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  ExperimentConfig config;
  config.resolved = resolve_config(root);
  config.kind = kind_from_name(config.resolved.at("kind"));
  config.seed = config.resolved.at("seed");
  config.workers = config.resolved.at("workers");
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  return config.resolved.dump(2);
}

ModelSpec model_from_json(const nlohmann::json& j) {
  return model_from_view(StrictView(j, "$.model"));
}

PriorSpec prior_from_json(const nlohmann::json& j) {
  return prior_from_view(StrictView(j, "$.prior"));
}

Dataset dataset_from_json(const nlohmann::json& j, std::uint64_t seed,
                          int* num_classes) {
  const DataBlock block = data_from_view(StrictView(j, "$.data"), seed);
  LoadedData loaded = load_block(block);
  if (num_classes) *num_classes = loaded.num_classes;
  return loaded.data;
}

RunResult run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& out_dir) {
  if (config.kind == ExperimentKind::TemperatureSweep ||
      config.kind == ExperimentKind::PriorSweep ||
      config.kind == ExperimentKind::RobustnessSweep)
    return run_sweep(config, out_dir);

  std::filesystem::create_directories(out_dir);
  json manifest = base_manifest(config.resolved);
  StageTracker stage;
  const auto start = std::chrono::steady_clock::now();
  try {
    execute(config.resolved, out_dir, stage, manifest["artifacts"]);
    manifest["status"] = "ok";
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["failed_stage"] = stage.current;
    manifest["error"] = e.what();
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    write_text(out_dir / "manifest.json", manifest.dump(2));
    throw;
  }
  manifest["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_text(out_dir / "manifest.json", manifest.dump(2));
  return {out_dir, manifest};
}

RunResult run_sweep(const ExperimentConfig& config,
                    const std::filesystem::path& out_dir) {
  const json& sweep = config.resolved.at("sweep");
  const std::string axis = sweep.at("axis");
  const auto values = sweep.at("values").get<std::vector<double>>();
  const auto seeds = sweep.at("seeds").get<std::vector<std::uint64_t>>();

  std::filesystem::create_directories(out_dir);
  json manifest = base_manifest(config.resolved);

  struct Child {
    double value;
    std::uint64_t seed;
    std::filesystem::path dir;
    json raw;
  };
  std::vector<Child> children;
  for (double value : values)
    for (std::uint64_t seed : seeds) {
      Child child;
      child.value = value;
      child.seed = seed;
      std::ostringstream name;
      name << axis << '_' << value << "_seed_" << seed;
      child.dir = out_dir / name.str();
      child.raw = sweep.at("child");
      child.raw["seed"] = seed;
      child.raw["workers"] = 1;  // the sweep owns the parallelism
      if (axis == "temperature")
        child.raw["posterior"]["temperature"] = value;
      else if (axis == "prior_variance")
        child.raw["prior"]["variance"] = value;
      else if (axis == "noise_sigma")
        child.raw["test_data"]["corrupt_sigma"] = value;
      else if (axis == "trajectory_length")
        child.raw["hmc"]["trajectory_length"] = value;
      else if (axis == "n_chains")
        child.raw["hmc"]["n_chains"] = static_cast<int>(value);
      children.push_back(std::move(child));
    }

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::exception_ptr> errors(children.size());
  auto run_child = [&](std::size_t i) {
    try {
      run_experiment(parse_config(children[i].raw.dump()), children[i].dir);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const int workers =
      std::max(1, std::min<int>(config.workers,
                                static_cast<int>(children.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < children.size(); ++i) run_child(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < children.size();
             i += static_cast<std::size_t>(workers))
          run_child(i);
      });
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (!errors[i]) continue;
    manifest["status"] = "failed";
    manifest["failed_stage"] =
        "child " + children[i].dir.filename().string();
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      manifest["error"] = e.what();
    }
    write_text(out_dir / "manifest.json", manifest.dump(2));
    std::rethrow_exception(errors[i]);
  }

  // aggregate: per (axis value, metric) mean/std over seeds
  std::map<std::pair<double, std::string>, std::vector<double>> cells;
  for (const auto& child : children) {
    std::ifstream in(child.dir / "metrics.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      cells[{child.value, line.substr(0, comma)}].push_back(
          std::stod(line.substr(comma + 1)));
    }
    manifest["artifacts"].push_back(child.dir.filename().string());
  }
  std::ostringstream out;
  out.precision(17);
  out << "axis,value,metric,mean,std\n";
  for (const auto& [key, samples] : cells) {
    const double mean =
        std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    double sd = 0.0;
    if (samples.size() > 1) {
      for (double v : samples) sd += (v - mean) * (v - mean);
      sd = std::sqrt(sd / (samples.size() - 1));
    }
    out << axis << ',' << key.first << ',' << key.second << ',' << mean << ','
        << sd << '\n';
  }
  write_text(out_dir / "sweep.csv", out.str());
  manifest["artifacts"].push_back("sweep.csv");
  manifest["status"] = "ok";
  manifest["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_text(out_dir / "manifest.json", manifest.dump(2));
  return {out_dir, manifest};
}

}  // namespace bnn
