#include "bnn/bnn_capi.h"

#include <exception>
#include <memory>
#include <string>

#include "bnn/experiment.hpp"
#include "bnn/hmc.hpp"
#include "bnn/sample_store.hpp"

namespace {

thread_local std::string g_last_error;

using bnn::SampleStore;

bnn_status fail(bnn_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
bnn_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BNN_OK;
  } catch (const std::invalid_argument& e) {
    return fail(BNN_ERR_INVALID, e.what());
  } catch (const std::exception& e) {
    return fail(BNN_ERR_RUNTIME, e.what());
  }
}

// model block from a store sidecar; evaluation needs to know the producer
nlohmann::json model_from_store(const SampleStore& store,
                                const std::string& path) {
  if (!store.config.contains("model"))
    throw std::invalid_argument("store " + path +
                                " carries no model description");
  return store.config.at("model");
}

nlohmann::json data_block(const std::string& data_path) {
  const bool binary = data_path.size() > 4 &&
                      data_path.compare(data_path.size() - 4, 4, ".bin") == 0;
  return {{"source", binary ? "classification" : "table"},
          {"path", data_path}};
}

}  // namespace

extern "C" {

struct bnn_store {
  SampleStore store;
  std::string config_json;
};

const char* bnn_last_error(void) { return g_last_error.c_str(); }

const char* bnn_version(void) { return "bnn-workbench 0.1.0"; }

double bnn_suggest_trajectory_length(double prior_std) {
  return bnn::suggest_trajectory_length(prior_std);
}

bnn_status bnn_run_experiment(const char* config_json, const char* out_dir) {
  if (!config_json || !out_dir)
    return fail(BNN_ERR_INVALID, "config_json and out_dir must be non-NULL");
  return guarded([&] {
    bnn::run_experiment(bnn::parse_config(config_json), out_dir);
  });
}

bnn_status bnn_store_open(const char* path, bnn_store** out) {
  if (!path || !out)
    return fail(BNN_ERR_INVALID, "path and out must be non-NULL");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<bnn_store>();
    handle->store = bnn::load_store(path);
    handle->config_json = handle->store.config.dump();
    *out = handle.release();
  });
}

void bnn_store_close(bnn_store* store) { delete store; }

int64_t bnn_store_num_samples(const bnn_store* store) {
  return store ? static_cast<int64_t>(store->store.num_samples()) : -1;
}

int64_t bnn_store_dim(const bnn_store* store) {
  return store ? static_cast<int64_t>(store->store.dim()) : -1;
}

bnn_status bnn_store_copy_sample(const bnn_store* store, int64_t index,
                                 double* out) {
  if (!store || !out)
    return fail(BNN_ERR_INVALID, "store and out must be non-NULL");
  if (index < 0 || index >= store->store.num_samples())
    return fail(BNN_ERR_INVALID, "sample index out of range");
  const auto sample = store->store.sample(static_cast<Eigen::Index>(index));
  for (Eigen::Index i = 0; i < sample.size(); ++i) out[i] = sample[i];
  g_last_error.clear();
  return BNN_OK;
}

const char* bnn_store_chain_id(const bnn_store* store) {
  return store ? store->store.chain_id.c_str() : nullptr;
}

const char* bnn_store_config_json(const bnn_store* store) {
  return store ? store->config_json.c_str() : nullptr;
}

bnn_status bnn_diag_rhat(const char* const* store_paths, int n_stores,
                         const char* data_path, const char* out_dir) {
  if (!store_paths || n_stores < 2 || !out_dir)
    return fail(BNN_ERR_INVALID,
                "need >= 2 store paths and a non-NULL out_dir");
  return guarded([&] {
    nlohmann::json cfg;
    cfg["kind"] = "rhat";
    for (int i = 0; i < n_stores; ++i) {
      if (!store_paths[i])
        throw std::invalid_argument("store path must be non-NULL");
      cfg["stores"].push_back(store_paths[i]);
    }
    if (data_path) {
      const SampleStore first = bnn::load_store(store_paths[0]);
      cfg["model"] = model_from_store(first, store_paths[0]);
      cfg["test_data"] = data_block(data_path);
    }
    bnn::run_experiment(bnn::parse_config(cfg.dump()), out_dir);
  });
}

bnn_status bnn_eval_bma(const char* store_path, const char* data_path,
                        const char* out_dir) {
  if (!store_path || !data_path || !out_dir)
    return fail(BNN_ERR_INVALID, "all arguments must be non-NULL");
  return guarded([&] {
    const SampleStore store = bnn::load_store(store_path);
    nlohmann::json cfg = {{"kind", "bma_eval"},
                          {"stores", {store_path}},
                          {"model", model_from_store(store, store_path)},
                          {"test_data", data_block(data_path)}};
    bnn::run_experiment(bnn::parse_config(cfg.dump()), out_dir);
  });
}

bnn_status bnn_compare(const char* ref_store_path, const char* store_path,
                       const char* data_path, const char* out_dir) {
  if (!ref_store_path || !store_path || !data_path || !out_dir)
    return fail(BNN_ERR_INVALID, "all arguments must be non-NULL");
  return guarded([&] {
    const SampleStore ref = bnn::load_store(ref_store_path);
    nlohmann::json cfg = {{"kind", "compare"},
                          {"stores", {ref_store_path, store_path}},
                          {"model", model_from_store(ref, ref_store_path)},
                          {"test_data", data_block(data_path)}};
    bnn::run_experiment(bnn::parse_config(cfg.dump()), out_dir);
  });
}

}  // extern "C"
