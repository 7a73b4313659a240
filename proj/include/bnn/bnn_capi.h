/* C interface to the Bayesian-neural-network workbench.
 *
 * All functions return bnn_status; on failure bnn_last_error() describes the
 * problem (thread-local). Handles are opaque and must be released with their
 * matching close function.
 */
#ifndef BNN_CAPI_H
#define BNN_CAPI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bnn_status {
  BNN_OK = 0,
  /* bad arguments, unparsable or invalid config */
  BNN_ERR_INVALID = 1,
  /* I/O or execution failure */
  BNN_ERR_RUNTIME = 2,
} bnn_status;

/* Description of the most recent failure on this thread; empty on success. */
const char* bnn_last_error(void);

const char* bnn_version(void);

/* pi * prior_std / 2: the quarter-turn trajectory-length heuristic. */
double bnn_suggest_trajectory_length(double prior_std);

/* Runs the experiment described by a JSON config into out_dir.
 * See the experiment config documentation for the schema; sweeps fan out
 * child runs automatically. */
bnn_status bnn_run_experiment(const char* config_json, const char* out_dir);

/* --- sample stores ------------------------------------------------------ */

typedef struct bnn_store bnn_store;

bnn_status bnn_store_open(const char* path, bnn_store** out);
void bnn_store_close(bnn_store* store);
int64_t bnn_store_num_samples(const bnn_store* store);
int64_t bnn_store_dim(const bnn_store* store);
/* Copies sample `index` into `out` (length = bnn_store_dim). */
bnn_status bnn_store_copy_sample(const bnn_store* store, int64_t index,
                                 double* out);
/* Borrowed pointers, valid until the store is closed. */
const char* bnn_store_chain_id(const bnn_store* store);
const char* bnn_store_config_json(const bnn_store* store);

/* --- convenience pipelines (artifacts written into out_dir) ------------- */

/* Weight-space R-hat across >= 2 stores; when data_path is non-NULL and the
 * stores carry a classification model, function-space R-hat is added. */
bnn_status bnn_diag_rhat(const char* const* store_paths, int n_stores,
                         const char* data_path, const char* out_dir);

/* BMA test metrics of one store; the model comes from the store sidecar.
 * data_path: classification container (.bin) or delimited regression table. */
bnn_status bnn_eval_bma(const char* store_path, const char* data_path,
                        const char* out_dir);

/* Agreement / total variation between the BMA predictives of two stores. */
bnn_status bnn_compare(const char* ref_store_path, const char* store_path,
                       const char* data_path, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* BNN_CAPI_H */
