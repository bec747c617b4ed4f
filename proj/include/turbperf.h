/* turbperf — wind-turbine performance analysis toolkit, C API.
 *
 * All functions return a tp_status; every non-zero status leaves a
 * human-readable message retrievable with tp_last_error() (thread-local).
 * Handles are opaque; free them with the matching *_free function.
 * Strings returned through char** out-parameters are heap-allocated and
 * must be released with tp_string_free().
 *
 * Feature vectors are 9 doubles in this order: month, day, hour, minute,
 * wind speed, air temperature, air pressure, wind direction, air density
 * (raw units; models scale internally using their stored statistics).
 */
#ifndef TURBPERF_H
#define TURBPERF_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the bundled CLI uses them verbatim as process exit codes. */
typedef enum tp_status {
    TP_OK = 0,
    TP_ERR_CONFIG = 2, /* bad key, bad value, invalid hyperparameters */
    TP_ERR_DATA = 3,   /* missing/invalid input data, empty splits */
    TP_ERR_TRAIN = 4,  /* optimizer divergence or training failure */
    TP_ERR_IO = 5      /* filesystem or serialization failure */
} tp_status;

typedef struct tp_config tp_config;
typedef struct tp_dataset tp_dataset;
typedef struct tp_svr tp_svr;
typedef struct tp_net tp_net;

/* Library version string; static storage, do not free. */
const char* tp_version(void);

/* Message for the most recent failure on the calling thread ("" if none).
 * Static storage, valid until the next tp_* call on this thread. */
const char* tp_last_error(void);

/* Free a string returned through a char** out-parameter. NULL is a no-op. */
void tp_string_free(char* s);

/* ---- configuration ----------------------------------------------------- */

/* Create a config holding built-in defaults. */
tp_status tp_config_create(tp_config** out);

/* Defaults overlaid with key = value lines from `path`. */
tp_status tp_config_load(const char* path, tp_config** out);

void tp_config_free(tp_config* cfg);

tp_status tp_config_set(tp_config* cfg, const char* key, const char* value);
tp_status tp_config_get(const tp_config* cfg, const char* key, char** out_value);

/* Apply recognized environment overrides (TURBPERF_OUT). */
tp_status tp_config_apply_env(tp_config* cfg);

/* Stable content hash of every key except the output directory. */
tp_status tp_config_hash(const tp_config* cfg, char** out_hash);

tp_status tp_config_validate(const tp_config* cfg);

/* ---- datasets ---------------------------------------------------------- */

/* Ingest (or synthesize) records per the config, then label and split. */
tp_status tp_dataset_build(const tp_config* cfg, tp_dataset** out);

/* Same, but from an already-ingested records CSV (canonical column names). */
tp_status tp_dataset_from_records_csv(const tp_config* cfg, const char* csv_path,
                                      tp_dataset** out);

tp_status tp_dataset_load(const char* path, tp_dataset** out);
tp_status tp_dataset_save(const tp_dataset* ds, const char* path);
void tp_dataset_free(tp_dataset* ds);

long tp_dataset_rows(const tp_dataset* ds);

/* counts[0] = train rows, counts[1] = validation rows, counts[2] = test rows */
tp_status tp_dataset_tag_counts(const tp_dataset* ds, long counts[3]);

/* ---- text verbs (CSV in, CSV/text out) --------------------------------- */

/* Read a raw CSV using the configured column mapping; returns the records
 * re-rendered with canonical headers. out_skipped may be NULL. */
tp_status tp_ingest_csv(const tp_config* cfg, const char* csv_path, char** out_csv,
                        long* out_skipped);

/* Generate synthetic records per the synth.* config keys, as canonical CSV. */
tp_status tp_synth_csv(const tp_config* cfg, char** out_csv);

/* Canonical records CSV with operating-region and fault columns appended. */
tp_status tp_label_csv(const tp_config* cfg, const char* records_csv_path, char** out_csv);

/* Predictions for every record using a saved model (regressor or net);
 * the model kind is detected from the file header. */
tp_status tp_predict_csv(const tp_config* cfg, const char* model_path,
                         const char* records_csv_path, char** out_csv);

/* ---- support vector regressor ------------------------------------------ */

/* Train on the dataset's train split; out_eval (optional) receives the
 * evaluation summary in "turbperf-eval v1" key = value form. */
tp_status tp_svr_train(const tp_config* cfg, const tp_dataset* ds, tp_svr** out,
                       char** out_eval);

tp_status tp_svr_load(const char* path, tp_svr** out);
tp_status tp_svr_save(const tp_svr* model, const char* path);
void tp_svr_free(tp_svr* model);

/* Predict normalized power in [0, 1] from one raw feature vector. */
tp_status tp_svr_predict(const tp_svr* model, const double features[9], double* out_power);

/* Mean squared error over the dataset's test split (normalized power). */
tp_status tp_svr_test_mse(const tp_svr* model, const tp_dataset* ds, double* out_mse);

/* k-fold cross-validation of the regressor; returns a small text report. */
tp_status tp_cv_text(const tp_config* cfg, const tp_dataset* ds, long k, char** out_text);

/* ---- neural fault classifiers ------------------------------------------ */

/* `arch` is one of ff, rnn, cnn, sae, nar (long ids also accepted:
 * feedforward, recurrent, convolutional, sparse_autoencoder,
 * nar_time_series). out_eval as in tp_svr_train. */
tp_status tp_net_train(const tp_config* cfg, const tp_dataset* ds, const char* arch,
                       tp_net** out, char** out_eval);

tp_status tp_net_load(const char* path, tp_net** out);
tp_status tp_net_save(const tp_net* model, const char* path);
void tp_net_free(tp_net* model);

/* Fault probability for one window of raw feature rows (row-major,
 * rows x 9 for met-feature nets; 1 x lags for the autoregressive net,
 * whose inputs are past fault labels). */
tp_status tp_net_predict(const tp_net* model, const double* window, long rows, long cols,
                         double* out_probability);

/* Mean squared error over test-split windows. */
tp_status tp_net_test_mse(const tp_net* model, const tp_dataset* ds, double* out_mse);

/* ---- pipeline ---------------------------------------------------------- */

/* Run pipeline stages in fixed order. stages_csv selects a subset
 * ("ingest,label,train_svr,sweep_nn,report"); NULL or "" runs all.
 * jobs >= 1 bounds sweep parallelism. out_summary (optional) receives a
 * short text listing stages run and stages skipped. */
tp_status tp_run_pipeline(const tp_config* cfg, const char* stages_csv, int jobs,
                          char** out_summary);

/* Render the comparison table from the report artifact in the output dir. */
tp_status tp_report_text(const tp_config* cfg, char** out_text);

/* Write <out_base>.actual.csv / <out_base>.predicted.csv power-curve data
 * from the artifacts in the output dir. */
tp_status tp_plot_data(const tp_config* cfg, const char* out_base);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TURBPERF_H */
