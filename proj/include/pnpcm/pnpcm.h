/* SPDX-License-Identifier: Apache-2.0
 *
 * pnpcm - plug-and-play consistency-model channel estimation
 * Copyright (C) 2026 pnpcm contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 * ------------------------------------------------------------------------
 *
 * C interface of the pnpcm shared library. All entry points return a
 * pnpcm_status; PNPCM_OK is zero. On failure a thread-local message is
 * available through pnpcm_last_error(). Objects are opaque handles released
 * with their *_free function. Configuration crosses the boundary as JSON
 * text; file formats are documented in the project README.
 */

#ifndef PNPCM_H
#define PNPCM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pnpcm_status {
    PNPCM_OK = 0,
    PNPCM_ERR_INVALID_ARGUMENT = 1,
    PNPCM_ERR_DIMENSION = 2,
    PNPCM_ERR_PARSE = 3,
    PNPCM_ERR_IO = 4,
    PNPCM_ERR_NUMERIC = 5,
    PNPCM_ERR_CHECKPOINT = 6,
    PNPCM_ERR_VERSION = 7,
    PNPCM_ERR_INTERNAL = 8
} pnpcm_status;

typedef struct pnpcm_dataset pnpcm_dataset;
typedef struct pnpcm_model pnpcm_model;
typedef struct pnpcm_schedule_table pnpcm_schedule_table;
typedef struct pnpcm_report pnpcm_report;

/* Library version string, e.g. "0.1.0+gabcdef0". */
const char *pnpcm_version(void);
/* Thread-local message describing the most recent failure. */
const char *pnpcm_last_error(void);
const char *pnpcm_status_name(pnpcm_status status);

/* ---- datasets ---------------------------------------------------------- */

/* config_json: {"count", "tx":{"n_horizontal","n_vertical","spacing"},
 * "rx":{...}, "paths":{"l_min","l_max","power_decay"}, "id_prefix"} */
pnpcm_status pnpcm_dataset_generate(const char *config_json, uint64_t seed, pnpcm_dataset **out);
/* Builds channels from a path-parameter CSV (see README for the format). */
pnpcm_status pnpcm_dataset_from_csv(const char *csv_path, const char *config_json,
                                    pnpcm_dataset **out);
pnpcm_status pnpcm_dataset_open(const char *path, pnpcm_dataset **out);
pnpcm_status pnpcm_dataset_save(const pnpcm_dataset *dataset, const char *path);
size_t pnpcm_dataset_size(const pnpcm_dataset *dataset);
void pnpcm_dataset_free(pnpcm_dataset *dataset);

/* ---- consistency model ------------------------------------------------- */

/* Trains on the dataset; writes the checkpoint and, when loss_csv_path is
 * non-NULL, the step,train_loss[,test_loss] trace. out may be NULL. */
pnpcm_status pnpcm_train(const pnpcm_dataset *dataset, const char *config_json, uint64_t seed,
                         const char *checkpoint_path, const char *loss_csv_path,
                         pnpcm_model **out);
pnpcm_status pnpcm_model_open(const char *path, pnpcm_model **out);
void pnpcm_model_free(pnpcm_model *model);

/* ---- schedules --------------------------------------------------------- */

/* config_json: {"snr_db":[...], "grid":{"t_hi":[...], "rho":[...],
 * "beta":[...], "n_iters"}, "alpha", "denoiser", "cg":{...}, "threads"} */
pnpcm_status pnpcm_tune(const pnpcm_dataset *validation, const pnpcm_model *model,
                        const char *config_json, uint64_t seed, const char *table_out_path,
                        pnpcm_schedule_table **out);
pnpcm_status pnpcm_schedule_table_open(const char *path, pnpcm_schedule_table **out);
void pnpcm_schedule_table_free(pnpcm_schedule_table *table);

/* ---- estimation -------------------------------------------------------- */

/* Experiment config JSON is documented in the README (schema_version 1).
 * model and table may be NULL when the config does not need them. */
pnpcm_status pnpcm_sweep(const char *config_json, const pnpcm_dataset *dataset,
                         const pnpcm_model *model, const pnpcm_schedule_table *table,
                         pnpcm_report **out);
pnpcm_status pnpcm_trace(const char *config_json, const pnpcm_dataset *dataset,
                         const pnpcm_model *model, const pnpcm_schedule_table *table,
                         pnpcm_report **out);

/* Single-observation estimation. obs_path may be NULL (the observation is
 * then synthesized from dataset[sample_index]); estimate_out may be NULL.
 * metrics_json_out, when non-NULL, receives a malloc'd JSON string the
 * caller releases with pnpcm_string_free. */
pnpcm_status pnpcm_estimate(const char *config_json, const pnpcm_dataset *dataset,
                            const pnpcm_model *model, const pnpcm_schedule_table *table,
                            const char *obs_path, int sample_index, const char *estimate_out,
                            char **metrics_json_out);

/* Synthesizes and saves one observation bundle from dataset[sample_index]. */
pnpcm_status pnpcm_observe(const char *config_json, const pnpcm_dataset *dataset,
                           int sample_index, uint64_t seed, const char *obs_out_path);

/* ---- reports ------------------------------------------------------------ */

/* formats: comma-separated subset of "csv,json". */
pnpcm_status pnpcm_report_emit(const pnpcm_report *report, const char *out_dir,
                               const char *formats);
pnpcm_status pnpcm_report_open(const char *out_dir, pnpcm_report **out);
pnpcm_status pnpcm_report_summary(const pnpcm_report *report, char **json_out);
void pnpcm_report_free(pnpcm_report *report);

/* ---- small utilities ---------------------------------------------------- */

pnpcm_status pnpcm_search_pilot_config(double target_alpha, int n_t, int n_r, int n_rf,
                                       int *m_t_out, int *m_r_out);
/* Interleaved re/im arrays of n complex entries each. */
pnpcm_status pnpcm_nmse(const double *h_hat, const double *h_true, size_t n, double *linear_out);

void pnpcm_string_free(char *s);

#ifdef __cplusplus
}
#endif

#endif /* PNPCM_H */
