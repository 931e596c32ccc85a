// SPDX-License-Identifier: Apache-2.0
//
// pnpcm - plug-and-play consistency-model channel estimation
// Copyright (C) 2026 pnpcm contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef PNPCM_HARNESS_HPP
#define PNPCM_HARNESS_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnpcm/pnp.hpp"

namespace pnpcm {

const char *version_string();

// ||h_hat - h_true||^2 / ||h_true||^2
double nmse(const VecC &h_hat, const VecC &h_true);
// dB value; zero linear NMSE maps to -inf.
double nmse_db(double linear);

struct ExperimentConfig {
    std::string dataset_path;
    std::string checkpoint_path;     // required for denoiser "cm"
    std::string schedule_table_path; // empty = built-in table
    std::string denoiser = "identity";
    double soft_lambda = 0.5;
    std::vector<double> pilot_targets = {1.0};
    std::vector<double> snr_list = {20.0};
    int n_samples = 100;
    int sample_offset = 0;
    int n_rf = 1;
    int phase_bits = 4;
    double pilot_amplitude = 1.0;
    CgSettings cg;
    int n_iters = 0; // 0 = use the schedule table's value
    std::optional<double> t_hi_override, rho_override, beta_override;
    bool fresh_codebook_per_sample = true;
    int threads = 0;
    std::uint64_t seed = 0;

    void validate() const;
    static ExperimentConfig from_json(const nlohmann::json &j);
    nlohmann::json to_json() const;
};

struct ReportRow {
    double alpha_target = 1.0, alpha_actual = 1.0;
    int m_t = 0, m_r = 0, n_rf = 1;
    double snr_db = 0.0;
    long sample_index = 0;
    std::string sample_id;
    int iter = 0;
    double nmse_linear = 0.0;
    int cg_iters = 0;
    double dual_residual = 0.0;
};

struct SettingSummary {
    double alpha_target = 1.0, alpha_actual = 1.0;
    int m_t = 0, m_r = 0;
    double snr_db = 0.0;
    int n_samples = 0;
    // index i = mean linear NMSE after outer iteration i+1
    std::vector<double> iter_nmse_mean;
    double final_nmse_mean() const { return iter_nmse_mean.back(); }
};

struct EstimationReport {
    std::string kind = "sweep"; // or "trace"
    nlohmann::json config_echo;
    std::uint64_t seed = 0;
    std::string version;
    std::string averaging = "db_of_mean_linear";
    std::vector<ReportRow> rows;
    std::vector<SettingSummary> summaries;
    double wall_seconds = 0.0; // not part of the emitted artifact
};

struct ExperimentDeps {
    const ChannelDataset *dataset = nullptr;
    std::shared_ptr<const ConsistencyModel> model; // may be null
    const ScheduleTable *table = nullptr;          // null = built-in
};

// Fig.-2-style protocol: every (pilot target, snr) pair, n_samples each.
EstimationReport run_sweep(const ExperimentConfig &config, const ExperimentDeps &deps);
// Fig.-4-style protocol: same engine, per-iteration summary emphasis.
EstimationReport run_iteration_trace(const ExperimentConfig &config, const ExperimentDeps &deps);

// Writes report.csv and/or summary.json (formats: "csv", "json"); trace
// reports additionally emit trace.csv. Output bytes depend only on the
// report contents. Returns the written paths.
std::vector<std::string> emit_report(const EstimationReport &report, const std::string &out_dir,
                                     const std::vector<std::string> &formats = {"csv", "json"});

// Rebuilds a report from an emitted summary.json + report.csv pair.
EstimationReport load_report(const std::string &out_dir);

// Recomputes every summary from the rows; used by the loader and tests.
std::vector<SettingSummary> recompute_summaries(const std::vector<ReportRow> &rows);

struct EstimateResult {
    VecC h_hat;
    nlohmann::json metrics;
};

// Single-observation estimation: the observation either comes from a saved
// bundle (obs_path) or is synthesized from dataset[sample_index] at the
// first configured (alpha, snr). The estimate is dumped as a container.
EstimateResult estimate_single(const ExperimentConfig &config, const ExperimentDeps &deps,
                               const std::string &obs_path, int sample_index,
                               const std::string &estimate_out);

} // namespace pnpcm

#endif
