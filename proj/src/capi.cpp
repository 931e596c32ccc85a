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

#include "pnpcm/pnpcm.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "pnpcm/cm.hpp"
#include "pnpcm/harness.hpp"

using namespace pnpcm;

struct pnpcm_dataset {
    ChannelDataset ds;
};
struct pnpcm_model {
    std::shared_ptr<ConsistencyModel> model;
};
struct pnpcm_schedule_table {
    ScheduleTable table;
};
struct pnpcm_report {
    EstimationReport report;
};

namespace {

thread_local std::string g_last_error;

pnpcm_status status_of(errc code) {
    switch (code) {
    case errc::ok: return PNPCM_OK;
    case errc::invalid_argument:
    case errc::invalid_range:
    case errc::empty_path_list:
    case errc::empty_validation_set:
    case errc::zero_signal:
    case errc::zero_truth:
    case errc::noise_level_out_of_range: return PNPCM_ERR_INVALID_ARGUMENT;
    case errc::dimension_mismatch:
    case errc::shape_mismatch: return PNPCM_ERR_DIMENSION;
    case errc::parse_error:
    case errc::missing_column: return PNPCM_ERR_PARSE;
    case errc::io_error: return PNPCM_ERR_IO;
    case errc::non_finite: return PNPCM_ERR_NUMERIC;
    case errc::missing_checkpoint:
    case errc::corrupt_checkpoint: return PNPCM_ERR_CHECKPOINT;
    case errc::version_mismatch: return PNPCM_ERR_VERSION;
    case errc::internal: return PNPCM_ERR_INTERNAL;
    }
    return PNPCM_ERR_INTERNAL;
}

template <typename Fn> pnpcm_status guarded(Fn &&fn) {
    try {
        fn();
        g_last_error.clear();
        return PNPCM_OK;
    } catch (const Error &e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::bad_alloc &) {
        g_last_error = "out of memory";
        return PNPCM_ERR_INTERNAL;
    } catch (const std::exception &e) {
        g_last_error = e.what();
        return PNPCM_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return PNPCM_ERR_INTERNAL;
    }
}

pnpcm_status require_c(bool ok, const char *msg) {
    if (ok)
        return PNPCM_OK;
    g_last_error = msg;
    return PNPCM_ERR_INVALID_ARGUMENT;
}

nlohmann::json parse_json(const char *text, const char *what) {
    try {
        return nlohmann::json::parse(text == nullptr ? "{}" : text);
    } catch (const nlohmann::json::exception &e) {
        fail(errc::parse_error, std::string(what) + ": " + e.what());
    }
}

ArrayGeometry geometry_from(const nlohmann::json &j, const ArrayGeometry &fallback) {
    ArrayGeometry g = fallback;
    g.n_horizontal = j.value("n_horizontal", g.n_horizontal);
    g.n_vertical = j.value("n_vertical", g.n_vertical);
    g.spacing = j.value("spacing", g.spacing);
    return g;
}

char *dup_string(const std::string &s) {
    char *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (out != nullptr)
        std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ExperimentConfig experiment_config_from(const char *config_json) {
    return ExperimentConfig::from_json(parse_json(config_json, "experiment config"));
}

ExperimentDeps deps_from(const pnpcm_dataset *dataset, const pnpcm_model *model,
                         const pnpcm_schedule_table *table) {
    ExperimentDeps deps;
    deps.dataset = dataset ? &dataset->ds : nullptr;
    deps.model = model ? model->model : nullptr;
    deps.table = table ? &table->table : nullptr;
    return deps;
}

} // namespace

extern "C" {

const char *pnpcm_version(void) { return version_string(); }

const char *pnpcm_last_error(void) { return g_last_error.c_str(); }

const char *pnpcm_status_name(pnpcm_status status) {
    switch (status) {
    case PNPCM_OK: return "ok";
    case PNPCM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case PNPCM_ERR_DIMENSION: return "dimension_mismatch";
    case PNPCM_ERR_PARSE: return "parse_error";
    case PNPCM_ERR_IO: return "io_error";
    case PNPCM_ERR_NUMERIC: return "numeric_error";
    case PNPCM_ERR_CHECKPOINT: return "checkpoint_error";
    case PNPCM_ERR_VERSION: return "version_mismatch";
    case PNPCM_ERR_INTERNAL: return "internal_error";
    }
    return "unknown";
}

pnpcm_status pnpcm_dataset_generate(const char *config_json, uint64_t seed, pnpcm_dataset **out) {
    if (auto s = require_c(out != nullptr, "out must not be NULL"))
        return s;
    return guarded([&] {
        const auto j = parse_json(config_json, "dataset config");
        DatasetGenConfig cfg;
        cfg.tx = geometry_from(j.value("tx", nlohmann::json::object()), cfg.tx);
        cfg.rx = geometry_from(j.value("rx", nlohmann::json::object()), cfg.rx);
        if (j.contains("paths")) {
            const auto &p = j["paths"];
            cfg.paths.l_min = p.value("l_min", cfg.paths.l_min);
            cfg.paths.l_max = p.value("l_max", cfg.paths.l_max);
            cfg.paths.power_decay = p.value("power_decay", cfg.paths.power_decay);
        }
        cfg.count = j.value("count", cfg.count);
        cfg.id_prefix = j.value("id_prefix", cfg.id_prefix);
        Rng rng(seed);
        auto handle = std::make_unique<pnpcm_dataset>();
        handle->ds = generate_dataset(rng, cfg);
        *out = handle.release();
    });
}

pnpcm_status pnpcm_dataset_from_csv(const char *csv_path, const char *config_json,
                                    pnpcm_dataset **out) {
    if (auto s = require_c(out != nullptr && csv_path != nullptr, "csv_path/out must not be NULL"))
        return s;
    return guarded([&] {
        const auto j = parse_json(config_json, "dataset config");
        ArrayGeometry tx = geometry_from(j.value("tx", nlohmann::json::object()),
                                         ArrayGeometry{8, 8, 0.5});
        ArrayGeometry rx = geometry_from(j.value("rx", nlohmann::json::object()),
                                         ArrayGeometry{4, 4, 0.5});
        auto handle = std::make_unique<pnpcm_dataset>();
        handle->ds = dataset_from_path_file(csv_path, tx, rx);
        *out = handle.release();
    });
}

pnpcm_status pnpcm_dataset_open(const char *path, pnpcm_dataset **out) {
    if (auto s = require_c(out != nullptr && path != nullptr, "path/out must not be NULL"))
        return s;
    return guarded([&] {
        auto handle = std::make_unique<pnpcm_dataset>();
        handle->ds = ChannelDataset::load(path);
        *out = handle.release();
    });
}

pnpcm_status pnpcm_dataset_save(const pnpcm_dataset *dataset, const char *path) {
    if (auto s = require_c(dataset != nullptr && path != nullptr,
                           "dataset/path must not be NULL"))
        return s;
    return guarded([&] { dataset->ds.save(path); });
}

size_t pnpcm_dataset_size(const pnpcm_dataset *dataset) {
    return dataset == nullptr ? 0 : dataset->ds.samples.size();
}

void pnpcm_dataset_free(pnpcm_dataset *dataset) { delete dataset; }

pnpcm_status pnpcm_train(const pnpcm_dataset *dataset, const char *config_json, uint64_t seed,
                         const char *checkpoint_path, const char *loss_csv_path,
                         pnpcm_model **out) {
    if (auto s = require_c(dataset != nullptr && checkpoint_path != nullptr,
                           "dataset/checkpoint_path must not be NULL"))
        return s;
    return guarded([&] {
        CmConfig cfg;
        from_json(parse_json(config_json, "cm config"), cfg);
        TrainResult result = train_consistency_model(dataset->ds, cfg, seed);
        result.model->save_checkpoint(checkpoint_path);
        if (loss_csv_path != nullptr)
            write_loss_trace_csv(result.trace, loss_csv_path);
        if (out != nullptr) {
            auto handle = std::make_unique<pnpcm_model>();
            handle->model = result.model;
            *out = handle.release();
        }
    });
}

pnpcm_status pnpcm_model_open(const char *path, pnpcm_model **out) {
    if (auto s = require_c(out != nullptr && path != nullptr, "path/out must not be NULL"))
        return s;
    return guarded([&] {
        auto handle = std::make_unique<pnpcm_model>();
        handle->model = ConsistencyModel::load_checkpoint(path);
        *out = handle.release();
    });
}

void pnpcm_model_free(pnpcm_model *model) { delete model; }

pnpcm_status pnpcm_tune(const pnpcm_dataset *validation, const pnpcm_model *model,
                        const char *config_json, uint64_t seed, const char *table_out_path,
                        pnpcm_schedule_table **out) {
    if (auto s = require_c(validation != nullptr, "validation must not be NULL"))
        return s;
    return guarded([&] {
        const auto j = parse_json(config_json, "tune config");
        TuneGrid grid;
        const auto &g = j.at("grid");
        grid.t_hi_list = g.at("t_hi").get<std::vector<double>>();
        grid.rho_list = g.at("rho").get<std::vector<double>>();
        grid.beta_list = g.at("beta").get<std::vector<double>>();
        grid.n_iters = g.value("n_iters", 4);

        TuneSetup setup;
        const double alpha = j.value("alpha", 1.0);
        setup.pilot = search_pilot_config(alpha, validation->ds.n_t(), validation->ds.n_r(),
                                          j.value("n_rf", 1));
        setup.pilot.phase_bits = j.value("phase_bits", 4);
        if (j.contains("cg")) {
            setup.cg.max_iters = j["cg"].value("max_iters", setup.cg.max_iters);
            setup.cg.tolerance = j["cg"].value("tolerance", setup.cg.tolerance);
        }
        setup.seed = seed;
        setup.threads = j.value("threads", 0);

        const std::string den = j.value("denoiser", "cm");
        Denoiser denoiser = Denoiser::identity();
        if (den == "cm") {
            require(model != nullptr, errc::missing_checkpoint, "tune: denoiser 'cm' needs a model");
            denoiser = Denoiser::cm(model->model);
        } else if (den == "identity") {
            denoiser = Denoiser::identity();
        } else if (den == "soft") {
            denoiser = Denoiser::soft_threshold(j.value("soft_lambda", 0.5));
        } else if (den == "oracle") {
            denoiser = Denoiser::oracle(VecC());
        } else {
            fail(errc::invalid_argument, "tune: unknown denoiser '" + den + "'");
        }

        ScheduleTable table;
        for (const auto &snr_json : j.at("snr_db")) {
            const double snr = snr_json.is_string()
                                   ? std::numeric_limits<double>::infinity()
                                   : snr_json.get<double>();
            table.entries[snr] = tune_schedule(validation->ds, snr, grid, denoiser, setup);
        }
        if (table_out_path != nullptr)
            table.save(table_out_path);
        if (out != nullptr) {
            auto handle = std::make_unique<pnpcm_schedule_table>();
            handle->table = std::move(table);
            *out = handle.release();
        }
    });
}

pnpcm_status pnpcm_schedule_table_open(const char *path, pnpcm_schedule_table **out) {
    if (auto s = require_c(out != nullptr && path != nullptr, "path/out must not be NULL"))
        return s;
    return guarded([&] {
        auto handle = std::make_unique<pnpcm_schedule_table>();
        handle->table = ScheduleTable::load(path);
        *out = handle.release();
    });
}

void pnpcm_schedule_table_free(pnpcm_schedule_table *table) { delete table; }

pnpcm_status pnpcm_sweep(const char *config_json, const pnpcm_dataset *dataset,
                         const pnpcm_model *model, const pnpcm_schedule_table *table,
                         pnpcm_report **out) {
    if (auto s = require_c(out != nullptr && dataset != nullptr, "dataset/out must not be NULL"))
        return s;
    return guarded([&] {
        auto handle = std::make_unique<pnpcm_report>();
        handle->report =
            run_sweep(experiment_config_from(config_json), deps_from(dataset, model, table));
        *out = handle.release();
    });
}

pnpcm_status pnpcm_trace(const char *config_json, const pnpcm_dataset *dataset,
                         const pnpcm_model *model, const pnpcm_schedule_table *table,
                         pnpcm_report **out) {
    if (auto s = require_c(out != nullptr && dataset != nullptr, "dataset/out must not be NULL"))
        return s;
    return guarded([&] {
        auto handle = std::make_unique<pnpcm_report>();
        handle->report = run_iteration_trace(experiment_config_from(config_json),
                                             deps_from(dataset, model, table));
        *out = handle.release();
    });
}

pnpcm_status pnpcm_estimate(const char *config_json, const pnpcm_dataset *dataset,
                            const pnpcm_model *model, const pnpcm_schedule_table *table,
                            const char *obs_path, int sample_index, const char *estimate_out,
                            char **metrics_json_out) {
    if (auto s = require_c(dataset != nullptr, "dataset must not be NULL"))
        return s;
    return guarded([&] {
        EstimateResult res = estimate_single(
            experiment_config_from(config_json), deps_from(dataset, model, table),
            obs_path == nullptr ? "" : obs_path, sample_index,
            estimate_out == nullptr ? "" : estimate_out);
        if (metrics_json_out != nullptr)
            *metrics_json_out = dup_string(res.metrics.dump(2));
    });
}

pnpcm_status pnpcm_observe(const char *config_json, const pnpcm_dataset *dataset,
                           int sample_index, uint64_t seed, const char *obs_out_path) {
    if (auto s = require_c(dataset != nullptr && obs_out_path != nullptr,
                           "dataset/obs_out_path must not be NULL"))
        return s;
    return guarded([&] {
        const auto j = parse_json(config_json, "observe config");
        const ChannelDataset &ds = dataset->ds;
        require(sample_index >= 0 && sample_index < static_cast<int>(ds.samples.size()),
                errc::invalid_argument, "sample_index out of range");
        PilotConfig pilot =
            search_pilot_config(j.value("alpha", 1.0), ds.n_t(), ds.n_r(), j.value("n_rf", 1));
        pilot.phase_bits = j.value("phase_bits", 4);
        pilot.pilot_amplitude = j.value("pilot_amplitude", 1.0);
        double snr = std::numeric_limits<double>::infinity();
        if (j.contains("snr_db") && !j["snr_db"].is_string())
            snr = j["snr_db"].get<double>();
        Rng master(seed);
        Rng cb_rng = master.fork(1);
        Rng noise_rng = master.fork(2);
        Codebooks cb = generate_codebooks(cb_rng, pilot, ds.n_t(), ds.n_r());
        MeasurementOperator op = assemble_operator(cb.x_p, cb.w_rf, build_dictionary(ds.tx),
                                                   build_dictionary(ds.rx));
        const VecC h = vec(ds.samples[sample_index].angular);
        Observation obs = observe(op, h, snr, noise_rng);
        obs.truth_ref = ds.samples[sample_index].sample_id;
        obs.save(obs_out_path, pilot, cb_rng.seed());
    });
}

pnpcm_status pnpcm_report_emit(const pnpcm_report *report, const char *out_dir,
                               const char *formats) {
    if (auto s = require_c(report != nullptr && out_dir != nullptr,
                           "report/out_dir must not be NULL"))
        return s;
    return guarded([&] {
        std::vector<std::string> fmt;
        if (formats == nullptr || std::string(formats).empty()) {
            fmt = {"csv", "json"};
        } else {
            std::string cur;
            for (const char *p = formats;; ++p) {
                if (*p == ',' || *p == '\0') {
                    if (!cur.empty())
                        fmt.push_back(cur);
                    cur.clear();
                    if (*p == '\0')
                        break;
                } else {
                    cur.push_back(*p);
                }
            }
        }
        emit_report(report->report, out_dir, fmt);
    });
}

pnpcm_status pnpcm_report_open(const char *out_dir, pnpcm_report **out) {
    if (auto s = require_c(out != nullptr && out_dir != nullptr, "out_dir/out must not be NULL"))
        return s;
    return guarded([&] {
        auto handle = std::make_unique<pnpcm_report>();
        handle->report = load_report(out_dir);
        *out = handle.release();
    });
}

pnpcm_status pnpcm_report_summary(const pnpcm_report *report, char **json_out) {
    if (auto s = require_c(report != nullptr && json_out != nullptr,
                           "report/json_out must not be NULL"))
        return s;
    return guarded([&] {
        nlohmann::json j;
        j["kind"] = report->report.kind;
        j["version"] = report->report.version;
        j["seed"] = report->report.seed;
        j["averaging"] = report->report.averaging;
        auto settings = nlohmann::json::array();
        for (const auto &s : report->report.summaries) {
            nlohmann::json e;
            e["alpha_actual"] = s.alpha_actual;
            e["snr_db"] = std::isinf(s.snr_db) ? nlohmann::json("inf") : nlohmann::json(s.snr_db);
            e["n_samples"] = s.n_samples;
            e["nmse_linear_mean"] = s.final_nmse_mean();
            const double db = nmse_db(s.final_nmse_mean());
            e["nmse_db_mean"] = std::isinf(db) ? nlohmann::json(nullptr) : nlohmann::json(db);
            settings.push_back(e);
        }
        j["settings"] = settings;
        *json_out = dup_string(j.dump(2));
    });
}

void pnpcm_report_free(pnpcm_report *report) { delete report; }

pnpcm_status pnpcm_search_pilot_config(double target_alpha, int n_t, int n_r, int n_rf,
                                       int *m_t_out, int *m_r_out) {
    if (auto s = require_c(m_t_out != nullptr && m_r_out != nullptr,
                           "m_t_out/m_r_out must not be NULL"))
        return s;
    return guarded([&] {
        PilotConfig cfg = search_pilot_config(target_alpha, n_t, n_r, n_rf);
        *m_t_out = cfg.m_t;
        *m_r_out = cfg.m_r;
    });
}

pnpcm_status pnpcm_nmse(const double *h_hat, const double *h_true, size_t n, double *linear_out) {
    if (auto s = require_c(h_hat != nullptr && h_true != nullptr && linear_out != nullptr,
                           "pointers must not be NULL"))
        return s;
    return guarded([&] {
        VecC a(static_cast<Eigen::Index>(n)), b(static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i) {
            a[static_cast<Eigen::Index>(i)] = cxd(h_hat[2 * i], h_hat[2 * i + 1]);
            b[static_cast<Eigen::Index>(i)] = cxd(h_true[2 * i], h_true[2 * i + 1]);
        }
        *linear_out = nmse(a, b);
    });
}

void pnpcm_string_free(char *s) { std::free(s); }

} // extern "C"
