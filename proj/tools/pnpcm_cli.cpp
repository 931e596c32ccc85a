// SPDX-License-Identifier: Apache-2.0
//
// pnpcm command-line driver. Links against the pnpcm C API only; all heavy
// lifting happens inside the shared library.
//
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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pnpcm/pnpcm.h"

namespace {

using nlohmann::json;

[[noreturn]] void die(const char *code, const std::string &message) {
    json err;
    err["error"] = {{"code", code}, {"message", message}};
    std::cerr << "error: " << err["error"].dump() << std::endl;
    std::exit(1);
}

void check(pnpcm_status status, const std::string &context) {
    if (status != PNPCM_OK)
        die(pnpcm_status_name(status), context + ": " + pnpcm_last_error());
}

json load_json_file(const std::string &path) {
    std::ifstream f(path);
    if (!f.good())
        die("io_error", "cannot open config file: " + path);
    try {
        json j;
        f >> j;
        return j;
    } catch (const json::exception &e) {
        die("parse_error", "config file " + path + ": " + e.what());
    }
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
};

json resolve_config(const CommonOpts &opts) {
    json cfg = opts.config_path.empty() ? json::object() : load_json_file(opts.config_path);
    if (opts.seed)
        cfg["seed"] = *opts.seed;
    return cfg;
}

std::uint64_t config_seed(const json &cfg) { return cfg.value<std::uint64_t>("seed", 0); }

struct DatasetHandle {
    pnpcm_dataset *p = nullptr;
    ~DatasetHandle() { pnpcm_dataset_free(p); }
};
struct ModelHandle {
    pnpcm_model *p = nullptr;
    ~ModelHandle() { pnpcm_model_free(p); }
};
struct TableHandle {
    pnpcm_schedule_table *p = nullptr;
    ~TableHandle() { pnpcm_schedule_table_free(p); }
};
struct ReportHandle {
    pnpcm_report *p = nullptr;
    ~ReportHandle() { pnpcm_report_free(p); }
};

void open_experiment_handles(const json &cfg, DatasetHandle &ds, ModelHandle &model,
                             TableHandle &table) {
    const std::string dataset_path = cfg.value("dataset", "");
    if (dataset_path.empty())
        die("invalid_argument", "config lacks a 'dataset' path");
    check(pnpcm_dataset_open(dataset_path.c_str(), &ds.p), "open dataset");
    const std::string checkpoint = cfg.value("checkpoint", "");
    if (!checkpoint.empty())
        check(pnpcm_model_open(checkpoint.c_str(), &model.p), "open checkpoint");
    const std::string table_path = cfg.value("schedule_table", "");
    if (!table_path.empty())
        check(pnpcm_schedule_table_open(table_path.c_str(), &table.p), "open schedule table");
}

int cmd_gen_data(const CommonOpts &opts, const std::string &csv, const std::string &name) {
    json cfg = resolve_config(opts);
    DatasetHandle ds;
    if (csv.empty())
        check(pnpcm_dataset_generate(cfg.dump().c_str(), config_seed(cfg), &ds.p),
              "generate dataset");
    else
        check(pnpcm_dataset_from_csv(csv.c_str(), cfg.dump().c_str(), &ds.p), "ingest csv");
    std::filesystem::create_directories(opts.out_dir);
    const std::string out = opts.out_dir + "/" + name;
    check(pnpcm_dataset_save(ds.p, out.c_str()), "save dataset");
    std::cout << "wrote " << out << " (" << pnpcm_dataset_size(ds.p) << " samples)" << std::endl;
    return 0;
}

int cmd_train_cm(const CommonOpts &opts, const std::string &dataset_path) {
    json cfg = resolve_config(opts);
    const std::string ds_path = dataset_path.empty() ? cfg.value("dataset", "") : dataset_path;
    if (ds_path.empty())
        die("invalid_argument", "train-cm needs --dataset or a 'dataset' config entry");
    DatasetHandle ds;
    check(pnpcm_dataset_open(ds_path.c_str(), &ds.p), "open dataset");
    std::filesystem::create_directories(opts.out_dir);
    const std::string ckpt = opts.out_dir + "/checkpoint.pnpc";
    const std::string loss = opts.out_dir + "/loss.csv";
    check(pnpcm_train(ds.p, cfg.dump().c_str(), config_seed(cfg), ckpt.c_str(), loss.c_str(),
                      nullptr),
          "train");
    std::cout << "wrote " << ckpt << " and " << loss << std::endl;
    return 0;
}

int cmd_tune(const CommonOpts &opts, const std::string &dataset_path,
             const std::string &checkpoint) {
    json cfg = resolve_config(opts);
    const std::string ds_path = dataset_path.empty() ? cfg.value("dataset", "") : dataset_path;
    if (ds_path.empty())
        die("invalid_argument", "tune needs --dataset or a 'dataset' config entry");
    DatasetHandle ds;
    check(pnpcm_dataset_open(ds_path.c_str(), &ds.p), "open dataset");
    ModelHandle model;
    const std::string ckpt = checkpoint.empty() ? cfg.value("checkpoint", "") : checkpoint;
    if (!ckpt.empty())
        check(pnpcm_model_open(ckpt.c_str(), &model.p), "open checkpoint");
    std::filesystem::create_directories(opts.out_dir);
    const std::string table_path = opts.out_dir + "/schedule.json";
    check(pnpcm_tune(ds.p, model.p, cfg.dump().c_str(), config_seed(cfg), table_path.c_str(),
                     nullptr),
          "tune");
    std::cout << "wrote " << table_path << std::endl;
    return 0;
}

void apply_overrides(json &cfg, const std::string &denoiser, const std::string &checkpoint,
                     const std::string &dataset, const std::string &schedule) {
    if (!denoiser.empty())
        cfg["denoiser"] = denoiser;
    if (!checkpoint.empty())
        cfg["checkpoint"] = checkpoint;
    if (!dataset.empty())
        cfg["dataset"] = dataset;
    if (!schedule.empty())
        cfg["schedule_table"] = schedule;
    if (!cfg.contains("schema_version"))
        cfg["schema_version"] = 1;
}

int cmd_run(const CommonOpts &opts, bool trace, const std::string &denoiser,
            const std::string &checkpoint, const std::string &dataset,
            const std::string &schedule) {
    json cfg = resolve_config(opts);
    apply_overrides(cfg, denoiser, checkpoint, dataset, schedule);
    DatasetHandle ds;
    ModelHandle model;
    TableHandle table;
    open_experiment_handles(cfg, ds, model, table);
    ReportHandle report;
    const std::string what = trace ? "trace" : "sweep";
    check((trace ? pnpcm_trace : pnpcm_sweep)(cfg.dump().c_str(), ds.p, model.p, table.p,
                                              &report.p),
          what);
    check(pnpcm_report_emit(report.p, opts.out_dir.c_str(), "csv,json"), "emit report");
    char *summary = nullptr;
    check(pnpcm_report_summary(report.p, &summary), "summarize");
    std::cout << summary << std::endl;
    pnpcm_string_free(summary);
    return 0;
}

int cmd_estimate(const CommonOpts &opts, const std::string &denoiser,
                 const std::string &checkpoint, const std::string &dataset,
                 const std::string &schedule, const std::string &obs, int index) {
    json cfg = resolve_config(opts);
    apply_overrides(cfg, denoiser, checkpoint, dataset, schedule);
    DatasetHandle ds;
    ModelHandle model;
    TableHandle table;
    open_experiment_handles(cfg, ds, model, table);
    std::filesystem::create_directories(opts.out_dir);
    const std::string out = opts.out_dir + "/estimate.pnpc";
    char *metrics = nullptr;
    check(pnpcm_estimate(cfg.dump().c_str(), ds.p, model.p, table.p,
                         obs.empty() ? nullptr : obs.c_str(), index, out.c_str(), &metrics),
          "estimate");
    std::cout << metrics << std::endl;
    pnpcm_string_free(metrics);
    return 0;
}

int cmd_observe(const CommonOpts &opts, const std::string &dataset, int index) {
    json cfg = resolve_config(opts);
    const std::string ds_path = dataset.empty() ? cfg.value("dataset", "") : dataset;
    if (ds_path.empty())
        die("invalid_argument", "observe needs --dataset or a 'dataset' config entry");
    DatasetHandle ds;
    check(pnpcm_dataset_open(ds_path.c_str(), &ds.p), "open dataset");
    std::filesystem::create_directories(opts.out_dir);
    const std::string out = opts.out_dir + "/observation.pnpc";
    check(pnpcm_observe(cfg.dump().c_str(), ds.p, index, config_seed(cfg), out.c_str()),
          "observe");
    std::cout << "wrote " << out << std::endl;
    return 0;
}

int cmd_report(const std::string &in_dir, const std::string &out_dir) {
    ReportHandle report;
    check(pnpcm_report_open(in_dir.c_str(), &report.p), "open report");
    if (!out_dir.empty())
        check(pnpcm_report_emit(report.p, out_dir.c_str(), "csv,json"), "re-emit report");
    char *summary = nullptr;
    check(pnpcm_report_summary(report.p, &summary), "summarize");
    std::cout << summary << std::endl;
    pnpcm_string_free(summary);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"pnpcm: pilot-aided MIMO channel estimation with a consistency-model prior"};
    app.set_version_flag("--version", std::string(pnpcm_version()));
    app.require_subcommand(1);

    CommonOpts opts;
    std::string csv, name = "dataset.pnpc";
    std::string dataset, checkpoint, schedule, denoiser, obs, report_in;
    int index = 0;

    auto add_common = [&](CLI::App *cmd) {
        cmd->add_option("--config", opts.config_path, "JSON config file");
        cmd->add_option("--seed", opts.seed, "64-bit seed (overrides config)");
        cmd->add_option("--out", opts.out_dir, "output directory");
    };

    auto *gen = app.add_subcommand("gen-data", "generate a synthetic dataset or ingest a CSV");
    add_common(gen);
    gen->add_option("--csv", csv, "path-parameter CSV to ingest instead of sampling");
    gen->add_option("--name", name, "output file name");

    auto *train = app.add_subcommand("train-cm", "train the consistency model");
    add_common(train);
    train->add_option("--dataset", dataset, "training dataset file");

    auto *tune = app.add_subcommand("tune", "grid-search the PnP schedule table");
    add_common(tune);
    tune->add_option("--dataset", dataset, "validation dataset file");
    tune->add_option("--checkpoint", checkpoint, "CM checkpoint file");

    auto *estimate = app.add_subcommand("estimate", "estimate one channel from an observation");
    add_common(estimate);
    estimate->add_option("--dataset", dataset, "dataset file (geometry and truth)");
    estimate->add_option("--checkpoint", checkpoint, "CM checkpoint file");
    estimate->add_option("--schedule", schedule, "schedule table file");
    estimate->add_option("--denoiser", denoiser, "cm|identity|soft|oracle");
    estimate->add_option("--obs", obs, "observation bundle (synthesized when omitted)");
    estimate->add_option("--index", index, "dataset sample index");

    auto *observe = app.add_subcommand("observe", "synthesize and save an observation bundle");
    add_common(observe);
    observe->add_option("--dataset", dataset, "dataset file");
    observe->add_option("--index", index, "dataset sample index");

    auto *sweep = app.add_subcommand("sweep", "NMSE sweep over SNR and pilot ratio");
    add_common(sweep);
    sweep->add_option("--dataset", dataset, "dataset file (overrides config)");
    sweep->add_option("--checkpoint", checkpoint, "CM checkpoint file (overrides config)");
    sweep->add_option("--schedule", schedule, "schedule table file (overrides config)");
    sweep->add_option("--denoiser", denoiser, "cm|identity|soft|oracle (overrides config)");

    auto *trace = app.add_subcommand("trace", "per-iteration NMSE traces");
    add_common(trace);
    trace->add_option("--dataset", dataset, "dataset file (overrides config)");
    trace->add_option("--checkpoint", checkpoint, "CM checkpoint file (overrides config)");
    trace->add_option("--schedule", schedule, "schedule table file (overrides config)");
    trace->add_option("--denoiser", denoiser, "cm|identity|soft|oracle (overrides config)");

    std::string report_out;
    auto *report = app.add_subcommand("report", "load an emitted report and print its summary");
    report->add_option("--in", report_in, "report directory")->required();
    report->add_option("--out", report_out, "re-emit into this directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(opts, csv, name);
        if (train->parsed())
            return cmd_train_cm(opts, dataset);
        if (tune->parsed())
            return cmd_tune(opts, dataset, checkpoint);
        if (estimate->parsed())
            return cmd_estimate(opts, denoiser, checkpoint, dataset, schedule, obs, index);
        if (observe->parsed())
            return cmd_observe(opts, dataset, index);
        if (sweep->parsed())
            return cmd_run(opts, false, denoiser, checkpoint, dataset, schedule);
        if (trace->parsed())
            return cmd_run(opts, true, denoiser, checkpoint, dataset, schedule);
        if (report->parsed())
            return cmd_report(report_in, report_out);
    } catch (const std::exception &e) {
        die("internal_error", e.what());
    }
    die("invalid_argument", "no subcommand given");
}
