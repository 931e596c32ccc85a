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

#include "pnpcm/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "pnpcm/container.hpp"
#include "pnpcm/parallel.hpp"

namespace pnpcm {

double nmse(const VecC &h_hat, const VecC &h_true) {
    require(h_hat.size() == h_true.size(), errc::dimension_mismatch,
            "nmse: vector lengths differ");
    const double denom = h_true.squaredNorm();
    require(denom > 0.0, errc::zero_truth, "nmse: zero reference channel");
    return (h_hat - h_true).squaredNorm() / denom;
}

double nmse_db(double linear) {
    if (linear <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(linear);
}

namespace {

std::string fmt_g17(double v) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string &s) {
    if (s == "inf")
        return std::numeric_limits<double>::infinity();
    if (s == "-inf")
        return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

nlohmann::json snr_to_json(double v) {
    if (std::isinf(v))
        return v > 0 ? nlohmann::json("inf") : nlohmann::json("-inf");
    return v;
}

double snr_from_json(const nlohmann::json &j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        fail(errc::parse_error, "bad snr value '" + s + "'");
    }
    return j.get<double>();
}

nlohmann::json db_or_null(double linear) {
    const double db = nmse_db(linear);
    if (std::isinf(db))
        return nullptr;
    return db;
}

} // namespace

void ExperimentConfig::validate() const {
    require(!pilot_targets.empty(), errc::invalid_argument, "no pilot targets configured");
    for (double a : pilot_targets)
        require(a > 0.0 && a <= 1.0, errc::invalid_argument, "pilot target out of (0, 1]");
    require(!snr_list.empty(), errc::invalid_argument, "no SNR values configured");
    for (double s : snr_list)
        require(std::isfinite(s) || s > 0.0, errc::invalid_argument,
                "snr_db must be finite or +inf");
    require(n_samples >= 1, errc::invalid_argument, "n_samples must be >= 1");
    require(sample_offset >= 0, errc::invalid_argument, "sample_offset must be >= 0");
    require(soft_lambda >= 0.0, errc::invalid_argument, "soft_lambda must be >= 0");
    parse_denoiser_kind(denoiser);
    require(cg.max_iters >= 1 && cg.tolerance > 0.0, errc::invalid_argument, "bad cg settings");
    require(n_iters >= 0, errc::invalid_argument, "n_iters must be >= 0");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json &j) {
    require(j.value("schema_version", 0) == 1, errc::version_mismatch,
            "unsupported experiment config schema_version");
    ExperimentConfig c;
    c.dataset_path = j.value("dataset", "");
    c.checkpoint_path = j.value("checkpoint", "");
    c.schedule_table_path = j.value("schedule_table", "");
    c.denoiser = j.value("denoiser", c.denoiser);
    c.soft_lambda = j.value("soft_lambda", c.soft_lambda);
    if (j.contains("pilot_targets"))
        c.pilot_targets = j["pilot_targets"].get<std::vector<double>>();
    if (j.contains("snr_db")) {
        c.snr_list.clear();
        for (const auto &e : j["snr_db"])
            c.snr_list.push_back(snr_from_json(e));
    }
    c.n_samples = j.value("n_samples", c.n_samples);
    c.sample_offset = j.value("sample_offset", c.sample_offset);
    c.n_rf = j.value("n_rf", c.n_rf);
    c.phase_bits = j.value("phase_bits", c.phase_bits);
    c.pilot_amplitude = j.value("pilot_amplitude", c.pilot_amplitude);
    if (j.contains("cg")) {
        c.cg.max_iters = j["cg"].value("max_iters", c.cg.max_iters);
        c.cg.tolerance = j["cg"].value("tolerance", c.cg.tolerance);
    }
    c.n_iters = j.value("n_iters", c.n_iters);
    if (j.contains("t_hi_override") && !j["t_hi_override"].is_null())
        c.t_hi_override = j["t_hi_override"].get<double>();
    if (j.contains("rho_override") && !j["rho_override"].is_null())
        c.rho_override = j["rho_override"].get<double>();
    if (j.contains("beta_override") && !j["beta_override"].is_null())
        c.beta_override = j["beta_override"].get<double>();
    c.fresh_codebook_per_sample = j.value("fresh_codebook_per_sample", true);
    c.threads = j.value("threads", 0);
    c.seed = j.value<std::uint64_t>("seed", 0);
    c.validate();
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["dataset"] = dataset_path;
    j["checkpoint"] = checkpoint_path;
    j["schedule_table"] = schedule_table_path;
    j["denoiser"] = denoiser;
    j["soft_lambda"] = soft_lambda;
    j["pilot_targets"] = pilot_targets;
    auto snrs = nlohmann::json::array();
    for (double v : snr_list)
        snrs.push_back(snr_to_json(v));
    j["snr_db"] = snrs;
    j["n_samples"] = n_samples;
    j["sample_offset"] = sample_offset;
    j["n_rf"] = n_rf;
    j["phase_bits"] = phase_bits;
    j["pilot_amplitude"] = pilot_amplitude;
    j["cg"] = {{"max_iters", cg.max_iters}, {"tolerance", cg.tolerance}};
    j["n_iters"] = n_iters;
    j["t_hi_override"] = t_hi_override ? nlohmann::json(*t_hi_override) : nlohmann::json(nullptr);
    j["rho_override"] = rho_override ? nlohmann::json(*rho_override) : nlohmann::json(nullptr);
    j["beta_override"] = beta_override ? nlohmann::json(*beta_override) : nlohmann::json(nullptr);
    j["fresh_codebook_per_sample"] = fresh_codebook_per_sample;
    j["threads"] = threads;
    j["seed"] = seed;
    return j;
}

namespace {

PnpSchedule resolve_schedule(const ExperimentConfig &config, const ScheduleTable &table,
                             double snr_db) {
    ScheduleEntry e = table.entry_for(snr_db);
    if (config.t_hi_override)
        e.t_hi = *config.t_hi_override;
    if (config.rho_override)
        e.rho = *config.rho_override;
    if (config.beta_override)
        e.beta = *config.beta_override;
    const int n = config.n_iters > 0 ? config.n_iters : e.n_iters;
    return make_geometric_schedule(e.t_hi, std::min(e.t_hi, 0.002), e.rho, e.beta, n);
}

EstimationReport run_experiment(const ExperimentConfig &config, const ExperimentDeps &deps,
                                const std::string &kind) {
    config.validate();
    require(deps.dataset != nullptr && !deps.dataset->samples.empty(), errc::invalid_argument,
            "experiment needs a non-empty dataset");
    const ChannelDataset &ds = *deps.dataset;
    const Denoiser::Kind dk = parse_denoiser_kind(config.denoiser);
    if (dk == Denoiser::Kind::cm) {
        require(deps.model != nullptr, errc::missing_checkpoint,
                "denoiser 'cm' requires a checkpoint");
        require(deps.model->n_r() == ds.n_r() && deps.model->n_t() == ds.n_t(),
                errc::version_mismatch, "checkpoint shape does not match the dataset");
    }
    const ScheduleTable &table = deps.table ? *deps.table : ScheduleTable::builtin();

    const auto t0 = std::chrono::steady_clock::now();
    const DftDictionary f_t = build_dictionary(ds.tx);
    const DftDictionary f_r = build_dictionary(ds.rx);
    Rng master(config.seed);

    EstimationReport report;
    report.kind = kind;
    report.config_echo = config.to_json();
    report.seed = config.seed;
    report.version = version_string();

    int setting_idx = 0;
    for (double alpha : config.pilot_targets) {
        for (double snr : config.snr_list) {
            PilotConfig pilot = search_pilot_config(alpha, ds.n_t(), ds.n_r(), config.n_rf);
            pilot.phase_bits = config.phase_bits;
            pilot.pilot_amplitude = config.pilot_amplitude;
            const double alpha_actual =
                static_cast<double>(pilot.measurements()) / (ds.n_t() * ds.n_r());
            const PnpSchedule schedule = resolve_schedule(config, table, snr);

            Rng setting_rng = master.fork(static_cast<std::uint64_t>(setting_idx));
            Codebooks shared_cb;
            MeasurementOperator shared_op;
            if (!config.fresh_codebook_per_sample) {
                Rng cb_rng = setting_rng.fork(1);
                shared_cb = generate_codebooks(cb_rng, pilot, ds.n_t(), ds.n_r());
                shared_op = assemble_operator(shared_cb.x_p, shared_cb.w_rf, f_t, f_r);
            }

            std::vector<ReportRow> rows(static_cast<std::size_t>(config.n_samples) *
                                        schedule.n_iters);
            parallel_for(0, config.n_samples, config.threads, [&](long i) {
                Rng sample_rng = setting_rng.fork(16 + static_cast<std::uint64_t>(i));
                const ChannelSample &cs =
                    ds.samples[(config.sample_offset + i) % ds.samples.size()];
                const VecC h = vec(cs.angular);

                MeasurementOperator local_op;
                const MeasurementOperator *op = &shared_op;
                if (config.fresh_codebook_per_sample) {
                    Rng cb_rng = sample_rng.fork(1);
                    Codebooks cb = generate_codebooks(cb_rng, pilot, ds.n_t(), ds.n_r());
                    local_op = assemble_operator(cb.x_p, cb.w_rf, f_t, f_r);
                    op = &local_op;
                }
                Rng noise_rng = sample_rng.fork(2);
                Rng pnp_rng = sample_rng.fork(3);
                Observation obs = observe(*op, h, snr, noise_rng);

                Denoiser den = Denoiser::identity();
                switch (dk) {
                case Denoiser::Kind::cm: den = Denoiser::cm(deps.model); break;
                case Denoiser::Kind::identity: den = Denoiser::identity(); break;
                case Denoiser::Kind::soft_threshold:
                    den = Denoiser::soft_threshold(config.soft_lambda);
                    break;
                case Denoiser::Kind::oracle: den = Denoiser::oracle(h); break;
                }

                PnpResult res = pnp_run(*op, obs.y, den, schedule, config.cg, pnp_rng, &h);
                for (int it = 0; it < schedule.n_iters; ++it) {
                    ReportRow &row = rows[static_cast<std::size_t>(i) * schedule.n_iters + it];
                    row.alpha_target = alpha;
                    row.alpha_actual = alpha_actual;
                    row.m_t = pilot.m_t;
                    row.m_r = pilot.m_r;
                    row.n_rf = pilot.n_rf;
                    row.snr_db = snr;
                    row.sample_index = config.sample_offset + i;
                    row.sample_id = cs.sample_id;
                    row.iter = res.trace[it].iter;
                    row.nmse_linear = res.trace[it].nmse_linear;
                    row.cg_iters = res.trace[it].cg_iters;
                    row.dual_residual = res.trace[it].dual_residual;
                }
            });
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
            ++setting_idx;
        }
    }

    report.summaries = recompute_summaries(report.rows);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace

EstimationReport run_sweep(const ExperimentConfig &config, const ExperimentDeps &deps) {
    return run_experiment(config, deps, "sweep");
}

EstimationReport run_iteration_trace(const ExperimentConfig &config, const ExperimentDeps &deps) {
    return run_experiment(config, deps, "trace");
}

std::vector<SettingSummary> recompute_summaries(const std::vector<ReportRow> &rows) {
    std::vector<SettingSummary> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        const double alpha = rows[i].alpha_target;
        const double snr = rows[i].snr_db;
        SettingSummary s;
        s.alpha_target = alpha;
        s.alpha_actual = rows[i].alpha_actual;
        s.m_t = rows[i].m_t;
        s.m_r = rows[i].m_r;
        s.snr_db = snr;
        std::vector<long> counts;
        for (; i < rows.size(); ++i) {
            const ReportRow &r = rows[i];
            const bool same = r.alpha_target == alpha &&
                              (r.snr_db == snr || (std::isinf(r.snr_db) && std::isinf(snr)));
            if (!same)
                break;
            if (r.iter > static_cast<int>(s.iter_nmse_mean.size())) {
                s.iter_nmse_mean.resize(r.iter, 0.0);
                counts.resize(r.iter, 0);
            }
            s.iter_nmse_mean[r.iter - 1] += r.nmse_linear;
            counts[r.iter - 1] += 1;
        }
        for (std::size_t k = 0; k < s.iter_nmse_mean.size(); ++k)
            s.iter_nmse_mean[k] /= static_cast<double>(counts[k]);
        s.n_samples = static_cast<int>(counts.empty() ? 0 : counts[0]);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

const char *kCsvHeader = "alpha_target,alpha_actual,m_t,m_r,n_rf,snr_db,sample_index,sample_id,"
                         "iter,nmse_linear,nmse_db,cg_iters,dual_residual";

std::string report_csv(const EstimationReport &report) {
    std::ostringstream os;
    os << kCsvHeader << '\n';
    for (const auto &r : report.rows) {
        require(r.sample_id.find(',') == std::string::npos, errc::invalid_argument,
                "sample_id must not contain commas: " + r.sample_id);
        os << fmt_g17(r.alpha_target) << ',' << fmt_g17(r.alpha_actual) << ',' << r.m_t << ','
           << r.m_r << ',' << r.n_rf << ',' << fmt_g17(r.snr_db) << ',' << r.sample_index << ','
           << r.sample_id << ',' << r.iter << ',' << fmt_g17(r.nmse_linear) << ','
           << fmt_g17(nmse_db(r.nmse_linear)) << ',' << r.cg_iters << ','
           << fmt_g17(r.dual_residual) << '\n';
    }
    return os.str();
}

std::string trace_csv(const EstimationReport &report) {
    std::ostringstream os;
    os << "sample_id,iter,nmse_db,cg_iters,dual_residual\n";
    for (const auto &r : report.rows)
        os << r.sample_id << ',' << r.iter << ',' << fmt_g17(nmse_db(r.nmse_linear)) << ','
           << r.cg_iters << ',' << fmt_g17(r.dual_residual) << '\n';
    return os.str();
}

std::string summary_json(const EstimationReport &report) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = report.kind;
    j["version"] = report.version;
    j["seed"] = report.seed;
    j["averaging"] = report.averaging;
    j["config"] = report.config_echo;
    auto settings = nlohmann::json::array();
    for (const auto &s : report.summaries) {
        nlohmann::json e;
        e["alpha_target"] = s.alpha_target;
        e["alpha_actual"] = s.alpha_actual;
        e["m_t"] = s.m_t;
        e["m_r"] = s.m_r;
        e["snr_db"] = snr_to_json(s.snr_db);
        e["n_samples"] = s.n_samples;
        e["nmse_linear_mean"] = s.final_nmse_mean();
        e["nmse_db_mean"] = db_or_null(s.final_nmse_mean());
        auto lin = nlohmann::json::array();
        auto db = nlohmann::json::array();
        for (double v : s.iter_nmse_mean) {
            lin.push_back(v);
            db.push_back(db_or_null(v));
        }
        e["iter_nmse_linear_mean"] = lin;
        e["iter_nmse_db_mean"] = db;
        settings.push_back(e);
    }
    j["settings"] = settings;
    return j.dump(2) + "\n";
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open for writing: " + path);
    f << text;
    require(f.good(), errc::io_error, "short write: " + path);
}

} // namespace

std::vector<std::string> emit_report(const EstimationReport &report, const std::string &out_dir,
                                     const std::vector<std::string> &formats) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto &f : formats)
        require(f == "csv" || f == "json", errc::invalid_argument,
                "unknown report format '" + f + "'");
    auto wants = [&](const char *f) {
        for (const auto &x : formats)
            if (x == f)
                return true;
        return false;
    };
    if (wants("csv")) {
        const std::string path = out_dir + "/report.csv";
        write_text(path, report_csv(report));
        written.push_back(path);
        if (report.kind == "trace") {
            const std::string tpath = out_dir + "/trace.csv";
            write_text(tpath, trace_csv(report));
            written.push_back(tpath);
        }
    }
    if (wants("json")) {
        const std::string path = out_dir + "/summary.json";
        write_text(path, summary_json(report));
        written.push_back(path);
    }
    return written;
}

EstimationReport load_report(const std::string &out_dir) {
    std::ifstream jf(out_dir + "/summary.json");
    require(jf.good(), errc::io_error, "cannot open " + out_dir + "/summary.json");
    nlohmann::json j;
    try {
        jf >> j;
    } catch (const nlohmann::json::exception &e) {
        fail(errc::parse_error, std::string("summary.json: ") + e.what());
    }
    require(j.value("schema_version", 0) == 1, errc::version_mismatch,
            "unsupported report schema_version");

    EstimationReport report;
    report.kind = j.value("kind", "sweep");
    report.version = j.value("version", "");
    report.seed = j.value<std::uint64_t>("seed", 0);
    report.averaging = j.value("averaging", "db_of_mean_linear");
    report.config_echo = j.value("config", nlohmann::json::object());

    std::ifstream cf(out_dir + "/report.csv");
    require(cf.good(), errc::io_error, "cannot open " + out_dir + "/report.csv");
    std::string line;
    require(static_cast<bool>(std::getline(cf, line)), errc::parse_error, "empty report.csv");
    require(line == kCsvHeader, errc::parse_error, "unexpected report.csv header");
    int line_no = 1;
    while (std::getline(cf, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::string cur;
        std::istringstream ss(line);
        while (std::getline(ss, cur, ','))
            f.push_back(cur);
        require(f.size() == 13, errc::parse_error,
                "report.csv line " + std::to_string(line_no) + ": bad field count");
        ReportRow r;
        r.alpha_target = parse_double(f[0]);
        r.alpha_actual = parse_double(f[1]);
        r.m_t = std::stoi(f[2]);
        r.m_r = std::stoi(f[3]);
        r.n_rf = std::stoi(f[4]);
        r.snr_db = parse_double(f[5]);
        r.sample_index = std::stol(f[6]);
        r.sample_id = f[7];
        r.iter = std::stoi(f[8]);
        r.nmse_linear = parse_double(f[9]);
        r.cg_iters = std::stoi(f[11]);
        r.dual_residual = parse_double(f[12]);
        report.rows.push_back(std::move(r));
    }
    report.summaries = recompute_summaries(report.rows);
    return report;
}

EstimateResult estimate_single(const ExperimentConfig &config, const ExperimentDeps &deps,
                               const std::string &obs_path, int sample_index,
                               const std::string &estimate_out) {
    config.validate();
    require(deps.dataset != nullptr && !deps.dataset->samples.empty(), errc::invalid_argument,
            "estimate needs a dataset for geometry and truth");
    const ChannelDataset &ds = *deps.dataset;
    const DftDictionary f_t = build_dictionary(ds.tx);
    const DftDictionary f_r = build_dictionary(ds.rx);
    const ScheduleTable &table = deps.table ? *deps.table : ScheduleTable::builtin();
    const Denoiser::Kind dk = parse_denoiser_kind(config.denoiser);
    if (dk == Denoiser::Kind::cm)
        require(deps.model != nullptr, errc::missing_checkpoint,
                "denoiser 'cm' requires a checkpoint");

    PilotConfig pilot;
    Observation obs;
    std::uint64_t cb_seed = 0;
    const VecC *truth = nullptr;
    VecC truth_store;

    if (!obs_path.empty()) {
        obs = Observation::load(obs_path, &pilot, &cb_seed);
        for (const auto &s : ds.samples)
            if (!obs.truth_ref.empty() && s.sample_id == obs.truth_ref) {
                truth_store = vec(s.angular);
                truth = &truth_store;
            }
    } else {
        require(sample_index >= 0 && sample_index < static_cast<int>(ds.samples.size()),
                errc::invalid_argument, "sample_index out of range");
        pilot = search_pilot_config(config.pilot_targets.front(), ds.n_t(), ds.n_r(),
                                    config.n_rf);
        pilot.phase_bits = config.phase_bits;
        pilot.pilot_amplitude = config.pilot_amplitude;
        Rng master(config.seed);
        Rng sample_rng = master.fork(0).fork(16 + static_cast<std::uint64_t>(sample_index));
        Rng cb_rng = sample_rng.fork(1);
        cb_seed = cb_rng.seed();
        Rng noise_rng = sample_rng.fork(2);
        const ChannelSample &cs = ds.samples[sample_index];
        truth_store = vec(cs.angular);
        truth = &truth_store;
        Codebooks cb = generate_codebooks(cb_rng, pilot, ds.n_t(), ds.n_r());
        MeasurementOperator op = assemble_operator(cb.x_p, cb.w_rf, f_t, f_r);
        obs = observe(op, truth_store, config.snr_list.front(), noise_rng);
        obs.truth_ref = cs.sample_id;
    }

    Rng cb_rng(cb_seed);
    Codebooks cb = generate_codebooks(cb_rng, pilot, ds.n_t(), ds.n_r());
    MeasurementOperator op = assemble_operator(cb.x_p, cb.w_rf, f_t, f_r);

    Denoiser den = Denoiser::identity();
    switch (dk) {
    case Denoiser::Kind::cm: den = Denoiser::cm(deps.model); break;
    case Denoiser::Kind::identity: den = Denoiser::identity(); break;
    case Denoiser::Kind::soft_threshold: den = Denoiser::soft_threshold(config.soft_lambda); break;
    case Denoiser::Kind::oracle:
        require(truth != nullptr, errc::invalid_argument,
                "oracle denoiser requires a truth reference");
        den = Denoiser::oracle(*truth);
        break;
    }

    const PnpSchedule schedule = resolve_schedule(config, table, obs.snr_db);
    Rng pnp_rng = Rng(config.seed).fork(0xF00D);
    PnpResult res = pnp_run(op, obs.y, den, schedule, config.cg, pnp_rng,
                            truth ? &truth_store : nullptr);

    EstimateResult out;
    out.h_hat = std::move(res.h_hat);
    out.metrics["snr_db"] = snr_to_json(obs.snr_db);
    out.metrics["m_t"] = pilot.m_t;
    out.metrics["m_r"] = pilot.m_r;
    out.metrics["n_iters"] = schedule.n_iters;
    out.metrics["sample_id"] = obs.truth_ref;
    if (truth != nullptr) {
        const double lin = res.trace.back().nmse_linear;
        out.metrics["nmse_linear"] = lin;
        out.metrics["nmse_db"] = db_or_null(lin);
    }

    if (!estimate_out.empty()) {
        ContainerWriter w;
        w.meta["kind"] = "estimate";
        w.meta["format_version"] = 1;
        w.meta["n_r"] = ds.n_r();
        w.meta["n_t"] = ds.n_t();
        w.meta["metrics"] = out.metrics;
        std::vector<double> blob;
        blob.reserve(2 * out.h_hat.size());
        for (Eigen::Index i = 0; i < out.h_hat.size(); ++i) {
            blob.push_back(out.h_hat[i].real());
            blob.push_back(out.h_hat[i].imag());
        }
        w.add_f64("h_hat", blob.data(), blob.size());
        w.write(estimate_out);
    }
    return out;
}

} // namespace pnpcm
