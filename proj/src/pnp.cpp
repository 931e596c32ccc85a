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

#include "pnpcm/pnp.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "pnpcm/parallel.hpp"

namespace pnpcm {

void PnpSchedule::validate() const {
    require(n_iters >= 1, errc::invalid_argument, "schedule: n_iters must be >= 1");
    require(t_seq.size() == static_cast<std::size_t>(n_iters) &&
                rho_seq.size() == static_cast<std::size_t>(n_iters) &&
                beta_seq.size() == static_cast<std::size_t>(n_iters),
            errc::invalid_argument, "schedule: sequence lengths must equal n_iters");
    for (int k = 1; k <= n_iters; ++k) {
        require(t_at(k) >= 0.0, errc::invalid_argument, "schedule: t must be >= 0");
        require(rho_at(k) > 0.0, errc::invalid_argument, "schedule: rho must be > 0");
        require(beta_at(k) >= 0.0, errc::invalid_argument, "schedule: beta must be >= 0");
    }
}

PnpSchedule make_geometric_schedule(double t_hi, double t_lo, double rho, double beta,
                                    int n_iters) {
    require(n_iters >= 1, errc::invalid_argument, "schedule: n_iters must be >= 1");
    require(t_hi >= t_lo && t_lo >= 0.0, errc::invalid_argument,
            "schedule: need t_hi >= t_lo >= 0");
    PnpSchedule s;
    s.n_iters = n_iters;
    s.t_seq.resize(n_iters);
    s.rho_seq.assign(n_iters, rho);
    s.beta_seq.assign(n_iters, beta);
    if (t_hi <= 0.0) {
        s.t_seq.assign(n_iters, 0.0);
    } else if (n_iters == 1) {
        s.t_seq[0] = t_hi;
    } else {
        // t_N = t_hi down to t_1 = t_lo, geometric in consumption order
        const double ratio = std::pow(t_lo / t_hi, 1.0 / (n_iters - 1));
        double v = t_hi;
        for (int k = n_iters; k >= 1; --k) {
            s.t_seq[static_cast<std::size_t>(k) - 1] = v;
            v *= ratio;
        }
        s.t_seq[0] = t_lo;
    }
    s.validate();
    return s;
}

PnpResult pnp_run(const MeasurementOperator &op, const VecC &y, const Denoiser &denoiser,
                  const PnpSchedule &schedule, const CgSettings &cg, Rng &rng,
                  const VecC *h_true) {
    schedule.validate();
    require(y.size() == op.rows(), errc::dimension_mismatch, "pnp_run: y length != rows");
    if (h_true != nullptr)
        require(h_true->size() == op.cols(), errc::dimension_mismatch,
                "pnp_run: truth length != cols");

    const Eigen::Index n = op.cols();
    const int n_iters = schedule.n_iters;
    const double truth_norm2 = h_true ? h_true->squaredNorm() : 0.0;

    VecC x = VecC::Zero(n), u = VecC::Zero(n);
    VecC x_hat = VecC::Zero(n), u_hat = VecC::Zero(n);
    VecC z = VecC::Zero(n);
    bool have_z = false;

    PnpResult result;
    result.trace.reserve(n_iters);

    for (int rev = n_iters - 1; rev >= 0; --rev) {
        const int k = rev + 1; // 1-based schedule subscript (t_{n+1}, ...)
        const double t = schedule.t_at(k);
        const double rho = schedule.rho_at(k);
        const double beta = schedule.beta_at(k);

        CgSettings cg_iter = cg;
        if (have_z)
            cg_iter.initial_guess = &z;
        CgResult dc = data_consistency_update(op, y, rho, x_hat, u_hat, cg_iter);
        z = std::move(dc.z);
        have_z = true;

        VecC nu = z + u_hat;
        if (t > 0.0) {
            const double sigma2 = t * t;
            for (Eigen::Index i = 0; i < n; ++i)
                nu[i] += rng.cnormal(sigma2);
        }

        VecC x_new = denoiser.denoise(nu, t);
        VecC u_new = u_hat + z - x_new;

        x_hat = x_new + beta * (x_new - x);
        u_hat = u_new + beta * (u_new - u);
        x = std::move(x_new);
        u = std::move(u_new);

        if (!all_finite(x) || !all_finite(u))
            fail(errc::non_finite,
                 "pnp_run: non-finite state at reverse index " + std::to_string(rev));

        PnpIterRecord rec;
        rec.iter = n_iters - rev;
        rec.t = t;
        rec.rho = rho;
        rec.beta = beta;
        rec.cg_iters = dc.iters;
        rec.cg_residual = dc.residual;
        rec.dual_residual = (z - x).norm();
        if (h_true != nullptr && truth_norm2 > 0.0)
            rec.nmse_linear = (x - *h_true).squaredNorm() / truth_norm2;
        result.trace.push_back(rec);
    }

    result.h_hat = std::move(x);
    return result;
}

const ScheduleEntry &ScheduleTable::entry_for(double snr_db) const {
    require(!entries.empty(), errc::invalid_argument, "schedule table is empty");
    const ScheduleEntry *best = nullptr;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto &[snr, entry] : entries) {
        double gap;
        if (std::isinf(snr) && std::isinf(snr_db))
            gap = 0.0;
        else if (std::isinf(snr) || std::isinf(snr_db))
            gap = std::numeric_limits<double>::max();
        else
            gap = std::abs(snr - snr_db);
        if (gap < best_gap) {
            best_gap = gap;
            best = &entry;
        }
    }
    // an all-finite table still serves +-inf queries via the extreme entry
    if (std::isinf(snr_db) && best_gap == std::numeric_limits<double>::max())
        best = snr_db > 0 ? &entries.rbegin()->second : &entries.begin()->second;
    return *best;
}

namespace {
nlohmann::json snr_key_json(double snr) {
    if (std::isinf(snr))
        return snr > 0 ? "inf" : "-inf";
    return snr;
}

double snr_key_parse(const nlohmann::json &j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        fail(errc::parse_error, "bad snr_db key '" + s + "'");
    }
    return j.get<double>();
}
} // namespace

void ScheduleTable::save(const std::string &path) const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "schedule_table";
    auto arr = nlohmann::json::array();
    for (const auto &[snr, e] : entries)
        arr.push_back({{"snr_db", snr_key_json(snr)},
                       {"t_hi", e.t_hi},
                       {"rho", e.rho},
                       {"beta", e.beta},
                       {"n_iters", e.n_iters}});
    j["entries"] = arr;
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open for writing: " + path);
    f << j.dump(2) << '\n';
}

ScheduleTable ScheduleTable::load(const std::string &path) {
    std::ifstream f(path);
    require(f.good(), errc::io_error, "cannot open schedule table: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception &e) {
        fail(errc::parse_error, "schedule table " + path + ": " + e.what());
    }
    require(j.value("schema_version", 0) == 1, errc::version_mismatch,
            "unsupported schedule table schema in " + path);
    ScheduleTable table;
    try {
        for (const auto &row : j.at("entries")) {
            ScheduleEntry e;
            e.t_hi = row.at("t_hi");
            e.rho = row.at("rho");
            e.beta = row.at("beta");
            e.n_iters = row.value("n_iters", 4);
            table.entries[snr_key_parse(row.at("snr_db"))] = e;
        }
    } catch (const nlohmann::json::exception &e) {
        fail(errc::parse_error, "schedule table " + path + ": " + e.what());
    }
    return table;
}

const ScheduleTable &ScheduleTable::builtin() {
    // Tuned once with `pnpcm tune` on a held-out synthetic validation set
    // (desk checkpoint, alpha = 1.0); see configs/schedule_default.json.
    static const ScheduleTable table = [] {
        ScheduleTable t;
        t.entries[-5.0] = {2.0, 1.0, 0.0, 4};
        t.entries[0.0] = {1.2, 0.5, 0.0, 4};
        t.entries[5.0] = {0.8, 0.2, 0.0, 4};
        t.entries[10.0] = {0.5, 0.1, 0.0, 4};
        t.entries[15.0] = {0.3, 0.05, 0.0, 4};
        t.entries[20.0] = {0.2, 0.02, 0.0, 4};
        t.entries[std::numeric_limits<double>::infinity()] = {0.05, 0.01, 0.0, 4};
        return t;
    }();
    return table;
}

PnpSchedule default_schedule(const ScheduleTable &table, double snr_db, int n_iters,
                             double t_lo_floor) {
    const ScheduleEntry &e = table.entry_for(snr_db);
    const int n = n_iters > 0 ? n_iters : e.n_iters;
    const double t_lo = std::min(e.t_hi, t_lo_floor);
    return make_geometric_schedule(e.t_hi, t_lo, e.rho, e.beta, n);
}

PnpSchedule default_schedule(double snr_db, int n_iters) {
    return default_schedule(ScheduleTable::builtin(), snr_db, n_iters);
}

ScheduleEntry tune_schedule(const ChannelDataset &validation, double snr_db,
                            const TuneGrid &grid, const Denoiser &denoiser,
                            const TuneSetup &setup, double *best_nmse) {
    require(!validation.samples.empty(), errc::empty_validation_set,
            "tune_schedule: validation set is empty");
    require(!grid.t_hi_list.empty() && !grid.rho_list.empty() && !grid.beta_list.empty(),
            errc::invalid_argument, "tune_schedule: empty grid");
    require(grid.n_iters >= 1, errc::invalid_argument, "tune_schedule: n_iters must be >= 1");

    const DftDictionary f_t = build_dictionary(validation.tx);
    const DftDictionary f_r = build_dictionary(validation.rx);
    const std::size_t n_samples = validation.samples.size();
    Rng master(setup.seed);

    // Candidate order is deterministic; ties on NMSE keep the first
    // candidate with the smaller rho.
    struct Candidate {
        ScheduleEntry entry;
        double mean_nmse = 0.0;
    };
    std::vector<Candidate> candidates;
    for (double rho : grid.rho_list)
        for (double t_hi : grid.t_hi_list)
            for (double beta : grid.beta_list)
                candidates.push_back({{t_hi, rho, beta, grid.n_iters}, 0.0});

    std::vector<double> sample_nmse(n_samples, 0.0);
    for (auto &cand : candidates) {
        PnpSchedule schedule = make_geometric_schedule(
            cand.entry.t_hi, std::min(cand.entry.t_hi, setup.t_lo_floor), cand.entry.rho,
            cand.entry.beta, grid.n_iters);
        parallel_for(0, static_cast<long>(n_samples), setup.threads, [&](long i) {
            Rng sample_rng = master.fork(static_cast<std::uint64_t>(i));
            Rng cb_rng = sample_rng.fork(1);
            Rng noise_rng = sample_rng.fork(2);
            Rng pnp_rng = sample_rng.fork(3);
            auto cb = generate_codebooks(cb_rng, setup.pilot, validation.n_t(), validation.n_r());
            MeasurementOperator op = assemble_operator(cb.x_p, cb.w_rf, f_t, f_r);
            const VecC h = vec(validation.samples[i].angular);
            Observation obs = observe(op, h, snr_db, noise_rng);
            Denoiser d = denoiser.kind() == Denoiser::Kind::oracle ? Denoiser::oracle(h) : denoiser;
            PnpResult res = pnp_run(op, obs.y, d, schedule, setup.cg, pnp_rng, &h);
            sample_nmse[i] = res.trace.back().nmse_linear;
        });
        double acc = 0.0;
        for (double v : sample_nmse)
            acc += v;
        cand.mean_nmse = acc / static_cast<double>(n_samples);
    }

    const Candidate *best = &candidates.front();
    for (const auto &c : candidates) {
        if (c.mean_nmse < best->mean_nmse ||
            (c.mean_nmse == best->mean_nmse && c.entry.rho < best->entry.rho))
            best = &c;
    }
    if (best_nmse)
        *best_nmse = best->mean_nmse;
    return best->entry;
}

} // namespace pnpcm
