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

#ifndef PNPCM_PNP_HPP
#define PNPCM_PNP_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pnpcm/cg.hpp"
#include "pnpcm/denoiser.hpp"
#include "pnpcm/measurement.hpp"
#include "pnpcm/rng.hpp"

namespace pnpcm {

// Per-iteration sequences, stored 1-indexed: entry k (1-based) is consumed
// by the reverse step n = k - 1 as t_{n+1}, rho_{n+1}, beta_{n+1}. The
// largest noise level t_N is used first.
struct PnpSchedule {
    int n_iters = 4;
    std::vector<double> t_seq;    // t_1 .. t_N, ascending in typical use
    std::vector<double> rho_seq;  // rho_1 .. rho_N
    std::vector<double> beta_seq; // beta_1 .. beta_N

    double t_at(int k) const { return t_seq[static_cast<std::size_t>(k) - 1]; }
    double rho_at(int k) const { return rho_seq[static_cast<std::size_t>(k) - 1]; }
    double beta_at(int k) const { return beta_seq[static_cast<std::size_t>(k) - 1]; }
    void validate() const;
};

// Geometric noise ladder from t_hi down to t_lo with constant rho and beta.
PnpSchedule make_geometric_schedule(double t_hi, double t_lo, double rho, double beta,
                                    int n_iters);

struct PnpIterRecord {
    int iter = 0; // 1-based count of completed outer iterations
    double t = 0.0, rho = 0.0, beta = 0.0;
    int cg_iters = 0;
    double cg_residual = 0.0;
    double dual_residual = 0.0;             // ||z_n - x_n||
    double nmse_linear = -1.0;              // < 0 when no truth supplied
};

struct PnpResult {
    VecC h_hat;
    std::vector<PnpIterRecord> trace;
};

// Reverse-indexed PnP loop: for n = N-1 .. 0, data consistency via CG
// (warm-started from the previous outer iterate), active noising at level
// t_{n+1}, denoiser prior update, scaled dual update and Nesterov-type
// extrapolation. Returns x_0.
PnpResult pnp_run(const MeasurementOperator &op, const VecC &y, const Denoiser &denoiser,
                  const PnpSchedule &schedule, const CgSettings &cg, Rng &rng,
                  const VecC *h_true = nullptr);

struct ScheduleEntry {
    double t_hi = 0.3;
    double rho = 0.1;
    double beta = 0.0;
    int n_iters = 4;
};

// Per-SNR PnP parameters. Lookup picks the nearest tabulated SNR; +inf is
// an admissible key.
class ScheduleTable {
  public:
    std::map<double, ScheduleEntry> entries;

    const ScheduleEntry &entry_for(double snr_db) const;
    void save(const std::string &path) const;
    static ScheduleTable load(const std::string &path);

    // Table tuned on the synthetic validation set shipped with the project.
    static const ScheduleTable &builtin();
};

// Schedule for one run: geometric t ladder from the table entry's t_hi
// down to t_lo_floor, constant rho and beta. n_iters of 0 keeps the
// table's value.
PnpSchedule default_schedule(const ScheduleTable &table, double snr_db, int n_iters = 0,
                             double t_lo_floor = 0.002);
PnpSchedule default_schedule(double snr_db, int n_iters = 0);

struct TuneGrid {
    std::vector<double> t_hi_list;
    std::vector<double> rho_list;
    std::vector<double> beta_list;
    int n_iters = 4;
};

struct TuneSetup {
    PilotConfig pilot;
    CgSettings cg;
    std::uint64_t seed = 0;
    int threads = 0;
    double t_lo_floor = 0.002;
};

// Exhaustive grid search minimizing mean linear NMSE over the validation
// samples; ties prefer the smaller rho. The same per-sample codebook and
// noise draws are reused for every grid point.
ScheduleEntry tune_schedule(const ChannelDataset &validation, double snr_db,
                            const TuneGrid &grid, const Denoiser &denoiser,
                            const TuneSetup &setup, double *best_nmse = nullptr);

} // namespace pnpcm

#endif
