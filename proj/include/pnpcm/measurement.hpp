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

#ifndef PNPCM_MEASUREMENT_HPP
#define PNPCM_MEASUREMENT_HPP

#include <string>

#include "pnpcm/channel.hpp"
#include "pnpcm/linalg.hpp"
#include "pnpcm/rng.hpp"

namespace pnpcm {

struct PilotConfig {
    int m_t = 1;              // transmit scans
    int m_r = 1;              // receive scans
    int n_rf = 1;             // receive RF chains
    int phase_bits = 4;       // codebook phase quantization
    double pilot_amplitude = 1.0;

    int measurements() const { return m_t * m_r * n_rf; }
    void validate(int n_t, int n_r) const;
};

struct Codebooks {
    MatC x_p;  // N_t x M_t transmit pilots
    MatC w_rf; // N_r x (M_r * N_rf) combiner columns
};

// Constant-modulus columns with phases drawn uniformly from the
// 2^phase_bits grid. X_p entries have magnitude pilot_amplitude/sqrt(N_t),
// W_RF entries 1/sqrt(N_r).
Codebooks generate_codebooks(Rng &rng, const PilotConfig &config, int n_t, int n_r);

// Equivalent measurement operator A = (X_p^T conj(F_t)) (x) (W_RF^H F_r),
// stored by its two Kronecker factors and applied matrix-free via
// vec(R X L^T) with column-major vec.
class MeasurementOperator {
  public:
    MeasurementOperator() = default;
    MeasurementOperator(MatC left_factor, MatC right_factor)
        : left_(std::move(left_factor)), right_(std::move(right_factor)) {}

    Eigen::Index rows() const { return left_.rows() * right_.rows(); }
    Eigen::Index cols() const { return left_.cols() * right_.cols(); }

    const MatC &left_factor() const { return left_; }
    const MatC &right_factor() const { return right_; }

    VecC apply(const VecC &h) const;
    VecC adjoint_apply(const VecC &v) const;

    // Dense materialization, for small-dimension oracles only.
    MatC dense() const;

  private:
    MatC left_;  // M_t x N_t
    MatC right_; // (M_r * N_rf) x N_r
};

MeasurementOperator assemble_operator(const MatC &x_p, const MatC &w_rf, const DftDictionary &f_t,
                                      const DftDictionary &f_r);

struct Observation {
    VecC y;
    double snr_db = 0.0;
    double noise_var = 0.0; // per complex entry
    std::string truth_ref;

    void save(const std::string &path, const PilotConfig &config, std::uint64_t seed) const;
    static Observation load(const std::string &path, PilotConfig *config = nullptr,
                            std::uint64_t *seed = nullptr);
};

// y = A h + n with per-entry noise variance (|A h|^2 / M) * 10^(-snr/10).
// An infinite snr_db yields the noiseless observation.
Observation observe(const MeasurementOperator &op, const VecC &h_true, double snr_db, Rng &rng);

// Balanced scan split: the receive side takes round(N_r * sqrt(alpha))
// observation columns, then M_t is chosen to land the total count closest
// to the target ratio.
PilotConfig search_pilot_config(double target_alpha, int n_t, int n_r, int n_rf = 1);

} // namespace pnpcm

#endif
