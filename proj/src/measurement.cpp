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

#include "pnpcm/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pnpcm/container.hpp"

namespace pnpcm {

void PilotConfig::validate(int n_t, int n_r) const {
    require(m_t >= 1 && m_t <= n_t, errc::invalid_argument, "m_t out of [1, N_t]");
    require(n_rf >= 1, errc::invalid_argument, "n_rf must be positive");
    require(m_r >= 1 && m_r * n_rf <= n_r, errc::invalid_argument, "m_r*n_rf out of [1, N_r]");
    require(phase_bits >= 1 && phase_bits <= 16, errc::invalid_argument,
            "phase_bits out of [1, 16]");
    require(pilot_amplitude > 0.0, errc::invalid_argument, "pilot amplitude must be positive");
}

namespace {
MatC quantized_phase_matrix(Rng &rng, int rows, int cols, int bits, double magnitude) {
    const std::uint64_t levels = 1ULL << bits;
    const double step = 2.0 * std::numbers::pi / static_cast<double>(levels);
    MatC m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r)
            m(r, c) = std::polar(magnitude, step * static_cast<double>(rng.uniform_int(levels)));
    return m;
}
} // namespace

Codebooks generate_codebooks(Rng &rng, const PilotConfig &config, int n_t, int n_r) {
    config.validate(n_t, n_r);
    Codebooks cb;
    cb.x_p = quantized_phase_matrix(rng, n_t, config.m_t, config.phase_bits,
                                    config.pilot_amplitude / std::sqrt(static_cast<double>(n_t)));
    cb.w_rf = quantized_phase_matrix(rng, n_r, config.m_r * config.n_rf, config.phase_bits,
                                     1.0 / std::sqrt(static_cast<double>(n_r)));
    return cb;
}

MeasurementOperator assemble_operator(const MatC &x_p, const MatC &w_rf, const DftDictionary &f_t,
                                      const DftDictionary &f_r) {
    require(x_p.rows() == f_t.matrix.rows(), errc::dimension_mismatch,
            "assemble_operator: X_p rows != N_t");
    require(w_rf.rows() == f_r.matrix.rows(), errc::dimension_mismatch,
            "assemble_operator: W_RF rows != N_r");
    MatC left = x_p.transpose() * f_t.matrix.conjugate();
    MatC right = w_rf.adjoint() * f_r.matrix;
    return MeasurementOperator(std::move(left), std::move(right));
}

VecC MeasurementOperator::apply(const VecC &h) const {
    require(h.size() == cols(), errc::dimension_mismatch,
            "apply: vector length " + std::to_string(h.size()) + " != " + std::to_string(cols()));
    MatC x = unvec(h, right_.cols(), left_.cols());
    MatC y = right_ * x * left_.transpose();
    return vec(y);
}

VecC MeasurementOperator::adjoint_apply(const VecC &v) const {
    require(v.size() == rows(), errc::dimension_mismatch,
            "adjoint_apply: vector length " + std::to_string(v.size()) +
                " != " + std::to_string(rows()));
    MatC x = unvec(v, right_.rows(), left_.rows());
    MatC y = right_.adjoint() * x * left_.conjugate();
    return vec(y);
}

MatC MeasurementOperator::dense() const {
    require(cols() <= 4096, errc::dimension_mismatch,
            "dense(): refusing to materialize operator with N > 4096");
    MatC a(rows(), cols());
    for (Eigen::Index lc = 0; lc < left_.cols(); ++lc)
        for (Eigen::Index lr = 0; lr < left_.rows(); ++lr)
            a.block(lr * right_.rows(), lc * right_.cols(), right_.rows(), right_.cols()) =
                left_(lr, lc) * right_;
    return a;
}

Observation observe(const MeasurementOperator &op, const VecC &h_true, double snr_db, Rng &rng) {
    Observation obs;
    obs.snr_db = snr_db;
    obs.y = op.apply(h_true);
    if (std::isinf(snr_db) && snr_db > 0.0) {
        obs.noise_var = 0.0;
        return obs;
    }
    require(std::isfinite(snr_db), errc::invalid_argument, "snr_db must be finite or +inf");
    const double signal_energy = obs.y.squaredNorm();
    require(signal_energy > 0.0, errc::zero_signal,
            "observe: zero signal energy with finite SNR");
    obs.noise_var =
        signal_energy / static_cast<double>(obs.y.size()) * std::pow(10.0, -snr_db / 10.0);
    for (Eigen::Index i = 0; i < obs.y.size(); ++i)
        obs.y[i] += rng.cnormal(obs.noise_var);
    return obs;
}

void Observation::save(const std::string &path, const PilotConfig &config,
                       std::uint64_t seed) const {
    ContainerWriter w;
    w.meta["kind"] = "observation";
    w.meta["format_version"] = 1;
    w.meta["snr_db"] = std::isinf(snr_db) ? nlohmann::json("inf") : nlohmann::json(snr_db);
    w.meta["noise_var"] = noise_var;
    w.meta["m_t"] = config.m_t;
    w.meta["m_r"] = config.m_r;
    w.meta["n_rf"] = config.n_rf;
    w.meta["phase_bits"] = config.phase_bits;
    w.meta["pilot_amplitude"] = config.pilot_amplitude;
    w.meta["seed"] = seed;
    w.meta["sample_id"] = truth_ref;
    std::vector<double> blob;
    blob.reserve(2 * y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        blob.push_back(y[i].real());
        blob.push_back(y[i].imag());
    }
    w.add_f64("y", blob.data(), blob.size());
    w.write(path);
}

Observation Observation::load(const std::string &path, PilotConfig *config, std::uint64_t *seed) {
    ContainerReader r(path);
    const auto &m = r.meta();
    require(m.value("kind", "") == "observation", errc::parse_error,
            "not an observation bundle: " + path);
    require(m.value("format_version", 0) == 1, errc::version_mismatch,
            "unsupported observation format version in " + path);
    Observation obs;
    if (m["snr_db"].is_string())
        obs.snr_db = std::numeric_limits<double>::infinity();
    else
        obs.snr_db = m["snr_db"];
    obs.noise_var = m["noise_var"];
    obs.truth_ref = m.value("sample_id", "");
    auto blob = r.read_f64("y");
    obs.y.resize(static_cast<Eigen::Index>(blob.size() / 2));
    for (Eigen::Index i = 0; i < obs.y.size(); ++i)
        obs.y[i] = cxd(blob[2 * i], blob[2 * i + 1]);
    if (config) {
        config->m_t = m["m_t"];
        config->m_r = m["m_r"];
        config->n_rf = m["n_rf"];
        config->phase_bits = m.value("phase_bits", 4);
        config->pilot_amplitude = m.value("pilot_amplitude", 1.0);
    }
    if (seed)
        *seed = m.value<std::uint64_t>("seed", 0);
    return obs;
}

static PilotConfig search_pilot_config_impl(double target_alpha, int n_t, int n_r, int n_rf) {
    const double n = static_cast<double>(n_t) * n_r;
    // Receive side first: m_r*n_rf observation columns approximate the
    // balanced split N_r*sqrt(alpha), then m_t lands the product on target.
    long receive_cols = std::lround(n_r * std::sqrt(target_alpha) / n_rf) * n_rf;
    receive_cols = std::clamp<long>(receive_cols, n_rf, n_r - (n_r % n_rf));
    long m_r = receive_cols / n_rf;
    long m_t = std::lround(target_alpha * n / static_cast<double>(receive_cols));
    m_t = std::clamp<long>(m_t, 1, n_t);

    PilotConfig cfg;
    cfg.m_t = static_cast<int>(m_t);
    cfg.m_r = static_cast<int>(m_r);
    cfg.n_rf = n_rf;
    return cfg;
}

PilotConfig search_pilot_config(double target_alpha, int n_t, int n_r, int n_rf) {
    require(target_alpha > 0.0 && target_alpha <= 1.0, errc::invalid_argument,
            "target pilot ratio must lie in (0, 1]");
    require(n_t >= 1 && n_r >= 1 && n_rf >= 1 && n_rf <= n_r, errc::invalid_argument,
            "invalid array/RF dimensions");
    PilotConfig cfg = search_pilot_config_impl(target_alpha, n_t, n_r, n_rf);
    cfg.validate(n_t, n_r);
    return cfg;
}

} // namespace pnpcm
