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

#include "pnpcm/denoiser.hpp"

#include <algorithm>
#include <cmath>

namespace pnpcm {

nn::Tensor<double> complex_to_channels(const VecC &v, int n_r, int n_t) {
    require(v.size() == static_cast<Eigen::Index>(n_r) * n_t, errc::dimension_mismatch,
            "complex_to_channels: vector length != n_r*n_t");
    nn::Tensor<double> s(2, n_r, n_t);
    for (int c = 0; c < n_t; ++c)
        for (int r = 0; r < n_r; ++r) {
            const cxd e = v[static_cast<Eigen::Index>(c) * n_r + r];
            s.at(0, r, c) = e.real();
            s.at(1, r, c) = e.imag();
        }
    return s;
}

VecC channels_to_complex(const nn::Tensor<double> &s) {
    require(s.c == 2, errc::dimension_mismatch, "channels_to_complex: need 2 channels");
    VecC v(static_cast<Eigen::Index>(s.h) * s.w);
    for (int c = 0; c < s.w; ++c)
        for (int r = 0; r < s.h; ++r)
            v[static_cast<Eigen::Index>(c) * s.h + r] = cxd(s.at(0, r, c), s.at(1, r, c));
    return v;
}

Denoiser Denoiser::identity() { return Denoiser(Kind::identity); }

Denoiser Denoiser::soft_threshold(double lambda) {
    require(lambda >= 0.0, errc::invalid_argument, "soft threshold lambda must be >= 0");
    Denoiser d(Kind::soft_threshold);
    d.lambda_ = lambda;
    return d;
}

Denoiser Denoiser::oracle(VecC h_true) {
    Denoiser d(Kind::oracle);
    d.h_true_ = std::move(h_true);
    return d;
}

Denoiser Denoiser::cm(std::shared_ptr<const ConsistencyModel> model) {
    require(model != nullptr, errc::missing_checkpoint, "cm denoiser needs a loaded checkpoint");
    Denoiser d(Kind::cm);
    d.model_ = std::move(model);
    d.clamps_ = std::make_shared<std::atomic<std::uint64_t>>(0);
    return d;
}

VecC Denoiser::denoise(const VecC &v, double t) const {
    require(t >= 0.0, errc::invalid_argument, "denoise: t must be >= 0");
    switch (kind_) {
    case Kind::identity:
        return v;
    case Kind::oracle:
        require(h_true_.size() == v.size(), errc::shape_mismatch,
                "oracle denoiser holds a truth of different length");
        return h_true_;
    case Kind::soft_threshold: {
        const double thr = lambda_ * t;
        VecC out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double mag = std::abs(v[i]);
            out[i] = mag <= thr ? cxd(0.0, 0.0) : v[i] * ((mag - thr) / mag);
        }
        return out;
    }
    case Kind::cm: {
        const int n_r = model_->n_r(), n_t = model_->n_t();
        require(v.size() == static_cast<Eigen::Index>(n_r) * n_t, errc::shape_mismatch,
                "cm denoiser: vector length != checkpoint n_r*n_t");
        const double scale = model_->norm_scale();
        const CmConfig &cfg = model_->config();
        double t_scaled = t * scale;
        const double t_clamped = std::clamp(t_scaled, cfg.epsilon, cfg.t_max);
        if (t_clamped != t_scaled)
            clamps_->fetch_add(1, std::memory_order_relaxed);

        nn::Tensor<double> s = complex_to_channels(v * scale, n_r, n_t);
        nn::Tensor<float> xf(s.c, s.h, s.w);
        for (std::size_t i = 0; i < s.v.size(); ++i)
            xf.v[i] = static_cast<float>(s.v[i]);
        nn::Tensor<float> yf = model_->forward(xf, t_clamped, true);
        nn::Tensor<double> y(yf.c, yf.h, yf.w);
        for (std::size_t i = 0; i < y.v.size(); ++i)
            y.v[i] = static_cast<double>(yf.v[i]);
        return channels_to_complex(y) / scale;
    }
    }
    fail(errc::internal, "unreachable denoiser kind");
}

Denoiser::Kind parse_denoiser_kind(const std::string &name) {
    if (name == "cm")
        return Denoiser::Kind::cm;
    if (name == "identity")
        return Denoiser::Kind::identity;
    if (name == "soft")
        return Denoiser::Kind::soft_threshold;
    if (name == "oracle")
        return Denoiser::Kind::oracle;
    fail(errc::invalid_argument, "unknown denoiser kind '" + name + "'");
}

const char *denoiser_kind_name(Denoiser::Kind kind) {
    switch (kind) {
    case Denoiser::Kind::cm: return "cm";
    case Denoiser::Kind::identity: return "identity";
    case Denoiser::Kind::soft_threshold: return "soft";
    case Denoiser::Kind::oracle: return "oracle";
    }
    return "unknown";
}

} // namespace pnpcm
