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
//
// Scalar-generic consistency-training objective. The float instantiation
// drives training; the double instantiation backs finite-difference
// gradient checks over the identical code path.

#ifndef PNPCM_CM_LOSS_HPP
#define PNPCM_CM_LOSS_HPP

#include "pnpcm/cm.hpp"
#include "pnpcm/nn.hpp"

namespace pnpcm {

inline double cm_c_skip(const CmConfig &cfg, double t) {
    const double d = t - cfg.epsilon;
    return cfg.sigma_data * cfg.sigma_data / (d * d + cfg.sigma_data * cfg.sigma_data);
}

inline double cm_c_out(const CmConfig &cfg, double t) {
    const double d = t - cfg.epsilon;
    return cfg.sigma_data * d / std::sqrt(cfg.sigma_data * cfg.sigma_data + t * t);
}

inline double cm_c_in(const CmConfig &cfg, double t) {
    return 1.0 / std::sqrt(cfg.sigma_data * cfg.sigma_data + t * t);
}

// f(x, t) = c_skip(t) x + c_out(t) F(c_in(t) x, t)
template <typename S>
nn::Tensor<S> cm_forward_impl(const nn::UNet<S> &net, const CmConfig &cfg,
                              const nn::Tensor<S> &x, double t,
                              typename nn::UNet<S>::Cache &cache, nn::Workspace<S> &ws) {
    const S cin = static_cast<S>(cm_c_in(cfg, t));
    const S cskip = static_cast<S>(cm_c_skip(cfg, t));
    const S cout = static_cast<S>(cm_c_out(cfg, t));

    nn::Tensor<S> xin = x;
    for (auto &e : xin.v)
        e *= cin;
    nn::Tensor<S> f = net.forward(xin, t, cache, ws);
    for (std::size_t i = 0; i < f.v.size(); ++i)
        f.v[i] = cskip * x.v[i] + cout * f.v[i];
    return f;
}

// One consistency-training pair: shared clean sample x and noise z, adjacent
// levels t_lo < t_hi on the current grid. The target branch at t_lo carries
// no gradient. Returns the (optionally 1/dt-weighted) Pseudo-Huber loss and
// accumulates parameter gradients when grad != nullptr.
template <typename S>
double cm_pair_loss(const nn::UNet<S> &net, const CmConfig &cfg, const nn::Tensor<S> &x,
                    const nn::Tensor<S> &z, double t_lo, double t_hi, nn::AVec<S> *grad,
                    nn::Workspace<S> &ws) {
    nn::Tensor<S> x_lo = x, x_hi = x;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        x_lo.v[i] += static_cast<S>(t_lo) * z.v[i];
        x_hi.v[i] += static_cast<S>(t_hi) * z.v[i];
    }

    typename nn::UNet<S>::Cache target_cache;
    nn::Tensor<S> target = cm_forward_impl(net, cfg, x_lo, t_lo, target_cache, ws);

    typename nn::UNet<S>::Cache cache;
    nn::Tensor<S> out = cm_forward_impl(net, cfg, x_hi, t_hi, cache, ws);

    double l2 = 0.0;
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        const double d = static_cast<double>(out.v[i]) - static_cast<double>(target.v[i]);
        l2 += d * d;
    }
    const double weight = cfg.loss_weighting == "inverse_dt" ? 1.0 / (t_hi - t_lo) : 1.0;
    const double root = std::sqrt(l2 + cfg.huber_c * cfg.huber_c);
    const double loss = weight * (root - cfg.huber_c);

    if (grad != nullptr) {
        const double cout_hi = cm_c_out(cfg, t_hi);
        const S coeff = static_cast<S>(weight / root * cout_hi);
        nn::Tensor<S> df(out.c, out.h, out.w);
        for (std::size_t i = 0; i < df.v.size(); ++i)
            df.v[i] = coeff * (out.v[i] - target.v[i]);
        net.backward(df, cache, *grad, ws);
    }
    return loss;
}

} // namespace pnpcm

#endif
