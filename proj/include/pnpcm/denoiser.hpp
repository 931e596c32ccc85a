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

#ifndef PNPCM_DENOISER_HPP
#define PNPCM_DENOISER_HPP

#include <atomic>
#include <memory>

#include "pnpcm/cm.hpp"
#include "pnpcm/linalg.hpp"
#include "pnpcm/nn.hpp"

namespace pnpcm {

// Lossless bridge between a length-N complex vector and the 2 x n_r x n_t
// real tensor the CM consumes: column-major unvec, channel 0 real part,
// channel 1 imaginary part.
nn::Tensor<double> complex_to_channels(const VecC &v, int n_r, int n_t);
VecC channels_to_complex(const nn::Tensor<double> &s);

// Uniform denoiser handle used by the PnP loop. Handles are immutable and
// cheap to copy; denoise() is reentrant.
class Denoiser {
  public:
    enum class Kind { cm, identity, soft_threshold, oracle };

    static Denoiser identity();
    static Denoiser soft_threshold(double lambda);
    static Denoiser oracle(VecC h_true);
    static Denoiser cm(std::shared_ptr<const ConsistencyModel> model);

    Kind kind() const { return kind_; }

    // kind=cm evaluates the model on the rescaled two-channel tensor with
    // the noise level clamped into the trained interval; clamp events are
    // counted and retrievable via clamp_count().
    VecC denoise(const VecC &v, double t) const;

    std::uint64_t clamp_count() const { return clamps_ ? clamps_->load() : 0; }

  private:
    Denoiser(Kind kind) : kind_(kind) {}

    Kind kind_;
    double lambda_ = 0.0;
    VecC h_true_;
    std::shared_ptr<const ConsistencyModel> model_;
    std::shared_ptr<std::atomic<std::uint64_t>> clamps_;
};

Denoiser::Kind parse_denoiser_kind(const std::string &name);
const char *denoiser_kind_name(Denoiser::Kind kind);

} // namespace pnpcm

#endif
