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

#ifndef PNPCM_CM_HPP
#define PNPCM_CM_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnpcm/channel.hpp"
#include "pnpcm/nn.hpp"

namespace pnpcm {

struct CmConfig {
    double sigma_data = 0.02228;
    double epsilon = 0.002;  // boundary time
    double t_max = 0.13;
    double rho_grid = 7.0;   // noise-grid warp exponent
    int s0 = 10;             // initial discretization size
    int s1 = 640;            // final discretization size
    double huber_c = 0.0244; // Pseudo-Huber smoothing
    double lr = 1e-4;
    int batch = 16;
    int steps = 5000;
    double ema_decay = 0.9999;
    std::string loss_weighting = "inverse_dt"; // or "none"
    double test_fraction = 0.1;
    int eval_interval = 100;
    int threads = 0;
    std::uint64_t init_seed = 1;
    nn::UNetConfig backbone;

    void validate() const;

    // "desk" is the default training footprint; "paper" restores the
    // full-size attention backbone and the 50000-step recipe.
    static CmConfig preset(const std::string &name);
};

void to_json(nlohmann::json &j, const CmConfig &c);
void from_json(const nlohmann::json &j, CmConfig &c);

// Karras-style warped grid: t_i = (eps^(1/rho) + (i-1)/(k-1) *
// (T^(1/rho) - eps^(1/rho)))^rho for i = 1..k; endpoints are exact.
std::vector<double> noise_grid(const CmConfig &config, int k);

// Doubling schedule from s0 to s1 with milestones uniform in training steps.
int discretization_schedule(const CmConfig &config, int step, int total_steps);

class ConsistencyModel {
  public:
    ConsistencyModel(const CmConfig &config, int n_r, int n_t, double norm_scale);

    const CmConfig &config() const { return cfg_; }
    int n_r() const { return n_r_; }
    int n_t() const { return n_t_; }
    // Multiplier bringing raw channel entries to the trained scale.
    double norm_scale() const { return norm_scale_; }
    std::size_t param_count() const { return net_.store.size(); }

    double c_skip(double t) const;
    double c_out(double t) const;
    double c_in(double t) const;

    // f(x, t) = c_skip(t) x + c_out(t) F(c_in(t) x, t); identity at t = eps.
    // Throws NoiseLevelOutOfRange for t outside [eps, t_max].
    nn::Tensor<float> forward(const nn::Tensor<float> &x, double t, bool use_ema = true) const;

    nn::UNet<float> &net() { return net_; }
    const nn::UNet<float> &net() const { return net_; }
    // EMA weights live in a twin network so that either parameter set can
    // run the same forward path.
    nn::AVec<float> &ema() { return ema_net_.store.w; }
    const nn::AVec<float> &ema() const { return ema_net_.store.w; }

    void set_norm_scale(double s) { norm_scale_ = s; }

    void save_checkpoint(const std::string &path) const;
    // expected_n_r/n_t of 0 accept any stored shape.
    static std::shared_ptr<ConsistencyModel> load_checkpoint(const std::string &path,
                                                             int expected_n_r = 0,
                                                             int expected_n_t = 0);

  private:
    CmConfig cfg_;
    int n_r_, n_t_;
    double norm_scale_;
    nn::UNet<float> net_;     // online parameters
    nn::UNet<float> ema_net_; // EMA parameters
};

struct TracePoint {
    int step = 0;
    double train_loss = 0.0;
    double test_loss = -1.0; // < 0 when not evaluated at this step
};

struct TrainResult {
    std::shared_ptr<ConsistencyModel> model;
    std::vector<TracePoint> trace;
};

// Independent consistency training on the angular-domain samples of the
// dataset. Channels are rescaled so the per-entry RMS equals sigma_data;
// the scale is stored in the model and its checkpoints.
TrainResult train_consistency_model(const ChannelDataset &dataset, const CmConfig &config,
                                    std::uint64_t seed,
                                    const std::function<void(const TracePoint &)> &on_step = {});

void write_loss_trace_csv(const std::vector<TracePoint> &trace, const std::string &path);

} // namespace pnpcm

#endif
