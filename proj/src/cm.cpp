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

#include "pnpcm/cm.hpp"

#include <cmath>
#include <fstream>

#include "pnpcm/cm_loss.hpp"
#include "pnpcm/container.hpp"
#include "pnpcm/parallel.hpp"

namespace pnpcm {

namespace {
int doubling_stages(const CmConfig &cfg) {
    int stages = 1;
    int v = cfg.s0;
    while (2LL * v <= cfg.s1) {
        v *= 2;
        ++stages;
    }
    return stages;
}
} // namespace

void CmConfig::validate() const {
    require(sigma_data > 0.0, errc::invalid_argument, "sigma_data must be positive");
    require(epsilon > 0.0 && epsilon < t_max, errc::invalid_argument,
            "need 0 < epsilon < t_max");
    require(rho_grid >= 1.0, errc::invalid_argument, "rho_grid must be >= 1");
    require(s0 >= 2 && s0 <= s1, errc::invalid_argument, "need 2 <= s0 <= s1");
    require(huber_c > 0.0, errc::invalid_argument, "huber_c must be positive");
    require(lr > 0.0, errc::invalid_argument, "lr must be positive");
    require(batch >= 1, errc::invalid_argument, "batch must be positive");
    require(steps >= doubling_stages(*this), errc::invalid_argument,
            "steps must cover every discretization stage");
    require(ema_decay >= 0.0 && ema_decay < 1.0, errc::invalid_argument,
            "ema_decay must lie in [0, 1)");
    require(loss_weighting == "none" || loss_weighting == "inverse_dt", errc::invalid_argument,
            "loss_weighting must be 'none' or 'inverse_dt'");
    require(test_fraction >= 0.0 && test_fraction < 1.0, errc::invalid_argument,
            "test_fraction must lie in [0, 1)");
    require(eval_interval >= 1, errc::invalid_argument, "eval_interval must be positive");
    require(backbone.in_channels == 2, errc::invalid_argument,
            "backbone must take a 2-channel input");
}

CmConfig CmConfig::preset(const std::string &name) {
    CmConfig cfg;
    if (name == "desk")
        return cfg;
    if (name == "paper") {
        cfg.backbone.base_channels = 64;
        cfg.backbone.channel_mults = {1, 2, 2};
        cfg.backbone.blocks_per_level = 2;
        cfg.backbone.attention = {false, false, true};
        cfg.backbone.mid_attention = true;
        cfg.backbone.temb_dim = 256;
        cfg.backbone.gn_groups = 16;
        cfg.batch = 64;
        cfg.steps = 50000;
        return cfg;
    }
    if (name == "tiny") { // unit-test scale
        cfg.backbone.base_channels = 8;
        cfg.backbone.channel_mults = {1, 2};
        cfg.backbone.temb_dim = 16;
        cfg.backbone.gn_groups = 4;
        cfg.batch = 4;
        cfg.steps = 32;
        cfg.s1 = 40;
        return cfg;
    }
    fail(errc::invalid_argument, "unknown preset '" + name + "'");
}

void to_json(nlohmann::json &j, const CmConfig &c) {
    j = nlohmann::json{{"sigma_data", c.sigma_data},
                       {"epsilon", c.epsilon},
                       {"t_max", c.t_max},
                       {"rho_grid", c.rho_grid},
                       {"s0", c.s0},
                       {"s1", c.s1},
                       {"huber_c", c.huber_c},
                       {"lr", c.lr},
                       {"batch", c.batch},
                       {"steps", c.steps},
                       {"ema_decay", c.ema_decay},
                       {"loss_weighting", c.loss_weighting},
                       {"test_fraction", c.test_fraction},
                       {"eval_interval", c.eval_interval},
                       {"threads", c.threads},
                       {"init_seed", c.init_seed},
                       {"backbone",
                        {{"in_channels", c.backbone.in_channels},
                         {"base_channels", c.backbone.base_channels},
                         {"channel_mults", c.backbone.channel_mults},
                         {"blocks_per_level", c.backbone.blocks_per_level},
                         {"attention", c.backbone.attention},
                         {"mid_attention", c.backbone.mid_attention},
                         {"temb_dim", c.backbone.temb_dim},
                         {"gn_groups", c.backbone.gn_groups},
                         {"time_scale", c.backbone.time_scale}}}};
}

void from_json(const nlohmann::json &j, CmConfig &c) {
    CmConfig base;
    if (j.contains("preset"))
        base = CmConfig::preset(j["preset"].get<std::string>());
    c = base;
    c.sigma_data = j.value("sigma_data", c.sigma_data);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.t_max = j.value("t_max", c.t_max);
    c.rho_grid = j.value("rho_grid", c.rho_grid);
    c.s0 = j.value("s0", c.s0);
    c.s1 = j.value("s1", c.s1);
    c.huber_c = j.value("huber_c", c.huber_c);
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.steps = j.value("steps", c.steps);
    c.ema_decay = j.value("ema_decay", c.ema_decay);
    c.loss_weighting = j.value("loss_weighting", c.loss_weighting);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.threads = j.value("threads", c.threads);
    c.init_seed = j.value<std::uint64_t>("init_seed", c.init_seed);
    if (j.contains("backbone")) {
        const auto &b = j["backbone"];
        c.backbone.in_channels = b.value("in_channels", c.backbone.in_channels);
        c.backbone.base_channels = b.value("base_channels", c.backbone.base_channels);
        c.backbone.channel_mults =
            b.value("channel_mults", c.backbone.channel_mults);
        c.backbone.blocks_per_level = b.value("blocks_per_level", c.backbone.blocks_per_level);
        c.backbone.attention = b.value("attention", c.backbone.attention);
        c.backbone.mid_attention = b.value("mid_attention", c.backbone.mid_attention);
        c.backbone.temb_dim = b.value("temb_dim", c.backbone.temb_dim);
        c.backbone.gn_groups = b.value("gn_groups", c.backbone.gn_groups);
        c.backbone.time_scale = b.value("time_scale", c.backbone.time_scale);
    }
}

std::vector<double> noise_grid(const CmConfig &config, int k) {
    require(k >= 2, errc::invalid_argument, "noise_grid: k must be >= 2");
    const double inv_rho = 1.0 / config.rho_grid;
    const double lo = std::pow(config.epsilon, inv_rho);
    const double hi = std::pow(config.t_max, inv_rho);
    std::vector<double> grid(k);
    grid.front() = config.epsilon;
    grid.back() = config.t_max;
    for (int i = 1; i + 1 < k; ++i)
        grid[i] = std::pow(lo + static_cast<double>(i) / (k - 1) * (hi - lo), config.rho_grid);
    return grid;
}

int discretization_schedule(const CmConfig &config, int step, int total_steps) {
    require(step >= 0 && step < total_steps, errc::invalid_argument,
            "discretization_schedule: step out of range");
    const int stages = doubling_stages(config);
    const long long e = std::min<long long>(
        stages - 1, static_cast<long long>(step) * stages / total_steps);
    if (e == stages - 1)
        return config.s1;
    return std::min(config.s1, config.s0 << e);
}

ConsistencyModel::ConsistencyModel(const CmConfig &config, int n_r, int n_t, double norm_scale)
    : cfg_(config), n_r_(n_r), n_t_(n_t), norm_scale_(norm_scale),
      net_(config.backbone, config.init_seed), ema_net_(config.backbone, config.init_seed) {
    cfg_.validate();
    require(n_r >= 1 && n_t >= 1, errc::invalid_argument, "model dims must be positive");
    require(norm_scale > 0.0, errc::invalid_argument, "norm_scale must be positive");
}

double ConsistencyModel::c_skip(double t) const { return cm_c_skip(cfg_, t); }
double ConsistencyModel::c_out(double t) const { return cm_c_out(cfg_, t); }
double ConsistencyModel::c_in(double t) const { return cm_c_in(cfg_, t); }

nn::Tensor<float> ConsistencyModel::forward(const nn::Tensor<float> &x, double t,
                                            bool use_ema) const {
    require(t >= cfg_.epsilon && t <= cfg_.t_max, errc::noise_level_out_of_range,
            "noise level " + std::to_string(t) + " outside [" + std::to_string(cfg_.epsilon) +
                ", " + std::to_string(cfg_.t_max) + "]");
    typename nn::UNet<float>::Cache cache;
    nn::Workspace<float> ws;
    const nn::UNet<float> &net = use_ema ? ema_net_ : net_;
    return cm_forward_impl(net, cfg_, x, t, cache, ws);
}

void ConsistencyModel::save_checkpoint(const std::string &path) const {
    ContainerWriter w;
    w.meta["kind"] = "cm_checkpoint";
    w.meta["format_version"] = 1;
    nlohmann::json cfg_json;
    to_json(cfg_json, cfg_);
    w.meta["config"] = cfg_json;
    w.meta["n_r"] = n_r_;
    w.meta["n_t"] = n_t_;
    w.meta["norm_scale"] = norm_scale_;
    auto manifest = nlohmann::json::array();
    for (const auto &e : net_.store.entries)
        manifest.push_back({{"name", e.name}, {"shape", e.shape}, {"count", e.count}});
    w.meta["params"] = manifest;
    w.add_f32("online", net_.store.w.data(), net_.store.w.size());
    w.add_f32("ema", ema_net_.store.w.data(), ema_net_.store.w.size());
    w.write(path);
}

std::shared_ptr<ConsistencyModel> ConsistencyModel::load_checkpoint(const std::string &path,
                                                                    int expected_n_r,
                                                                    int expected_n_t) {
    std::shared_ptr<ContainerReader> reader;
    try {
        reader = std::make_shared<ContainerReader>(path);
    } catch (const Error &e) {
        if (e.code() == errc::io_error)
            throw;
        fail(errc::corrupt_checkpoint, std::string("cannot read checkpoint: ") + e.what());
    }
    const auto &m = reader->meta();
    try {
        require(m.value("kind", "") == "cm_checkpoint", errc::corrupt_checkpoint,
                "not a CM checkpoint: " + path);
        require(m.value("format_version", -1) == 1, errc::version_mismatch,
                "unsupported checkpoint format version in " + path);
        const int n_r = m.at("n_r"), n_t = m.at("n_t");
        if (expected_n_r > 0 || expected_n_t > 0)
            require(n_r == expected_n_r && n_t == expected_n_t, errc::version_mismatch,
                    "checkpoint trained for " + std::to_string(n_r) + "x" + std::to_string(n_t) +
                        ", expected " + std::to_string(expected_n_r) + "x" +
                        std::to_string(expected_n_t));
        CmConfig cfg;
        from_json(m.at("config"), cfg);
        auto model = std::make_shared<ConsistencyModel>(cfg, n_r, n_t,
                                                        m.at("norm_scale").get<double>());
        const auto &manifest = m.at("params");
        require(manifest.size() == model->net_.store.entries.size(), errc::corrupt_checkpoint,
                "checkpoint parameter manifest does not match the configured backbone");
        for (std::size_t i = 0; i < manifest.size(); ++i) {
            const auto &e = model->net_.store.entries[i];
            require(manifest[i].at("name") == e.name &&
                        manifest[i].at("count").get<std::size_t>() == e.count,
                    errc::corrupt_checkpoint, "parameter manifest mismatch at " + e.name);
        }
        auto online = reader->read_f32("online");
        auto ema = reader->read_f32("ema");
        require(online.size() == model->net_.store.w.size() &&
                    ema.size() == model->ema_net_.store.w.size(),
                errc::corrupt_checkpoint, "parameter blob size mismatch");
        model->net_.store.w.assign(online.begin(), online.end());
        model->ema_net_.store.w.assign(ema.begin(), ema.end());
        return model;
    } catch (const nlohmann::json::exception &e) {
        fail(errc::corrupt_checkpoint, std::string("checkpoint header: ") + e.what());
    }
}

namespace {

// Rectified Adam over the flat parameter array.
class RAdam {
  public:
    RAdam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0f), v_(n, 0.0f) {}

    void step(nn::AVec<float> &w, const nn::AVec<float> &g) {
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double b1t = std::pow(b1, t_), b2t = std::pow(b2, t_);
        const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
        const double rho_t = rho_inf - 2.0 * t_ * b2t / (1.0 - b2t);
        double rect = 0.0;
        const bool rectified = rho_t > 4.0;
        if (rectified)
            rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                             ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
        const float a1 = static_cast<float>(1.0 - b1), a2 = static_cast<float>(1.0 - b2);
        for (std::size_t i = 0; i < w.size(); ++i) {
            m_[i] = static_cast<float>(b1) * m_[i] + a1 * g[i];
            v_[i] = static_cast<float>(b2) * v_[i] + a2 * g[i] * g[i];
            const double mhat = m_[i] / (1.0 - b1t);
            if (rectified) {
                const double vhat = std::sqrt(v_[i] / (1.0 - b2t));
                w[i] -= static_cast<float>(lr_ * rect * mhat / (vhat + eps));
            } else {
                w[i] -= static_cast<float>(lr_ * mhat);
            }
        }
    }

  private:
    double lr_;
    long t_ = 0;
    std::vector<float> m_, v_;
};

nn::Tensor<float> to_training_tensor(const MatC &angular, double scale) {
    nn::Tensor<float> t(2, static_cast<int>(angular.rows()), static_cast<int>(angular.cols()));
    for (int r = 0; r < t.h; ++r)
        for (int c = 0; c < t.w; ++c) {
            t.at(0, r, c) = static_cast<float>(angular(r, c).real() * scale);
            t.at(1, r, c) = static_cast<float>(angular(r, c).imag() * scale);
        }
    return t;
}

} // namespace

TrainResult train_consistency_model(const ChannelDataset &dataset, const CmConfig &config,
                                    std::uint64_t seed,
                                    const std::function<void(const TracePoint &)> &on_step) {
    config.validate();
    require(!dataset.samples.empty(), errc::invalid_argument, "training dataset is empty");

    const int n_r = dataset.n_r();
    const int n_t = dataset.n_t();

    // Normalization: per-entry RMS of the two-channel representation is
    // brought to sigma_data.
    double sq = 0.0;
    for (const auto &s : dataset.samples)
        sq += s.angular.squaredNorm();
    const double rms =
        std::sqrt(sq / (2.0 * dataset.samples.size() * static_cast<double>(n_r) * n_t));
    require(rms > 0.0, errc::invalid_argument, "training dataset has zero energy");
    const double scale = config.sigma_data / rms;

    std::vector<nn::Tensor<float>> tensors;
    tensors.reserve(dataset.samples.size());
    for (const auto &s : dataset.samples)
        tensors.push_back(to_training_tensor(s.angular, scale));

    const std::size_t n_test =
        static_cast<std::size_t>(config.test_fraction * static_cast<double>(tensors.size()));
    const std::size_t n_train = tensors.size() - n_test;
    require(n_train >= 1, errc::invalid_argument, "no training samples after split");

    auto model = std::make_shared<ConsistencyModel>(config, n_r, n_t, scale);
    const std::size_t n_params = model->net().store.size();

    RAdam opt(n_params, config.lr);
    Rng master(seed);
    const int batch = config.batch;
    const int threads = resolve_threads(config.threads);

    std::vector<nn::AVec<float>> item_grads(batch, nn::AVec<float>(n_params, 0.0f));
    std::vector<double> item_losses(batch, 0.0);
    nn::AVec<float> grad(n_params, 0.0f);
    std::vector<TracePoint> trace;
    trace.reserve(config.steps);

    const int eval_batch = static_cast<int>(std::min<std::size_t>(n_test, 64));

    for (int step = 0; step < config.steps; ++step) {
        const int k = discretization_schedule(config, step, config.steps);
        const auto grid = noise_grid(config, k);

        parallel_for(0, batch, threads, [&](long b) {
            Rng rng = master.fork(static_cast<std::uint64_t>(step) * batch + b);
            const auto &x = tensors[rng.uniform_int(n_train)];
            nn::Tensor<float> z(x.c, x.h, x.w);
            for (auto &e : z.v)
                e = static_cast<float>(rng.normal());
            const int i = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k - 1)));
            std::fill(item_grads[b].begin(), item_grads[b].end(), 0.0f);
            nn::Workspace<float> ws;
            item_losses[b] = cm_pair_loss(model->net(), config, x, z, grid[i], grid[i + 1],
                                          &item_grads[b], ws);
        });

        double loss = 0.0;
        for (int b = 0; b < batch; ++b)
            loss += item_losses[b];
        loss /= batch;
        if (!std::isfinite(loss))
            fail(errc::non_finite, "training loss non-finite at step " + std::to_string(step) +
                                       " (k=" + std::to_string(k) + ")");

        std::fill(grad.begin(), grad.end(), 0.0f);
        const float inv_batch = 1.0f / static_cast<float>(batch);
        for (int b = 0; b < batch; ++b) {
            const auto &g = item_grads[b];
            for (std::size_t i = 0; i < n_params; ++i)
                grad[i] += g[i];
        }
        for (auto &g : grad)
            g *= inv_batch;

        opt.step(model->net().store.w, grad);

        const float decay = static_cast<float>(config.ema_decay);
        auto &ema = model->ema();
        const auto &w = model->net().store.w;
        for (std::size_t i = 0; i < n_params; ++i)
            ema[i] = decay * ema[i] + (1.0f - decay) * w[i];

        TracePoint point{step, loss, -1.0};
        const bool eval_now =
            eval_batch > 0 && (step % config.eval_interval == 0 || step == config.steps - 1);
        if (eval_now) {
            std::vector<double> test_losses(eval_batch, 0.0);
            Rng eval_rng = master.fork(0xEBA1000000000000ULL + static_cast<std::uint64_t>(step));
            parallel_for(0, eval_batch, threads, [&](long j) {
                Rng rng = eval_rng.fork(static_cast<std::uint64_t>(j));
                const auto &x = tensors[n_train + (j % n_test)];
                nn::Tensor<float> z(x.c, x.h, x.w);
                for (auto &e : z.v)
                    e = static_cast<float>(rng.normal());
                const int i =
                    static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k - 1)));
                nn::Workspace<float> ws;
                test_losses[j] = cm_pair_loss(model->net(), config, x, z, grid[i], grid[i + 1],
                                              static_cast<nn::AVec<float> *>(nullptr), ws);
            });
            double tl = 0.0;
            for (double v : test_losses)
                tl += v;
            point.test_loss = tl / eval_batch;
        }
        trace.push_back(point);
        if (on_step)
            on_step(point);
    }

    return {std::move(model), std::move(trace)};
}

void write_loss_trace_csv(const std::vector<TracePoint> &trace, const std::string &path) {
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open for writing: " + path);
    bool any_test = false;
    for (const auto &p : trace)
        if (p.test_loss >= 0.0)
            any_test = true;
    f << (any_test ? "step,train_loss,test_loss\n" : "step,train_loss\n");
    char buf[64];
    for (const auto &p : trace) {
        f << p.step << ',';
        std::snprintf(buf, sizeof(buf), "%.9g", p.train_loss);
        f << buf;
        if (any_test) {
            f << ',';
            if (p.test_loss >= 0.0) {
                std::snprintf(buf, sizeof(buf), "%.9g", p.test_loss);
                f << buf;
            }
        }
        f << '\n';
    }
}

} // namespace pnpcm
