#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pnpcm/cm.hpp"
#include "pnpcm/cm_loss.hpp"

using namespace pnpcm;

namespace {

ChannelDataset tiny_dataset(int count, std::uint64_t seed) {
    Rng rng(seed);
    DatasetGenConfig cfg;
    cfg.tx = {4, 2, 0.5}; // n_t = 8 -> tensor width 8
    cfg.rx = {2, 2, 0.5}; // n_r = 4 -> tensor height 4
    cfg.paths.l_max = 3;
    cfg.count = count;
    return generate_dataset(rng, cfg);
}

std::string tmp_file(const std::string &name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("noise_grid: k=2 gives the exact interval endpoints") {
    CmConfig cfg;
    auto g = noise_grid(cfg, 2);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == 0.002);
    CHECK(g[1] == 0.13);
}

TEST_CASE("noise_grid: strictly increasing with exact endpoints") {
    CmConfig cfg;
    for (int k : {3, 10, 64, 640}) {
        auto g = noise_grid(cfg, k);
        REQUIRE(static_cast<int>(g.size()) == k);
        CHECK(g.front() == cfg.epsilon);
        CHECK(g.back() == cfg.t_max);
        for (int i = 1; i < k; ++i)
            CHECK(g[i] > g[i - 1]);
    }
    CHECK_THROWS_AS(noise_grid(cfg, 1), Error);
}

TEST_CASE("noise_grid: rho_grid=1 reduces to uniform spacing") {
    CmConfig cfg;
    cfg.rho_grid = 1.0;
    const int k = 10;
    auto g = noise_grid(cfg, k);
    for (int i = 0; i < k; ++i) {
        const double expect = cfg.epsilon + (cfg.t_max - cfg.epsilon) * i / (k - 1);
        CHECK(std::abs(g[i] - expect) < 1e-14);
    }
}

TEST_CASE("discretization_schedule: endpoints, monotonicity, doubling values") {
    CmConfig cfg; // s0=10, s1=640
    const int total = 5000;
    CHECK(discretization_schedule(cfg, 0, total) == 10);
    CHECK(discretization_schedule(cfg, total - 1, total) == 640);
    int prev = 0;
    for (int step = 0; step < total; ++step) {
        const int k = discretization_schedule(cfg, step, total);
        CHECK(k >= prev);
        CHECK((k == 10 || k == 20 || k == 40 || k == 80 || k == 160 || k == 320 || k == 640));
        prev = k;
    }
    CHECK_THROWS_AS(discretization_schedule(cfg, total, total), Error);
}

TEST_CASE("cm config: presets validate; json round trip") {
    for (const char *name : {"desk", "paper", "tiny"}) {
        CmConfig cfg = CmConfig::preset(name);
        cfg.validate();
        nlohmann::json j;
        to_json(j, cfg);
        CmConfig back;
        from_json(j, back);
        CHECK(back.sigma_data == cfg.sigma_data);
        CHECK(back.steps == cfg.steps);
        CHECK(back.backbone.base_channels == cfg.backbone.base_channels);
        CHECK(back.backbone.channel_mults == cfg.backbone.channel_mults);
    }
    CHECK_THROWS_AS(CmConfig::preset("nope"), Error);
}

TEST_CASE("cm forward: boundary condition is exact at epsilon, before training") {
    CmConfig cfg = CmConfig::preset("tiny");
    ConsistencyModel model(cfg, 4, 8, 1.0);
    CHECK(model.c_skip(cfg.epsilon) == 1.0);
    CHECK(model.c_out(cfg.epsilon) == 0.0);

    Rng rng(44);
    for (int trial = 0; trial < 100; ++trial) {
        nn::Tensor<float> x(2, 4, 8);
        for (auto &e : x.v)
            e = static_cast<float>(rng.normal() * 0.05);
        nn::Tensor<float> y = model.forward(x, cfg.epsilon);
        float max_abs = 0.0f;
        for (std::size_t i = 0; i < x.v.size(); ++i)
            max_abs = std::max(max_abs, std::abs(y.v[i] - x.v[i]));
        CHECK(max_abs < 1e-6f);
    }

    nn::Tensor<float> x(2, 4, 8);
    for (auto &e : x.v)
        e = 0.01f;
    nn::Tensor<float> y = model.forward(x, cfg.t_max);
    CHECK(y.c == 2);
    CHECK(y.h == 4);
    CHECK(y.w == 8);
    for (float v : y.v)
        CHECK(std::isfinite(v));

    CHECK_THROWS_AS(model.forward(x, cfg.t_max * 1.5), Error);
    CHECK_THROWS_AS(model.forward(x, cfg.epsilon * 0.5), Error);
}

TEST_CASE("train: loss trace recorded, finite, and seed-deterministic") {
    ChannelDataset ds = tiny_dataset(24, 1001);
    CmConfig cfg = CmConfig::preset("tiny");
    cfg.steps = 12;
    cfg.eval_interval = 4;

    TrainResult a = train_consistency_model(ds, cfg, 555);
    TrainResult b = train_consistency_model(ds, cfg, 555);
    REQUIRE(a.trace.size() == 12);
    REQUIRE(b.trace.size() == 12);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(std::isfinite(a.trace[i].train_loss));
        CHECK(a.trace[i].train_loss == b.trace[i].train_loss);
    }
    CHECK(a.model->net().store.w == b.model->net().store.w);
    CHECK(a.model->ema() == b.model->ema());

    TrainResult c = train_consistency_model(ds, cfg, 556);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.trace.size(); ++i)
        any_diff = any_diff || a.trace[i].train_loss != c.trace[i].train_loss;
    CHECK(any_diff);
}

TEST_CASE("train: EMA equals decay*ema + (1-decay)*w after one step") {
    ChannelDataset ds = tiny_dataset(12, 77);
    CmConfig cfg = CmConfig::preset("tiny");
    cfg.s0 = 4;
    cfg.s1 = 4;
    cfg.steps = 2;
    cfg.test_fraction = 0.0;

    // theta_0: a freshly constructed model shares the init seed
    ConsistencyModel fresh(cfg, ds.n_r(), ds.n_t(), 1.0);
    const nn::AVec<float> theta0 = fresh.net().store.w;

    TrainResult r = train_consistency_model(ds, cfg, 9);
    const auto &w = r.model->net().store.w;
    const auto &ema = r.model->ema();
    // two steps: ema_2 = d*(d*theta0 + (1-d)*theta1) + (1-d)*theta2; verify
    // the recursion using the trainer's own theta trail is impractical here,
    // so check the one-step run instead.
    CmConfig one = cfg;
    one.steps = 1;
    TrainResult r1 = train_consistency_model(ds, one, 9);
    const float d = static_cast<float>(cfg.ema_decay);
    for (std::size_t i = 0; i < theta0.size(); ++i) {
        const float expect = d * theta0[i] + (1.0f - d) * r1.model->net().store.w[i];
        CHECK(r1.model->ema()[i] == expect);
    }
    CHECK(w.size() == ema.size());
}

TEST_CASE("train: rejects empty datasets") {
    ChannelDataset empty;
    empty.tx = {4, 2, 0.5};
    empty.rx = {2, 2, 0.5};
    CmConfig cfg = CmConfig::preset("tiny");
    CHECK_THROWS_AS(train_consistency_model(empty, cfg, 1), Error);
}

TEST_CASE("checkpoint: save/load round trip is bitwise on both parameter sets") {
    ChannelDataset ds = tiny_dataset(16, 31);
    CmConfig cfg = CmConfig::preset("tiny");
    cfg.steps = 8;
    TrainResult r = train_consistency_model(ds, cfg, 2);

    const std::string path = tmp_file("pnpcm_ckpt_rt.pnpc");
    r.model->save_checkpoint(path);
    auto loaded = ConsistencyModel::load_checkpoint(path);
    CHECK(loaded->n_r() == 4);
    CHECK(loaded->n_t() == 8);
    CHECK(loaded->norm_scale() == r.model->norm_scale());
    CHECK(loaded->net().store.w == r.model->net().store.w);
    CHECK(loaded->ema() == r.model->ema());

    Rng rng(8);
    nn::Tensor<float> x(2, 4, 8);
    for (auto &e : x.v)
        e = static_cast<float>(rng.normal() * 0.02);
    nn::Tensor<float> ya = r.model->forward(x, 0.05);
    nn::Tensor<float> yb = loaded->forward(x, 0.05);
    CHECK(ya.v == yb.v);

    // wrong expected dims -> VersionMismatch
    try {
        ConsistencyModel::load_checkpoint(path, 8, 8);
        FAIL("expected VersionMismatch");
    } catch (const Error &e) {
        CHECK(e.code() == errc::version_mismatch);
    }

    // truncation -> CorruptCheckpoint
    const std::string bad = tmp_file("pnpcm_ckpt_bad.pnpc");
    std::filesystem::copy_file(path, bad, std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(bad, std::filesystem::file_size(bad) / 2);
    try {
        ConsistencyModel::load_checkpoint(bad);
        FAIL("expected CorruptCheckpoint");
    } catch (const Error &e) {
        CHECK(e.code() == errc::corrupt_checkpoint);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(bad);
}

TEST_CASE("loss trace csv: format matches step,train_loss[,test_loss]") {
    std::vector<TracePoint> trace = {{0, 2.5, -1.0}, {1, 1.25, 0.5}};
    const std::string path = tmp_file("pnpcm_loss.csv");
    write_loss_trace_csv(trace, path);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "step,train_loss,test_loss");
    std::getline(f, line);
    CHECK(line == "0,2.5,");
    std::getline(f, line);
    CHECK(line == "1,1.25,0.5");
    std::filesystem::remove(path);
}
