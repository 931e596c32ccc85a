#include <doctest.h>

#include <cmath>

#include "pnpcm/denoiser.hpp"

using namespace pnpcm;

namespace {
VecC random_vec(Rng &rng, Eigen::Index n, double scale = 1.0) {
    VecC v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = cxd(rng.normal() * scale, rng.normal() * scale);
    return v;
}
} // namespace

TEST_CASE("bridge: constant vector splits into constant channels") {
    VecC v = VecC::Constant(6, cxd(1.0, 2.0));
    nn::Tensor<double> s = complex_to_channels(v, 2, 3);
    REQUIRE(s.c == 2);
    REQUIRE(s.h == 2);
    REQUIRE(s.w == 3);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            CHECK(s.at(0, r, c) == 1.0);
            CHECK(s.at(1, r, c) == 2.0);
        }
}

TEST_CASE("bridge: column-major unvec against the hand index map (2x3)") {
    VecC v(6);
    for (int k = 0; k < 6; ++k)
        v[k] = cxd(k, -k);
    nn::Tensor<double> s = complex_to_channels(v, 2, 3);
    // entry (r, c) of the unvec'd matrix is v[c*2 + r]
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            CHECK(s.at(0, r, c) == static_cast<double>(c * 2 + r));
            CHECK(s.at(1, r, c) == static_cast<double>(-(c * 2 + r)));
        }
}

TEST_CASE("bridge: exact round trip and isometry") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        VecC v = random_vec(rng, 12);
        nn::Tensor<double> s = complex_to_channels(v, 3, 4);
        VecC back = channels_to_complex(s);
        CHECK((back - v).norm() == 0.0);
        double tensor_norm2 = 0.0;
        for (double e : s.v)
            tensor_norm2 += e * e;
        CHECK(std::abs(std::sqrt(tensor_norm2) - v.norm()) < 1e-12 * v.norm());
    }
    CHECK_THROWS_AS(complex_to_channels(VecC::Zero(5), 2, 3), Error);
}

TEST_CASE("denoiser: identity returns its input") {
    Rng rng(1);
    VecC v = random_vec(rng, 8);
    Denoiser d = Denoiser::identity();
    CHECK((d.denoise(v, 0.3) - v).norm() == 0.0);
}

TEST_CASE("denoiser: soft threshold shrinkage") {
    Denoiser d = Denoiser::soft_threshold(2.0);
    Rng rng(2);
    VecC v = random_vec(rng, 8);

    // lambda*t = 0 keeps the input
    CHECK((d.denoise(v, 0.0) - v).norm() == 0.0);

    // |v| = 3, lambda*t = 1 -> magnitude 2, phase kept
    VecC w(4);
    for (int i = 0; i < 4; ++i)
        w[i] = std::polar(3.0, 0.4 * i);
    VecC out = Denoiser::soft_threshold(2.0).denoise(w, 0.5);
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(out[i] - std::polar(2.0, 0.4 * i)) < 1e-12);

    // below the threshold everything collapses to zero
    VecC tiny = VecC::Constant(3, cxd(0.1, 0.0));
    CHECK(Denoiser::soft_threshold(1.0).denoise(tiny, 1.0).norm() == 0.0);
}

TEST_CASE("denoiser: soft threshold is non-expansive") {
    Rng rng(3);
    Denoiser d = Denoiser::soft_threshold(1.5);
    for (int trial = 0; trial < 50; ++trial) {
        VecC a = random_vec(rng, 10);
        VecC b = random_vec(rng, 10);
        const double t = rng.uniform(0.0, 2.0);
        CHECK((d.denoise(a, t) - d.denoise(b, t)).norm() <= (a - b).norm() + 1e-12);
    }
}

TEST_CASE("denoiser: oracle returns the stored truth") {
    Rng rng(4);
    VecC truth = random_vec(rng, 8);
    VecC noisy = random_vec(rng, 8);
    Denoiser d = Denoiser::oracle(truth);
    CHECK((d.denoise(noisy, 1.0) - truth).norm() == 0.0);
    CHECK_THROWS_AS(d.denoise(random_vec(rng, 6), 1.0), Error);
}

TEST_CASE("denoiser: cm at the boundary noise level returns its input") {
    CmConfig cfg = CmConfig::preset("tiny");
    auto model = std::make_shared<ConsistencyModel>(cfg, 4, 8, 1.0);
    Denoiser d = Denoiser::cm(model);
    Rng rng(5);
    VecC v = random_vec(rng, 32, 0.05);
    VecC out = d.denoise(v, cfg.epsilon); // norm_scale = 1, no clamping
    CHECK(d.clamp_count() == 0);
    CHECK((out - v).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("denoiser: cm clamps noise levels outside the trained range and counts it") {
    CmConfig cfg = CmConfig::preset("tiny");
    auto model = std::make_shared<ConsistencyModel>(cfg, 4, 8, 1.0);
    Denoiser d = Denoiser::cm(model);
    Rng rng(6);
    VecC v = random_vec(rng, 32, 0.05);
    (void)d.denoise(v, cfg.t_max * 3.0);
    CHECK(d.clamp_count() == 1);
    (void)d.denoise(v, 0.0);
    CHECK(d.clamp_count() == 2);
    (void)d.denoise(v, cfg.t_max * 0.5);
    CHECK(d.clamp_count() == 2);

    CHECK_THROWS_AS(d.denoise(random_vec(rng, 8), 0.05), Error);
    CHECK_THROWS_AS(Denoiser::cm(nullptr), Error);
}

TEST_CASE("denoiser: kind names parse and print") {
    CHECK(parse_denoiser_kind("cm") == Denoiser::Kind::cm);
    CHECK(parse_denoiser_kind("identity") == Denoiser::Kind::identity);
    CHECK(parse_denoiser_kind("soft") == Denoiser::Kind::soft_threshold);
    CHECK(parse_denoiser_kind("oracle") == Denoiser::Kind::oracle);
    CHECK_THROWS_AS(parse_denoiser_kind("bogus"), Error);
    CHECK(std::string(denoiser_kind_name(Denoiser::Kind::cm)) == "cm");
}
