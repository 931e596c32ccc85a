#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "pnpcm/measurement.hpp"

using namespace pnpcm;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

MeasurementOperator random_small_operator(Rng &rng, int n_t, int n_r, int m_t, int m_r) {
    MatC left(m_t, n_t), right(m_r, n_r);
    for (int r = 0; r < m_t; ++r)
        for (int c = 0; c < n_t; ++c)
            left(r, c) = cxd(rng.normal(), rng.normal());
    for (int r = 0; r < m_r; ++r)
        for (int c = 0; c < n_r; ++c)
            right(r, c) = cxd(rng.normal(), rng.normal());
    return MeasurementOperator(std::move(left), std::move(right));
}

VecC random_vec(Rng &rng, Eigen::Index n) {
    VecC v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = cxd(rng.normal(), rng.normal());
    return v;
}

// Dense Kronecker oracle, independent of MeasurementOperator::dense().
MatC kron_oracle(const MatC &a, const MatC &b) {
    MatC out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index ar = 0; ar < a.rows(); ++ar)
        for (Eigen::Index ac = 0; ac < a.cols(); ++ac)
            for (Eigen::Index br = 0; br < b.rows(); ++br)
                for (Eigen::Index bc = 0; bc < b.cols(); ++bc)
                    out(ar * b.rows() + br, ac * b.cols() + bc) = a(ar, ac) * b(br, bc);
    return out;
}
} // namespace

TEST_CASE("codebooks: all phases on the quantization grid, unit modulus") {
    PilotConfig cfg;
    cfg.m_t = 6;
    cfg.m_r = 3;
    cfg.phase_bits = 4;
    Rng rng(404);
    Codebooks cb = generate_codebooks(rng, cfg, 8, 4);
    REQUIRE(cb.x_p.rows() == 8);
    REQUIRE(cb.x_p.cols() == 6);
    REQUIRE(cb.w_rf.rows() == 4);
    REQUIRE(cb.w_rf.cols() == 3);

    const double step = kTwoPi / 16.0;
    auto on_grid = [&](cxd v, double mag) {
        if (std::abs(std::abs(v) - mag) > 1e-12)
            return false;
        double ph = std::arg(v);
        if (ph < 0)
            ph += kTwoPi;
        const double r = ph / step;
        return std::abs(r - std::round(r)) < 1e-9 || std::abs(ph - kTwoPi) < 1e-9;
    };
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 6; ++c)
            CHECK(on_grid(cb.x_p(r, c), 1.0 / std::sqrt(8.0)));
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(on_grid(cb.w_rf(r, c), 1.0 / std::sqrt(4.0)));
}

TEST_CASE("codebooks: one phase bit gives real entries up to sign") {
    PilotConfig cfg;
    cfg.m_t = 4;
    cfg.m_r = 2;
    cfg.phase_bits = 1;
    Rng rng(17);
    Codebooks cb = generate_codebooks(rng, cfg, 4, 4);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            CHECK(std::abs(cb.x_p(r, c).imag()) < 1e-12);
}

TEST_CASE("codebooks: seeded determinism") {
    PilotConfig cfg;
    cfg.m_t = 5;
    cfg.m_r = 2;
    Rng r1(99), r2(99);
    Codebooks a = generate_codebooks(r1, cfg, 8, 4);
    Codebooks b = generate_codebooks(r2, cfg, 8, 4);
    CHECK((a.x_p - b.x_p).norm() == 0.0);
    CHECK((a.w_rf - b.w_rf).norm() == 0.0);
}

TEST_CASE("operator: identity factors act as the identity") {
    MeasurementOperator op(MatC::Identity(2, 2), MatC::Identity(2, 2));
    Rng rng(1);
    VecC h = random_vec(rng, 4);
    CHECK((op.apply(h) - h).norm() == 0.0);
    CHECK((op.adjoint_apply(h) - h).norm() == 0.0);
    CHECK(op.apply(VecC::Zero(4)).norm() == 0.0);
}

TEST_CASE("operator: matrix-free apply matches the dense Kronecker oracle") {
    Rng rng(314);
    for (int trial = 0; trial < 50; ++trial) {
        const int n_t = 2 + static_cast<int>(rng.uniform_int(5));
        const int n_r = 2 + static_cast<int>(rng.uniform_int(5));
        const int m_t = 1 + static_cast<int>(rng.uniform_int(n_t));
        const int m_r = 1 + static_cast<int>(rng.uniform_int(n_r));
        MeasurementOperator op = random_small_operator(rng, n_t, n_r, m_t, m_r);
        MatC dense = kron_oracle(op.left_factor(), op.right_factor());

        VecC h = random_vec(rng, op.cols());
        CHECK((op.apply(h) - dense * h).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((op.dense() - dense).cwiseAbs().maxCoeff() < 1e-12);

        VecC v = random_vec(rng, op.rows());
        CHECK((op.adjoint_apply(v) - dense.adjoint() * v).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("operator: adjoint inner-product identity") {
    Rng rng(2718);
    for (int trial = 0; trial < 50; ++trial) {
        MeasurementOperator op = random_small_operator(rng, 6, 4, 3, 2);
        VecC x = random_vec(rng, op.cols());
        VecC y = random_vec(rng, op.rows());
        const cxd lhs = y.dot(op.apply(x));       // <A x, y>
        const cxd rhs = op.adjoint_apply(y).dot(x);
        CHECK(std::abs(lhs - rhs) < 1e-10 * (std::abs(lhs) + 1.0));
    }
}

TEST_CASE("operator: paper dims give a 1024x1024 operator") {
    PilotConfig cfg;
    cfg.m_t = 64;
    cfg.m_r = 16;
    Rng rng(5);
    Codebooks cb = generate_codebooks(rng, cfg, 64, 16);
    DftDictionary f_t = build_dictionary(ArrayGeometry{8, 8, 0.5});
    DftDictionary f_r = build_dictionary(ArrayGeometry{4, 4, 0.5});
    MeasurementOperator op = assemble_operator(cb.x_p, cb.w_rf, f_t, f_r);
    CHECK(op.rows() == 1024);
    CHECK(op.cols() == 1024);
    CHECK_THROWS_AS(assemble_operator(cb.x_p, cb.w_rf, f_r, f_t), Error);
}

TEST_CASE("observe: infinite SNR is exact, zero signal rejected, deterministic") {
    MeasurementOperator op(MatC::Identity(4, 4), MatC::Identity(2, 2));
    Rng rng(31);
    VecC h = random_vec(rng, 8);

    Rng nrng(1);
    Observation clean = observe(op, h, std::numeric_limits<double>::infinity(), nrng);
    CHECK((clean.y - h).norm() == 0.0);
    CHECK(clean.noise_var == 0.0);

    try {
        observe(op, VecC::Zero(8), 10.0, nrng);
        FAIL("expected ZeroSignal");
    } catch (const Error &e) {
        CHECK(e.code() == errc::zero_signal);
    }

    Rng n1(7), n2(7);
    Observation a = observe(op, h, 5.0, n1);
    Observation b = observe(op, h, 5.0, n2);
    CHECK((a.y - b.y).norm() == 0.0);
}

TEST_CASE("observe: empirical noise energy matches 0 dB target") {
    MeasurementOperator op(MatC::Identity(8, 8), MatC::Identity(2, 2));
    Rng rng(73);
    VecC h = random_vec(rng, 16);
    VecC clean = op.apply(h);
    double ratio_acc = 0.0;
    Rng nrng(202);
    const int draws = 200;
    for (int i = 0; i < draws; ++i) {
        Observation obs = observe(op, h, 0.0, nrng);
        ratio_acc += (obs.y - clean).squaredNorm() / clean.squaredNorm();
    }
    const double mean_ratio = ratio_acc / draws;
    CHECK(mean_ratio > 0.9);
    CHECK(mean_ratio < 1.1);
}

TEST_CASE("observe: SNR calibration within 0.2 dB over 1000 draws") {
    Rng rng(5150);
    MeasurementOperator op = random_small_operator(rng, 8, 4, 8, 4);
    VecC h = random_vec(rng, op.cols());
    VecC clean = op.apply(h);
    for (double snr_db : {-5.0, 10.0}) {
        Rng nrng(42);
        double noise_acc = 0.0;
        const int draws = 1000;
        for (int i = 0; i < draws; ++i) {
            Observation obs = observe(op, h, snr_db, nrng);
            noise_acc += (obs.y - clean).squaredNorm();
        }
        const double empirical_snr_db =
            10.0 * std::log10(clean.squaredNorm() / (noise_acc / draws));
        CHECK(std::abs(empirical_snr_db - snr_db) < 0.2);
    }
}

TEST_CASE("observation bundle: save/load round trip") {
    Rng rng(88);
    MeasurementOperator op = random_small_operator(rng, 4, 2, 3, 2);
    VecC h = random_vec(rng, op.cols());
    Rng nrng(3);
    Observation obs = observe(op, h, 12.5, nrng);
    obs.truth_ref = "sample-7";
    PilotConfig cfg;
    cfg.m_t = 3;
    cfg.m_r = 2;

    const std::string path =
        (std::filesystem::temp_directory_path() / "pnpcm_obs_rt.pnpc").string();
    obs.save(path, cfg, 777);

    PilotConfig loaded_cfg;
    std::uint64_t seed = 0;
    Observation loaded = Observation::load(path, &loaded_cfg, &seed);
    CHECK((loaded.y - obs.y).norm() == 0.0);
    CHECK(loaded.snr_db == obs.snr_db);
    CHECK(loaded.noise_var == obs.noise_var);
    CHECK(loaded.truth_ref == "sample-7");
    CHECK(loaded_cfg.m_t == 3);
    CHECK(loaded_cfg.m_r == 2);
    CHECK(seed == 777);
    std::filesystem::remove(path);
}

TEST_CASE("search_pilot_config: exact hit at alpha = 1") {
    PilotConfig cfg = search_pilot_config(1.0, 64, 16, 1);
    CHECK(cfg.m_t == 64);
    CHECK(cfg.m_r == 16);
    CHECK(cfg.measurements() == 1024);
}

// Oracle: independent re-derivation of the balanced search rule.
static std::pair<int, int> balanced_search_oracle(double alpha, int n_t, int n_r) {
    long mr = std::lround(n_r * std::sqrt(alpha));
    mr = std::max(1L, std::min<long>(mr, n_r));
    long mt = std::lround(alpha * n_t * n_r / static_cast<double>(mr));
    mt = std::max(1L, std::min<long>(mt, n_t));
    return {static_cast<int>(mt), static_cast<int>(mr)};
}

TEST_CASE("search_pilot_config: reproduces the four reference ratios") {
    struct Case {
        double target;
        int m_t, m_r, m;
    };
    const Case cases[] = {
        {0.78, 57, 14, 798},
        {0.59, 50, 12, 600},
        {0.39, 40, 10, 400},
        {0.20, 29, 7, 203},
    };
    for (const auto &c : cases) {
        PilotConfig cfg = search_pilot_config(c.target, 64, 16, 1);
        CHECK(cfg.m_t == c.m_t);
        CHECK(cfg.m_r == c.m_r);
        CHECK(cfg.measurements() == c.m);
        auto [mt, mr] = balanced_search_oracle(c.target, 64, 16);
        CHECK(cfg.m_t == mt);
        CHECK(cfg.m_r == mr);
    }
}

TEST_CASE("search_pilot_config: agrees with the oracle across targets") {
    for (double alpha = 0.05; alpha <= 1.0; alpha += 0.016) {
        PilotConfig cfg = search_pilot_config(alpha, 64, 16, 1);
        auto [mt, mr] = balanced_search_oracle(alpha, 64, 16);
        CHECK(cfg.m_t == mt);
        CHECK(cfg.m_r == mr);
        CHECK(cfg.measurements() <= 1024);
        CHECK(cfg.m_t >= 1);
        CHECK(cfg.m_r >= 1);
    }
    CHECK_THROWS_AS(search_pilot_config(0.0, 64, 16, 1), Error);
    CHECK_THROWS_AS(search_pilot_config(1.5, 64, 16, 1), Error);
}
