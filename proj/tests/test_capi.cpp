#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "pnpcm/pnpcm.h"

namespace {
std::string tmp_dir(const std::string &name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}
} // namespace

TEST_CASE("c api: version and status names") {
    CHECK(std::strlen(pnpcm_version()) > 0);
    CHECK(std::string(pnpcm_status_name(PNPCM_OK)) == "ok");
    CHECK(std::string(pnpcm_status_name(PNPCM_ERR_PARSE)) == "parse_error");
}

TEST_CASE("c api: utility calls") {
    int m_t = 0, m_r = 0;
    REQUIRE(pnpcm_search_pilot_config(0.78, 64, 16, 1, &m_t, &m_r) == PNPCM_OK);
    CHECK(m_t == 57);
    CHECK(m_r == 14);
    CHECK(pnpcm_search_pilot_config(2.0, 64, 16, 1, &m_t, &m_r) == PNPCM_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(pnpcm_last_error()) > 0);

    const double h_hat[4] = {1.0, 0.0, 0.0, 0.0}; // two complex entries
    const double h_true[4] = {2.0, 0.0, 0.0, 0.0};
    double lin = -1.0;
    REQUIRE(pnpcm_nmse(h_hat, h_true, 2, &lin) == PNPCM_OK);
    CHECK(lin == doctest::Approx(0.25));
}

TEST_CASE("c api: dataset lifecycle and error reporting") {
    pnpcm_dataset *ds = nullptr;
    const char *cfg = R"({"count": 5, "tx": {"n_horizontal": 2, "n_vertical": 2},
                          "rx": {"n_horizontal": 2, "n_vertical": 2},
                          "paths": {"l_min": 1, "l_max": 3}})";
    REQUIRE(pnpcm_dataset_generate(cfg, 7, &ds) == PNPCM_OK);
    CHECK(pnpcm_dataset_size(ds) == 5);

    const std::string dir = tmp_dir("pnpcm_capi_ds");
    const std::string path = dir + "/ds.pnpc";
    REQUIRE(pnpcm_dataset_save(ds, path.c_str()) == PNPCM_OK);

    pnpcm_dataset *loaded = nullptr;
    REQUIRE(pnpcm_dataset_open(path.c_str(), &loaded) == PNPCM_OK);
    CHECK(pnpcm_dataset_size(loaded) == 5);
    pnpcm_dataset_free(loaded);

    pnpcm_dataset *missing = nullptr;
    CHECK(pnpcm_dataset_open("/nonexistent/nowhere.pnpc", &missing) == PNPCM_ERR_IO);
    CHECK(std::strlen(pnpcm_last_error()) > 0);

    pnpcm_dataset *bad = nullptr;
    CHECK(pnpcm_dataset_generate("{not json", 1, &bad) == PNPCM_ERR_PARSE);

    pnpcm_dataset_free(ds);
    std::filesystem::remove_all(dir);
}

TEST_CASE("c api: sweep, emit, reload, summarize") {
    pnpcm_dataset *ds = nullptr;
    const char *gen_cfg = R"({"count": 4, "tx": {"n_horizontal": 2, "n_vertical": 2},
                              "rx": {"n_horizontal": 2, "n_vertical": 2}})";
    REQUIRE(pnpcm_dataset_generate(gen_cfg, 13, &ds) == PNPCM_OK);

    nlohmann::json cfg;
    cfg["schema_version"] = 1;
    cfg["denoiser"] = "identity";
    cfg["pilot_targets"] = {1.0};
    cfg["snr_db"] = {"inf"};
    cfg["n_samples"] = 4;
    cfg["cg"] = {{"max_iters", 1500}, {"tolerance", 1e-12}};
    cfg["n_iters"] = 3;
    cfg["t_hi_override"] = 0.0;
    cfg["rho_override"] = 1e-7;
    cfg["beta_override"] = 0.0;
    cfg["seed"] = 5;

    pnpcm_report *report = nullptr;
    REQUIRE(pnpcm_sweep(cfg.dump().c_str(), ds, nullptr, nullptr, &report) == PNPCM_OK);

    const std::string dir = tmp_dir("pnpcm_capi_report");
    REQUIRE(pnpcm_report_emit(report, dir.c_str(), "csv,json") == PNPCM_OK);
    CHECK(std::filesystem::exists(dir + "/report.csv"));
    CHECK(std::filesystem::exists(dir + "/summary.json"));

    pnpcm_report *loaded = nullptr;
    REQUIRE(pnpcm_report_open(dir.c_str(), &loaded) == PNPCM_OK);
    char *summary = nullptr;
    REQUIRE(pnpcm_report_summary(loaded, &summary) == PNPCM_OK);
    auto j = nlohmann::json::parse(summary);
    CHECK(j["settings"].size() == 1);
    CHECK(j["settings"][0]["nmse_linear_mean"].get<double>() < 1e-6);
    pnpcm_string_free(summary);

    pnpcm_report_free(loaded);
    pnpcm_report_free(report);
    pnpcm_dataset_free(ds);
    std::filesystem::remove_all(dir);
}

TEST_CASE("c api: missing checkpoint surfaces as a checkpoint error") {
    pnpcm_model *model = nullptr;
    pnpcm_status s = pnpcm_model_open("/nonexistent/model.pnpc", &model);
    CHECK((s == PNPCM_ERR_IO || s == PNPCM_ERR_CHECKPOINT));
}
