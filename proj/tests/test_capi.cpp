#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kohdesign/kohdesign.h"

namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("kohd_capi_" + name)).string();
}

// Small synthetic calibration data set on the sinusoid problem, row-major.
struct TinyData {
  std::vector<double> xf, yf, xm_um, ym;
  int n_f = 8, n_m = 14, p = 1, s = 1;
};

TinyData make_data() {
  TinyData d;
  kohd_problem* prob = nullptr;
  REQUIRE(kohd_problem_create("sinusoid", nullptr, &prob) == KOHD_OK);

  d.xf.resize(d.n_f);
  for (int i = 0; i < d.n_f; ++i) d.xf[i] = (i + 0.5) / d.n_f;
  d.yf.resize(d.n_f);
  REQUIRE(kohd_problem_field_mean(prob, d.xf.data(), d.n_f, 1.0, d.yf.data()) ==
          KOHD_OK);

  d.xm_um.resize(2 * d.n_m);
  REQUIRE(kohd_lhs(d.n_m, 2, 77, d.xm_um.data()) == KOHD_OK);
  d.ym.resize(d.n_m);
  REQUIRE(kohd_problem_simulate(prob, d.xm_um.data(), d.n_m, d.ym.data()) ==
          KOHD_OK);
  kohd_problem_free(prob);
  return d;
}

kohd_fit* make_fit(const TinyData& d) {
  kohd_fit* fit = nullptr;
  const char* opts = R"({"problem": "sinusoid", "n_starts": 2})";
  REQUIRE(kohd_fit_create(d.xf.data(), d.yf.data(), d.n_f, d.xm_um.data(),
                          d.ym.data(), d.n_m, d.p, d.s, opts, 5, &fit) == KOHD_OK);
  REQUIRE(fit != nullptr);
  return fit;
}

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::strcmp(kohd_version(), "0.1.0") == 0);
  CHECK(kohd_lhs(0, 1, 1, nullptr) == KOHD_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(kohd_last_error()) > 0);
  double one = 0.0;
  CHECK(kohd_lhs(1, 1, 1, &one) == KOHD_OK);
}

TEST_CASE("latin hypercube generation through the C surface") {
  std::vector<double> a(12 * 3), b(12 * 3);
  REQUIRE(kohd_lhs(12, 3, 9, a.data()) == KOHD_OK);
  REQUIRE(kohd_lhs(12, 3, 9, b.data()) == KOHD_OK);
  CHECK(a == b);
  for (double v : a) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // One point per stratum in each column.
  for (int c = 0; c < 3; ++c) {
    std::vector<bool> hit(12, false);
    for (int i = 0; i < 12; ++i) hit[static_cast<int>(a[i * 3 + c] * 12)] = true;
    for (bool h : hit) CHECK(h);
  }
  CHECK(kohd_lhs(3, 2, 1, nullptr) == KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_lhs(3, 0, 1, a.data()) == KOHD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("problem handles expose dims, simulator, and field surface") {
  kohd_problem* prob = nullptr;
  REQUIRE(kohd_problem_create("sinusoid", "{}", &prob) == KOHD_OK);
  int p = 0, s = 0, m = 0;
  REQUIRE(kohd_problem_dims(prob, &p, &s, &m) == KOHD_OK);
  CHECK(p == 1);
  CHECK(s == 1);
  CHECK(m == 1);

  const double xu[4] = {0.25, 0.5, 0.5, 0.2};
  double y[2] = {0, 0};
  REQUIRE(kohd_problem_simulate(prob, xu, 2, y) == KOHD_OK);
  CHECK(y[0] == doctest::Approx(std::sin(10.0 * 0.25 * 0.5)));
  CHECK(y[1] == doctest::Approx(std::sin(10.0 * 0.5 * 0.2)));

  const double x[1] = {0.0};
  double fm = 0.0;
  REQUIRE(kohd_problem_field_mean(prob, x, 1, 0.5, &fm) == KOHD_OK);
  CHECK(fm == doctest::Approx(0.5));  // sin(0) + 0.5 * bias(0)
  kohd_problem_free(prob);

  kohd_problem* sx = nullptr;
  const char* opts = R"({"sx_step": 1e-3, "sx_tmax": 1.0})";
  REQUIRE(kohd_problem_create("sx", opts, &sx) == KOHD_OK);
  REQUIRE(kohd_problem_dims(sx, &p, &s, &m) == KOHD_OK);
  CHECK(p == 3);
  CHECK(s == 4);
  CHECK(m == 2);
  const double xu7[7] = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  double out2[2];
  REQUIRE(kohd_problem_simulate(sx, xu7, 1, out2) == KOHD_OK);
  CHECK(std::isfinite(out2[0]));
  CHECK(std::isfinite(out2[1]));
  kohd_problem_free(sx);

  CHECK(kohd_problem_create("warp", nullptr, &prob) == KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_problem_create("sx", R"({"bogus": 1})", &prob) ==
        KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_problem_create(nullptr, nullptr, &prob) == KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_problem_dims(nullptr, &p, &s, &m) == KOHD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("fit handles calibrate, predict, and score candidates") {
  const TinyData d = make_data();
  kohd_fit* fit = make_fit(d);

  double u_hat = -1.0;
  REQUIRE(kohd_fit_u_hat(fit, &u_hat) == KOHD_OK);
  CHECK(u_hat > 0.0);
  CHECK(u_hat < 1.0);

  char buf[1024];
  REQUIRE(kohd_fit_params_json(fit, buf, sizeof buf) == KOHD_OK);
  const auto params = nlohmann::json::parse(buf);
  CHECK(params.at("p") == 1);
  CHECK(params.at("s") == 1);
  CHECK(params.at("u_hat").size() == 1);
  CHECK(params.at("u_hat")[0].get<double>() == u_hat);
  CHECK(params.at("theta_m").size() == 2);
  CHECK(params.at("theta_b").size() == 1);
  CHECK(params.at("nu_m").get<double>() > 0.0);
  CHECK(params.at("nu_b").get<double>() >= 0.0);
  CHECK(params.at("g").get<double>() >= 0.0);
  CHECK(params.at("jitter").get<double>() == 1e-8);
  char tiny[4];
  CHECK(kohd_fit_params_json(fit, tiny, sizeof tiny) ==
        KOHD_ERR_INVALID_ARGUMENT);

  // Prediction interpolates the field data closely at its own sites.
  std::vector<double> mean(d.n_f), var(d.n_f);
  REQUIRE(kohd_fit_predict(fit, d.xf.data(), d.n_f, mean.data(), var.data()) ==
          KOHD_OK);
  for (int i = 0; i < d.n_f; ++i) {
    CHECK(var[i] >= 0.0);
    CHECK(std::abs(mean[i] - d.yf[i]) < 0.5);
  }

  const double cand[2] = {0.31, 0.62};
  double value = -1.0;
  REQUIRE(kohd_fit_imspe(fit, cand, &value) == KOHD_OK);
  CHECK(value > 0.0);
  double grad[2];
  REQUIRE(kohd_fit_imspe_grad(fit, cand, grad) == KOHD_OK);
  CHECK(std::isfinite(grad[0]));
  CHECK(std::isfinite(grad[1]));

  // A candidate already in the design cannot be scored for a gradient.
  const double dup[2] = {d.xm_um[0], d.xm_um[1]};
  CHECK(kohd_fit_imspe_grad(fit, dup, grad) == KOHD_ERR_REJECTED);
  CHECK(std::strlen(kohd_last_error()) > 0);

  kohd_fit_free(fit);
}

TEST_CASE("fit acquisition proposes new points through the C surface") {
  const TinyData d = make_data();
  kohd_fit* fit = make_fit(d);

  double point[2], value = 0.0;
  int fallback = -1;
  const char* aopts = R"({"cand_per_dim": 10, "n_starts": 2, "max_iter": 40})";
  REQUIRE(kohd_fit_acquire(fit, "koh-imspe", aopts, 3, point, &value,
                           &fallback) == KOHD_OK);
  CHECK(point[0] >= 0.0);
  CHECK(point[0] <= 1.0);
  CHECK(point[1] >= 0.0);
  CHECK(point[1] <= 1.0);
  CHECK(value > 0.0);
  CHECK(fallback == 0);

  double check_value = 0.0;
  REQUIRE(kohd_fit_imspe(fit, point, &check_value) == KOHD_OK);
  CHECK(check_value == doctest::Approx(value).epsilon(1e-12));

  double p2[2], v2 = 0.0;
  REQUIRE(kohd_fit_acquire(fit, "koh-imspe", aopts, 3, p2, &v2, nullptr) ==
          KOHD_OK);
  CHECK(p2[0] == point[0]);  // same seed, same proposal
  CHECK(p2[1] == point[1]);

  REQUIRE(kohd_fit_acquire(fit, "m-imspe-u-at-uhat", aopts, 4, point, &value,
                           &fallback) == KOHD_OK);
  double u_hat = 0.0;
  REQUIRE(kohd_fit_u_hat(fit, &u_hat) == KOHD_OK);
  CHECK(point[1] == u_hat);

  // Data-free strategies have no meaning on a fit handle.
  CHECK(kohd_fit_acquire(fit, "lhs", nullptr, 1, point, &value, &fallback) ==
        KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_fit_acquire(fit, "uniform", nullptr, 1, point, &value, &fallback) ==
        KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_fit_acquire(fit, "warp", nullptr, 1, point, &value, &fallback) ==
        KOHD_ERR_INVALID_ARGUMENT);

  kohd_fit_free(fit);
}

TEST_CASE("fit creation validates its inputs") {
  const TinyData d = make_data();
  kohd_fit* fit = nullptr;
  CHECK(kohd_fit_create(nullptr, d.yf.data(), d.n_f, d.xm_um.data(), d.ym.data(),
                        d.n_m, 1, 1, nullptr, 1, &fit) ==
        KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_fit_create(d.xf.data(), d.yf.data(), 0, d.xm_um.data(), d.ym.data(),
                        d.n_m, 1, 1, nullptr, 1, &fit) ==
        KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_fit_create(d.xf.data(), d.yf.data(), d.n_f, d.xm_um.data(),
                        d.ym.data(), d.n_m, 1, 0, nullptr, 1, &fit) ==
        KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_fit_create(d.xf.data(), d.yf.data(), d.n_f, d.xm_um.data(),
                        d.ym.data(), d.n_m, 1, 1, R"({"bogus": 1})", 1, &fit) ==
        KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_fit_create(d.xf.data(), d.yf.data(), d.n_f, d.xm_um.data(),
                        d.ym.data(), d.n_m, 1, 1, R"({"problem": "warp"})", 1,
        &fit) == KOHD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("experiment runner and summarizer work end to end") {
  const std::string rec = tmp_path("records.csv");
  const std::string sum = tmp_path("summary.csv");
  fs::remove(rec);
  fs::remove(sum);

  const char* config = R"({
    "problem": "sinusoid",
    "strategies": ["lhs"],
    "n_m0": 4,
    "n_m_final": 5,
    "mc_reps": 1,
    "seed": 7,
    "field": {"type": "grid", "points": 4, "replicates": 1},
    "test": {"n": 10},
    "fit": {"n_starts": 1},
    "record_walltime": false
  })";
  REQUIRE(kohd_experiment_run(config, rec.c_str()) == KOHD_OK);
  REQUIRE(kohd_summarize(rec.c_str(), sum.c_str()) == KOHD_OK);

  std::ifstream in(sum);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "strategy,n_m,n_reps,rmse_mean,rmse_q05,rmse_q95,u_dist_sq_mean,"
        "wall_mean_s");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 2);

  CHECK(kohd_experiment_run("{]", rec.c_str()) == KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_experiment_run(nullptr, rec.c_str()) == KOHD_ERR_INVALID_ARGUMENT);
  CHECK(kohd_summarize(tmp_path("missing.csv").c_str(), sum.c_str()) ==
        KOHD_ERR_IO);
}
