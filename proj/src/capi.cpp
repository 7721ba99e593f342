// C API implementation: translates between flat row-major arrays / JSON
// option strings and the C++ core, and maps exceptions onto status codes.

#include "kohdesign/kohdesign.h"

#include <cstring>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "acquisition.hpp"
#include "csvio.hpp"
#include "design.hpp"
#include "harness.hpp"
#include "imspe.hpp"
#include "koh.hpp"
#include "problems.hpp"

namespace {

using json = nlohmann::json;
using namespace kohdesign;

thread_local std::string g_last_error;

template <typename Fn>
kohd_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return KOHD_OK;
  } catch (const InvalidArgument& e) {
    g_last_error = e.what();
    return KOHD_ERR_INVALID_ARGUMENT;
  } catch (const CandidateRejected& e) {
    g_last_error = e.what();
    return KOHD_ERR_REJECTED;
  } catch (const NumericError& e) {
    g_last_error = e.what();
    return KOHD_ERR_NUMERIC;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return KOHD_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KOHD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return KOHD_ERR_INTERNAL;
  }
}

json parse_options(const char* options_json) {
  if (options_json == nullptr || options_json[0] == '\0') return json::object();
  json j = json::parse(options_json, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw InvalidArgument("options must be a JSON object");
  }
  return j;
}

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) { ok = true; break; }
    }
    if (!ok) {
      throw InvalidArgument(std::string("unknown key \"") + item.key() + "\" in " + where);
    }
  }
}

gp::GammaPrior parse_gamma(const json& j, const gp::GammaPrior& base, const char* where) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + " must be an object");
  require_keys(j, {"shape", "rate", "scale"}, where);
  gp::GammaPrior out = base;
  if (j.contains("shape")) out.shape = j.at("shape").get<double>();
  const bool has_rate = j.contains("rate"), has_scale = j.contains("scale");
  if (has_rate && has_scale) {
    throw InvalidArgument(std::string(where) + ": give rate or scale, not both");
  }
  if (has_rate) out.rate = j.at("rate").get<double>();
  if (has_scale) {
    const double scale = j.at("scale").get<double>();
    if (scale <= 0) throw InvalidArgument(std::string(where) + ": scale must be > 0");
    out.rate = 1.0 / scale;
  }
  if (out.shape <= 0 || out.rate <= 0) {
    throw InvalidArgument(std::string(where) + ": shape and rate must be > 0");
  }
  return out;
}

koh::Priors parse_priors(const json& j, const koh::Priors& base) {
  require_keys(j, {"theta_m", "theta_b", "g", "u_beta"}, "priors");
  koh::Priors out = base;
  if (j.contains("theta_m")) out.theta_m = parse_gamma(j.at("theta_m"), base.theta_m, "priors.theta_m");
  if (j.contains("theta_b")) out.theta_b = parse_gamma(j.at("theta_b"), base.theta_b, "priors.theta_b");
  if (j.contains("g")) out.g_b = parse_gamma(j.at("g"), base.g_b, "priors.g");
  if (j.contains("u_beta")) {
    const json& b = j.at("u_beta");
    require_keys(b, {"a", "b"}, "priors.u_beta");
    if (b.contains("a")) out.u_beta_a = b.at("a").get<double>();
    if (b.contains("b")) out.u_beta_b = b.at("b").get<double>();
    if (out.u_beta_a <= 0 || out.u_beta_b <= 0) {
      throw InvalidArgument("priors.u_beta: a and b must be > 0");
    }
  }
  return out;
}

MatrixXd to_matrix(const double* data, Eigen::Index rows, Eigen::Index cols,
                   const char* what) {
  if (rows > 0 && data == nullptr) {
    throw InvalidArgument(std::string(what) + " is null");
  }
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = data[i * cols + j];
  return out;
}

VectorXd to_vector(const double* data, Eigen::Index n, const char* what) {
  if (n > 0 && data == nullptr) throw InvalidArgument(std::string(what) + " is null");
  return Eigen::Map<const VectorXd>(data, n);
}

void check_ptr(const void* p, const char* what) {
  if (p == nullptr) throw InvalidArgument(std::string(what) + " is null");
}

}  // namespace

struct kohd_problem {
  std::unique_ptr<problems::Problem> impl;
};

struct kohd_fit {
  koh::KohFit impl;
};

extern "C" {

const char* kohd_last_error(void) { return g_last_error.c_str(); }

const char* kohd_version(void) { return "0.1.0"; }

kohd_status kohd_lhs(int n, int d, uint64_t seed, double* out) {
  return guard([&] {
    if (n <= 0 || d <= 0) throw InvalidArgument("lhs: n and d must be positive");
    check_ptr(out, "out");
    Rng rng(seed);
    const MatrixXd x = design::lhs(n, d, rng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out[i * d + j] = x(i, j);
  });
}

kohd_status kohd_problem_create(const char* name, const char* options_json,
                                kohd_problem** out) {
  return guard([&] {
    check_ptr(name, "name");
    check_ptr(out, "out");
    const json j = parse_options(options_json);
    require_keys(j, {"sx_step", "sx_tmax"}, "problem options");
    problems::ProblemOptions opts;
    if (j.contains("sx_step")) opts.sx_step = j.at("sx_step").get<double>();
    if (j.contains("sx_tmax")) opts.sx_tmax = j.at("sx_tmax").get<double>();
    auto prob = problems::make_problem(name, opts);
    *out = new kohd_problem{std::move(prob)};
  });
}

void kohd_problem_free(kohd_problem* prob) { delete prob; }

kohd_status kohd_problem_dims(const kohd_problem* prob, int* p, int* s,
                              int* n_outputs) {
  return guard([&] {
    check_ptr(prob, "prob");
    if (p) *p = static_cast<int>(prob->impl->p());
    if (s) *s = static_cast<int>(prob->impl->s());
    if (n_outputs) *n_outputs = static_cast<int>(prob->impl->n_outputs());
  });
}

kohd_status kohd_problem_simulate(const kohd_problem* prob, const double* xu,
                                  int n, double* out) {
  return guard([&] {
    check_ptr(prob, "prob");
    check_ptr(out, "out");
    if (n <= 0) throw InvalidArgument("simulate: n must be positive");
    const auto& pr = *prob->impl;
    const Eigen::Index p = pr.p(), s = pr.s(), no = pr.n_outputs();
    const MatrixXd XU = to_matrix(xu, n, p + s, "xu");
    for (int i = 0; i < n; ++i) {
      const VectorXd x = XU.row(i).head(p).transpose();
      const VectorXd u = XU.row(i).tail(s).transpose();
      const VectorXd yi = pr.simulate_all(x, u);
      for (Eigen::Index k = 0; k < no; ++k) out[i * no + k] = yi(k);
    }
  });
}

kohd_status kohd_problem_field_mean(const kohd_problem* prob, const double* x,
                                    int n, double bias_scale, double* out) {
  return guard([&] {
    check_ptr(prob, "prob");
    check_ptr(out, "out");
    if (n <= 0) throw InvalidArgument("field_mean: n must be positive");
    const MatrixXd X = to_matrix(x, n, prob->impl->p(), "x");
    const VectorXd y = problems::field_mean(*prob->impl, X, bias_scale);
    for (int i = 0; i < n; ++i) out[i] = y(i);
  });
}

kohd_status kohd_fit_create(const double* xf, const double* yf, int n_f,
                            const double* xm_um, const double* ym, int n_m,
                            int p, int s, const char* options_json,
                            uint64_t seed, kohd_fit** out) {
  return guard([&] {
    check_ptr(out, "out");
    if (p <= 0 || s <= 0) throw InvalidArgument("fit: p and s must be positive");
    if (n_f <= 0 || n_m <= 0) {
      throw InvalidArgument("fit: n_f and n_m must be positive");
    }
    koh::FieldData field{to_matrix(xf, n_f, p, "xf"), to_vector(yf, n_f, "yf")};
    const MatrixXd XU = to_matrix(xm_um, n_m, p + s, "xm_um");
    koh::SimData sim{XU.leftCols(p), XU.rightCols(s), to_vector(ym, n_m, "ym")};

    const json j = parse_options(options_json);
    require_keys(j, {"problem", "priors", "n_starts", "jitter"}, "fit options");
    koh::FitOptions opts;
    opts.seed = seed;
    koh::Priors base;
    if (j.contains("problem")) {
      base = problems::make_problem(j.at("problem").get<std::string>())->default_priors();
    }
    opts.priors = j.contains("priors") ? parse_priors(j.at("priors"), base) : base;
    if (j.contains("n_starts")) opts.n_starts = j.at("n_starts").get<int>();
    if (j.contains("jitter")) opts.jitter = j.at("jitter").get<double>();
    if (opts.n_starts < 1) throw InvalidArgument("fit: n_starts must be >= 1");
    if (opts.jitter <= 0) throw InvalidArgument("fit: jitter must be > 0");

    auto fit = std::make_unique<kohd_fit>();
    fit->impl = koh::fit_koh(field, sim, opts);
    *out = fit.release();
  });
}

void kohd_fit_free(kohd_fit* fit) { delete fit; }

kohd_status kohd_fit_u_hat(const kohd_fit* fit, double* u) {
  return guard([&] {
    check_ptr(fit, "fit");
    check_ptr(u, "u");
    for (Eigen::Index i = 0; i < fit->impl.s; ++i) u[i] = fit->impl.u_hat(i);
  });
}

kohd_status kohd_fit_params_json(const kohd_fit* fit, char* buf, size_t cap) {
  return guard([&] {
    check_ptr(fit, "fit");
    check_ptr(buf, "buf");
    const auto& f = fit->impl;
    json j;
    j["p"] = static_cast<int>(f.p);
    j["s"] = static_cast<int>(f.s);
    j["nu_m"] = f.nu_m;
    j["nu_b"] = f.nu_b;
    j["theta_m"] = std::vector<double>(f.cfg_m.theta.data(),
                                       f.cfg_m.theta.data() + f.cfg_m.theta.size());
    j["theta_b"] = std::vector<double>(f.cfg_b.theta.data(),
                                       f.cfg_b.theta.data() + f.cfg_b.theta.size());
    j["g"] = f.cfg_b.g;
    j["u_hat"] = std::vector<double>(f.u_hat.data(), f.u_hat.data() + f.u_hat.size());
    j["jitter"] = f.joint_jitter;
    const std::string text = j.dump();
    if (text.size() + 1 > cap) {
      throw InvalidArgument("params buffer too small (need " +
                            std::to_string(text.size() + 1) + " bytes)");
    }
    std::memcpy(buf, text.c_str(), text.size() + 1);
  });
}

kohd_status kohd_fit_predict(const kohd_fit* fit, const double* x, int n,
                             double* mean, double* var) {
  return guard([&] {
    check_ptr(fit, "fit");
    if (n <= 0) throw InvalidArgument("predict: n must be positive");
    const MatrixXd X = to_matrix(x, n, fit->impl.p, "x");
    const koh::Prediction pred = koh::predict_field(fit->impl, X);
    for (int i = 0; i < n; ++i) {
      if (mean) mean[i] = pred.mean(i);
      if (var) var[i] = pred.var(i);
    }
  });
}

kohd_status kohd_fit_imspe(const kohd_fit* fit, const double* cand, double* value) {
  return guard([&] {
    check_ptr(fit, "fit");
    check_ptr(value, "value");
    const VectorXd c = to_vector(cand, fit->impl.d(), "cand");
    *value = imspe::koh_imspe(fit->impl, c);
  });
}

kohd_status kohd_fit_imspe_grad(const kohd_fit* fit, const double* cand,
                                double* grad) {
  return guard([&] {
    check_ptr(fit, "fit");
    check_ptr(grad, "grad");
    const VectorXd c = to_vector(cand, fit->impl.d(), "cand");
    const VectorXd g = imspe::koh_imspe_grad(fit->impl, c);
    for (Eigen::Index i = 0; i < g.size(); ++i) grad[i] = g(i);
  });
}

kohd_status kohd_fit_acquire(const kohd_fit* fit, const char* strategy,
                             const char* options_json, uint64_t seed,
                             double* point, double* value, int* fallback) {
  return guard([&] {
    check_ptr(fit, "fit");
    check_ptr(strategy, "strategy");
    check_ptr(point, "point");
    const acq::Strategy st = acq::strategy_from_string(strategy);
    if (st == acq::Strategy::Lhs || st == acq::Strategy::Uniform) {
      throw InvalidArgument("acquire: model-free strategies are not available "
                            "through this entry point");
    }
    const json j = parse_options(options_json);
    require_keys(j, {"cand_per_dim", "n_starts", "max_iter", "grad_tol"},
                 "acquire options");
    acq::Options opts;
    if (j.contains("cand_per_dim")) opts.cand_per_dim = j.at("cand_per_dim").get<int>();
    if (j.contains("n_starts")) opts.n_starts = j.at("n_starts").get<int>();
    if (j.contains("max_iter")) opts.bfgs.max_iter = j.at("max_iter").get<int>();
    if (j.contains("grad_tol")) opts.bfgs.grad_tol = j.at("grad_tol").get<double>();
    if (opts.cand_per_dim < 1 || opts.n_starts < 1 || opts.bfgs.max_iter < 1) {
      throw InvalidArgument("acquire: counts must be >= 1");
    }
    Rng rng(seed);
    const acq::Result res = acq::acquire(st, fit->impl, opts, rng);
    for (Eigen::Index i = 0; i < res.point.size(); ++i) point[i] = res.point(i);
    if (value) *value = res.value;
    if (fallback) *fallback = res.fallback ? 1 : 0;
  });
}

kohd_status kohd_experiment_run(const char* config_json, const char* out_csv) {
  return guard([&] {
    check_ptr(config_json, "config_json");
    check_ptr(out_csv, "out_csv");
    const harness::ExperimentConfig cfg = harness::parse_config(config_json);
    harness::run_campaign(cfg, out_csv);
  });
}

kohd_status kohd_summarize(const char* in_csv, const char* out_csv) {
  return guard([&] {
    check_ptr(in_csv, "in_csv");
    check_ptr(out_csv, "out_csv");
    harness::summarize(in_csv, out_csv);
  });
}

}  // extern "C"
