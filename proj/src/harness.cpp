#include "harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "csvio.hpp"

namespace kohdesign::harness {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const char* where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw InvalidArgument(std::string("unknown config key '") + key + "' in " + where);
    }
  }
}

gp::GammaPrior parse_gamma(const json& obj, const char* where) {
  check_keys(obj, where, {"shape", "rate", "scale"});
  if (!obj.contains("shape")) throw InvalidArgument(std::string(where) + ": missing 'shape'");
  const bool has_rate = obj.contains("rate"), has_scale = obj.contains("scale");
  if (has_rate == has_scale) {
    throw InvalidArgument(std::string(where) + ": give exactly one of 'rate' or 'scale'");
  }
  gp::GammaPrior pr;
  pr.shape = obj.at("shape").get<double>();
  pr.rate = has_rate ? obj.at("rate").get<double>() : 1.0 / obj.at("scale").get<double>();
  if (!(pr.shape > 0.0) || !(pr.rate > 0.0)) {
    throw InvalidArgument(std::string(where) + ": parameters must be positive");
  }
  return pr;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "config",
             {"problem", "strategies", "n_m0", "n_m_final", "mc_reps", "seed",
              "bias_scale", "field", "test", "priors", "acquisition", "fit",
              "problem_options", "record_walltime", "threads"});

  ExperimentConfig cfg;
  for (const char* key : {"problem", "strategies", "n_m0", "n_m_final", "mc_reps", "seed"}) {
    if (!doc.contains(key)) {
      throw InvalidArgument(std::string("config: missing required key '") + key + "'");
    }
  }
  cfg.problem = doc.at("problem").get<std::string>();
  for (const auto& s : doc.at("strategies")) {
    cfg.strategies.push_back(acq::strategy_from_string(s.get<std::string>()));
  }
  if (cfg.strategies.empty()) throw InvalidArgument("config: no strategies");
  for (std::size_t i = 0; i < cfg.strategies.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.strategies.size(); ++j) {
      if (cfg.strategies[i] == cfg.strategies[j]) {
        throw InvalidArgument("config: duplicate strategy");
      }
    }
  }
  cfg.n_m0 = doc.at("n_m0").get<int>();
  cfg.n_m_final = doc.at("n_m_final").get<int>();
  cfg.mc_reps = doc.at("mc_reps").get<int>();
  cfg.seed = doc.at("seed").get<std::uint64_t>();
  if (cfg.n_m0 < 2 || cfg.n_m_final < cfg.n_m0) {
    throw InvalidArgument("config: need 2 <= n_m0 <= n_m_final");
  }
  if (cfg.mc_reps < 1) throw InvalidArgument("config: mc_reps must be >= 1");

  cfg.bias_scale = doc.value("bias_scale", 1.0);
  cfg.record_walltime = doc.value("record_walltime", true);
  cfg.threads = doc.value("threads", 1);
  if (cfg.threads < 1) throw InvalidArgument("config: threads must be >= 1");

  if (doc.contains("field")) {
    const json& f = doc.at("field");
    check_keys(f, "field", {"type", "points", "replicates", "n"});
    problems::FieldSpec spec;
    const std::string type = f.at("type").get<std::string>();
    if (type == "grid") {
      spec.kind = problems::FieldSpec::Kind::Grid;
      spec.grid_points = f.value("points", 10);
      spec.replicates = f.value("replicates", 1);
    } else if (type == "lhs") {
      spec.kind = problems::FieldSpec::Kind::Lhs;
      spec.lhs_n = f.at("n").get<int>();
    } else {
      throw InvalidArgument("config: field.type must be 'grid' or 'lhs'");
    }
    cfg.field = spec;
  }
  if (doc.contains("test")) {
    const json& t = doc.at("test");
    check_keys(t, "test", {"n", "noiseless"});
    cfg.test.n = t.value("n", 0);
    cfg.test.noiseless = t.value("noiseless", true);
  }
  if (doc.contains("priors")) {
    const json& p = doc.at("priors");
    check_keys(p, "priors", {"theta_m", "theta_b", "g", "u_beta"});
    koh::Priors pr;  // filled from the problem default later if keys are absent
    const auto base = problems::make_problem(cfg.problem)->default_priors();
    pr = base;
    if (p.contains("theta_m")) pr.theta_m = parse_gamma(p.at("theta_m"), "priors.theta_m");
    if (p.contains("theta_b")) pr.theta_b = parse_gamma(p.at("theta_b"), "priors.theta_b");
    if (p.contains("g")) pr.g_b = parse_gamma(p.at("g"), "priors.g");
    if (p.contains("u_beta")) {
      const json& ub = p.at("u_beta");
      check_keys(ub, "priors.u_beta", {"a", "b"});
      pr.u_beta_a = ub.at("a").get<double>();
      pr.u_beta_b = ub.at("b").get<double>();
      if (!(pr.u_beta_a > 0.0) || !(pr.u_beta_b > 0.0)) {
        throw InvalidArgument("priors.u_beta: parameters must be positive");
      }
    }
    cfg.priors = pr;
  }
  if (doc.contains("acquisition")) {
    const json& a = doc.at("acquisition");
    check_keys(a, "acquisition", {"cand_per_dim", "n_starts", "max_iter", "grad_tol"});
    cfg.acquisition.cand_per_dim = a.value("cand_per_dim", cfg.acquisition.cand_per_dim);
    cfg.acquisition.n_starts = a.value("n_starts", cfg.acquisition.n_starts);
    cfg.acquisition.bfgs.max_iter = a.value("max_iter", cfg.acquisition.bfgs.max_iter);
    cfg.acquisition.bfgs.grad_tol = a.value("grad_tol", cfg.acquisition.bfgs.grad_tol);
    if (cfg.acquisition.cand_per_dim < 1 || cfg.acquisition.n_starts < 1) {
      throw InvalidArgument("config: acquisition counts must be positive");
    }
  }
  if (doc.contains("fit")) {
    const json& f = doc.at("fit");
    check_keys(f, "fit", {"n_starts", "jitter", "warm_start"});
    cfg.fit_starts = f.value("n_starts", cfg.fit_starts);
    cfg.jitter = f.value("jitter", cfg.jitter);
    cfg.warm_start = f.value("warm_start", cfg.warm_start);
    if (cfg.fit_starts < 1 || !(cfg.jitter > 0.0)) {
      throw InvalidArgument("config: bad fit options");
    }
  }
  if (doc.contains("problem_options")) {
    const json& po = doc.at("problem_options");
    check_keys(po, "problem_options", {"sx_step", "sx_tmax"});
    cfg.problem_options.sx_step = po.value("sx_step", cfg.problem_options.sx_step);
    cfg.problem_options.sx_tmax = po.value("sx_tmax", cfg.problem_options.sx_tmax);
  }

  // Validates the problem name (and sx options) early.
  problems::make_problem(cfg.problem, cfg.problem_options);
  return cfg;
}

namespace {

json gamma_to_json(const gp::GammaPrior& pr) {
  return json{{"shape", pr.shape}, {"rate", pr.rate}};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  const auto prob = problems::make_problem(cfg.problem, cfg.problem_options);
  const problems::FieldSpec field = cfg.field ? *cfg.field : prob->default_field();
  const koh::Priors priors = cfg.priors ? *cfg.priors : prob->default_priors();
  const int test_n = cfg.test.n > 0 ? cfg.test.n : prob->default_test_n();

  json doc;
  doc["problem"] = cfg.problem;
  json strat = json::array();
  for (auto s : cfg.strategies) strat.push_back(acq::to_string(s));
  doc["strategies"] = strat;
  doc["n_m0"] = cfg.n_m0;
  doc["n_m_final"] = cfg.n_m_final;
  doc["mc_reps"] = cfg.mc_reps;
  doc["seed"] = cfg.seed;
  doc["bias_scale"] = cfg.bias_scale;
  if (field.kind == problems::FieldSpec::Kind::Grid) {
    doc["field"] = json{{"type", "grid"},
                        {"points", field.grid_points},
                        {"replicates", field.replicates}};
  } else {
    doc["field"] = json{{"type", "lhs"}, {"n", field.lhs_n}};
  }
  doc["test"] = json{{"n", test_n}, {"noiseless", cfg.test.noiseless}};
  doc["priors"] = json{{"theta_m", gamma_to_json(priors.theta_m)},
                       {"theta_b", gamma_to_json(priors.theta_b)},
                       {"g", gamma_to_json(priors.g_b)},
                       {"u_beta", json{{"a", priors.u_beta_a}, {"b", priors.u_beta_b}}}};
  doc["acquisition"] = json{{"cand_per_dim", cfg.acquisition.cand_per_dim},
                            {"n_starts", cfg.acquisition.n_starts},
                            {"max_iter", cfg.acquisition.bfgs.max_iter},
                            {"grad_tol", cfg.acquisition.bfgs.grad_tol}};
  doc["fit"] = json{{"n_starts", cfg.fit_starts},
                    {"jitter", cfg.jitter},
                    {"warm_start", cfg.warm_start}};
  if (cfg.problem == "sx") {
    doc["problem_options"] = json{{"sx_step", cfg.problem_options.sx_step},
                                  {"sx_tmax", cfg.problem_options.sx_tmax}};
  }
  doc["record_walltime"] = cfg.record_walltime;
  doc["threads"] = cfg.threads;
  return doc.dump(2);
}

double rmse(const VectorXd& pred, const VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() == 0) {
    throw InvalidArgument("rmse: size mismatch");
  }
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

namespace {

std::vector<std::string> record_header(Eigen::Index s, Eigen::Index d) {
  std::vector<std::string> h = {"strategy", "mc_iter", "n_m", "rmse"};
  for (Eigen::Index c = 0; c < s; ++c) h.push_back("u_hat_" + std::to_string(c + 1));
  for (Eigen::Index c = 0; c < d; ++c) h.push_back("acq_" + std::to_string(c + 1));
  h.push_back("wall_time_s");
  return h;
}

std::string record_to_line(const Record& r) {
  std::vector<std::string> f;
  f.push_back(r.strategy);
  f.push_back(csvio::format_int(r.mc_iter));
  f.push_back(csvio::format_int(r.n_m));
  f.push_back(csvio::format_double(r.rmse));
  for (Eigen::Index c = 0; c < r.u_hat.size(); ++c) {
    f.push_back(csvio::format_double(r.u_hat[c]));
  }
  for (Eigen::Index c = 0; c < r.acq.size(); ++c) {
    f.push_back(csvio::format_double(r.acq[c]));
  }
  f.push_back(csvio::format_double(r.wall_s));
  return csvio::join_line(f);
}

// One repetition: shared field data and initial design, then every strategy's
// full sequential budget sweep.
std::vector<Record> run_iteration(const ExperimentConfig& cfg,
                                  const problems::Problem& prob,
                                  const problems::FieldSpec& field_spec,
                                  const koh::Priors& priors, int test_n, int iter) {
  const Eigen::Index p = prob.p(), s = prob.s(), d = p + s;

  Rng rng_field(seed_stream(cfg.seed, static_cast<std::uint64_t>(iter), 1));
  const MatrixXd Xf = problems::field_design(prob, field_spec, rng_field);
  const VectorXd yf = problems::field_observe(prob, Xf, cfg.bias_scale, rng_field);
  const koh::FieldData field{Xf, yf};

  Rng rng_master(seed_stream(cfg.seed, static_cast<std::uint64_t>(iter), 2));
  const MatrixXd master = design::lhs(cfg.n_m_final, static_cast<int>(d), rng_master);

  Rng rng_subset(seed_stream(cfg.seed, static_cast<std::uint64_t>(iter), 3));
  std::vector<int> order(static_cast<std::size_t>(cfg.n_m_final));
  std::iota(order.begin(), order.end(), 0);
  rng_subset.shuffle(order.begin(), order.end());
  const std::vector<int> initial(order.begin(), order.begin() + cfg.n_m0);
  const std::vector<int> leftover(order.begin() + cfg.n_m0, order.end());

  Rng rng_test(seed_stream(cfg.seed, static_cast<std::uint64_t>(iter), 4));
  const problems::TestSet test =
      problems::make_test_set(prob, test_n, cfg.test.noiseless, cfg.bias_scale, rng_test);

  const auto simulate_row = [&](const VectorXd& point) {
    return prob.simulate(point.head(p), point.tail(s));
  };

  MatrixXd design0(cfg.n_m0, d);
  VectorXd y0(cfg.n_m0);
  for (int i = 0; i < cfg.n_m0; ++i) {
    design0.row(i) = master.row(initial[static_cast<std::size_t>(i)]);
    y0[i] = simulate_row(design0.row(i).transpose());
  }

  std::vector<Record> records;
  records.reserve(cfg.strategies.size() *
                  static_cast<std::size_t>(cfg.n_m_final - cfg.n_m0 + 1));

  for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
    const acq::Strategy strategy = cfg.strategies[si];
    MatrixXd Zm = design0;
    VectorXd ym = y0;
    std::vector<int> remaining = leftover;
    Rng rng_acq(seed_stream(cfg.seed, static_cast<std::uint64_t>(iter), 200 + si));

    koh::FitOptions fopts;
    fopts.priors = priors;
    fopts.n_starts = cfg.fit_starts;
    fopts.jitter = cfg.jitter;

    for (int n = cfg.n_m0; n <= cfg.n_m_final; ++n) {
      fopts.seed = seed_stream(cfg.seed,
                               (static_cast<std::uint64_t>(iter) << 20) |
                                   static_cast<std::uint64_t>(n),
                               100 + si);
      const koh::SimData sim{Zm.leftCols(p), Zm.rightCols(s), ym};
      const koh::KohFit fit = koh::fit_koh(field, sim, fopts);
      if (cfg.warm_start) {
        fopts.theta_m_init = fit.cfg_m.theta;
        fopts.u_init = fit.u_hat;
        fopts.theta_b_init = fit.cfg_b.theta;
        fopts.g_init = fit.cfg_b.g;
      }

      Record rec;
      rec.strategy = acq::to_string(strategy);
      rec.mc_iter = iter;
      rec.n_m = n;
      rec.u_hat = fit.u_hat;
      rec.rmse = rmse(koh::predict_field(fit, test.X).mean, test.y);
      rec.acq = VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
      rec.wall_s = 0.0;

      if (n < cfg.n_m_final) {
        const acq::Result ar =
            acq::acquire(strategy, fit, cfg.acquisition, rng_acq, &master, &remaining);
        rec.acq = ar.point;
        rec.wall_s = cfg.record_walltime ? ar.wall_s : 0.0;
        Zm.conservativeResize(Zm.rows() + 1, Eigen::NoChange);
        Zm.row(Zm.rows() - 1) = ar.point.transpose();
        ym.conservativeResize(ym.size() + 1);
        ym[ym.size() - 1] = simulate_row(ar.point);
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace

void run_campaign(const ExperimentConfig& cfg, const std::string& out_csv) {
  const auto prob = problems::make_problem(cfg.problem, cfg.problem_options);
  const problems::FieldSpec field_spec = cfg.field ? *cfg.field : prob->default_field();
  const koh::Priors priors = cfg.priors ? *cfg.priors : prob->default_priors();
  const int test_n = cfg.test.n > 0 ? cfg.test.n : prob->default_test_n();

  const auto header = record_header(prob->s(), prob->p() + prob->s());
  const std::size_t per_iter =
      cfg.strategies.size() * static_cast<std::size_t>(cfg.n_m_final - cfg.n_m0 + 1);

  // Resume support: keep raw lines of repetitions that finished completely so
  // a resumed run reproduces an uninterrupted run byte for byte.
  std::map<int, std::vector<std::string>> kept;
  {
    std::ifstream probe(out_csv);
    if (probe.good()) {
      const csvio::Table old = csvio::read_csv(out_csv);
      if (old.header != header) {
        throw IoError("existing output '" + out_csv + "' has a different schema");
      }
      const auto iter_col = old.col("mc_iter");
      std::map<int, std::vector<std::string>> by_iter;
      for (const auto& row : old.rows) {
        const int it = std::stoi(row[static_cast<std::size_t>(iter_col)]);
        by_iter[it].push_back(csvio::join_line(row));
      }
      for (auto& [it, lines] : by_iter) {
        if (it >= 1 && it <= cfg.mc_reps && lines.size() == per_iter) {
          kept[it] = std::move(lines);
        }
      }
    }
  }

  // Sidecar with the fully resolved configuration.
  {
    std::ofstream meta(out_csv + ".meta.json", std::ios::trunc);
    if (!meta) throw IoError("cannot write sidecar for '" + out_csv + "'");
    meta << config_to_json(cfg) << '\n';
  }

  std::ofstream out(out_csv, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + out_csv + "'");
  out << csvio::join_line(header) << '\n';

  const auto flush_iteration = [&](const std::vector<std::string>& lines) {
    for (const auto& line : lines) out << line << '\n';
    out.flush();
    if (!out) throw IoError("write failed for '" + out_csv + "'");
  };

  std::vector<int> pending;
  for (int it = 1; it <= cfg.mc_reps; ++it) {
    if (!kept.count(it)) pending.push_back(it);
  }

  const auto compute = [&](int it) {
    std::vector<std::string> lines;
    for (const auto& rec : run_iteration(cfg, *prob, field_spec, priors, test_n, it)) {
      lines.push_back(record_to_line(rec));
    }
    return lines;
  };

  const int n_workers =
      std::min<int>(cfg.threads, static_cast<int>(pending.size()) > 0
                                     ? static_cast<int>(pending.size())
                                     : 1);
  if (n_workers <= 1) {
    // Sequential: stream each repetition as it completes, in order.
    std::size_t next_pending = 0;
    for (int it = 1; it <= cfg.mc_reps; ++it) {
      if (kept.count(it)) {
        flush_iteration(kept[it]);
      } else {
        (void)next_pending;
        flush_iteration(compute(it));
      }
    }
    return;
  }

  // Parallel over repetitions with ordered commits.
  std::mutex mu;
  std::condition_variable cv;
  std::map<int, std::vector<std::string>> done;
  std::exception_ptr failure;
  std::atomic<std::size_t> cursor{0};

  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&]() {
      while (true) {
        const std::size_t k = cursor.fetch_add(1);
        if (k >= pending.size()) return;
        {
          std::lock_guard<std::mutex> lk(mu);
          if (failure) return;
        }
        try {
          auto lines = compute(pending[k]);
          std::lock_guard<std::mutex> lk(mu);
          done[pending[k]] = std::move(lines);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!failure) failure = std::current_exception();
        }
        cv.notify_all();
      }
    });
  }

  for (int it = 1; it <= cfg.mc_reps; ++it) {
    if (kept.count(it)) {
      flush_iteration(kept[it]);
      continue;
    }
    std::unique_lock<std::mutex> lk(mu);
    cv.wait(lk, [&] { return done.count(it) || failure; });
    if (failure && !done.count(it)) break;
    auto lines = std::move(done[it]);
    done.erase(it);
    lk.unlock();
    flush_iteration(lines);
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

void summarize(const std::string& in_csv, const std::string& out_csv) {
  const csvio::Table t = csvio::read_csv(in_csv);
  const auto c_strategy = t.col("strategy");
  const auto c_nm = t.col("n_m");
  const auto c_rmse = t.col("rmse");
  const auto c_wall = t.col("wall_time_s");

  Eigen::Index s_dims = 0, d_dims = 0;
  for (const auto& h : t.header) {
    if (h.rfind("u_hat_", 0) == 0) ++s_dims;
    if (h.rfind("acq_", 0) == 0) ++d_dims;
  }
  if (s_dims == 0 || d_dims <= s_dims) throw IoError("summarize: unexpected schema");
  const auto c_uhat0 = t.col("u_hat_1");
  const auto c_acq0 = t.col("acq_1");
  const Eigen::Index p_dims = d_dims - s_dims;

  struct Cell {
    std::vector<double> rmse;
    std::vector<double> wall;
    std::vector<double> u_dist_sq;
  };
  std::vector<std::string> strategy_order;
  std::map<std::string, std::map<int, Cell>> groups;
  for (const auto& row : t.rows) {
    const std::string& strat = row[static_cast<std::size_t>(c_strategy)];
    if (!groups.count(strat)) strategy_order.push_back(strat);
    const int nm = std::stoi(row[static_cast<std::size_t>(c_nm)]);
    Cell& cell = groups[strat][nm];
    cell.rmse.push_back(csvio::parse_double(row[static_cast<std::size_t>(c_rmse)]));
    cell.wall.push_back(csvio::parse_double(row[static_cast<std::size_t>(c_wall)]));
    const double acq1 = csvio::parse_double(row[static_cast<std::size_t>(c_acq0)]);
    if (!std::isnan(acq1)) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < s_dims; ++c) {
        const double uh = csvio::parse_double(row[static_cast<std::size_t>(c_uhat0 + c)]);
        const double au =
            csvio::parse_double(row[static_cast<std::size_t>(c_acq0 + p_dims + c)]);
        d2 += (au - uh) * (au - uh);
      }
      cell.u_dist_sq.push_back(d2);
    }
  }

  const auto mean = [](const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  const auto quantile = [](std::vector<double> v, double q) {
    // Linear interpolation of order statistics (R type-7).
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
  };

  csvio::Table out;
  out.header = {"strategy", "n_m",         "n_reps",        "rmse_mean",
                "rmse_q05", "rmse_q95",    "u_dist_sq_mean", "wall_mean_s"};
  for (const auto& strat : strategy_order) {
    for (const auto& [nm, cell] : groups[strat]) {
      out.rows.push_back({strat, csvio::format_int(nm),
                          csvio::format_int(static_cast<long long>(cell.rmse.size())),
                          csvio::format_double(mean(cell.rmse)),
                          csvio::format_double(quantile(cell.rmse, 0.05)),
                          csvio::format_double(quantile(cell.rmse, 0.95)),
                          csvio::format_double(mean(cell.u_dist_sq)),
                          csvio::format_double(mean(cell.wall))});
    }
  }
  csvio::write_csv(out_csv, out);
}

}  // namespace kohdesign::harness
