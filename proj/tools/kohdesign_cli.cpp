// Command-line front end.  Talks to the library exclusively through the C API
// so it doubles as a smoke test of the shared-library surface.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kohdesign/kohdesign.h"

namespace {

using json = nlohmann::json;

[[noreturn]] void die(kohd_status st, const std::string& what) {
  std::fprintf(stderr, "error: %s: %s\n", what.c_str(), kohd_last_error());
  std::exit(st == KOHD_OK ? 1 : static_cast<int>(st));
}

void check(kohd_status st, const std::string& what) {
  if (st != KOHD_OK) die(st, what);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// --- minimal CSV (header + numeric body, comma separated, no quoting) -------

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    std::fprintf(stderr, "error: column \"%s\" not found\n", name.c_str());
    std::exit(1);
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open %s\n", path.c_str());
    std::exit(static_cast<int>(KOHD_ERR_IO));
  }
  Csv out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (first) {
      out.header = fields;
      first = false;
      continue;
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      if (f == "nan" || f.empty()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      char* end = nullptr;
      row.push_back(std::strtod(f.c_str(), &end));
      if (end == f.c_str() || *end != '\0') {
        std::fprintf(stderr, "error: %s: bad number \"%s\"\n", path.c_str(), f.c_str());
        std::exit(1);
      }
    }
    if (row.size() != out.header.size()) {
      std::fprintf(stderr, "error: %s: ragged row\n", path.c_str());
      std::exit(1);
    }
    out.rows.push_back(std::move(row));
  }
  if (first) {
    std::fprintf(stderr, "error: %s: empty file\n", path.c_str());
    std::exit(1);
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    std::exit(static_cast<int>(KOHD_ERR_IO));
  }
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
    out << "\n";
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open %s\n", path.c_str());
    std::exit(static_cast<int>(KOHD_ERR_IO));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Columns named <prefix>_1..<prefix>_k, in order, starting anywhere in the
// header; returns the column indices.
std::vector<int> prefixed_cols(const Csv& csv, const std::string& prefix) {
  std::vector<int> idx;
  for (int k = 1;; ++k) {
    const std::string name = prefix + "_" + std::to_string(k);
    bool found = false;
    for (size_t i = 0; i < csv.header.size(); ++i) {
      if (csv.header[i] == name) {
        idx.push_back(static_cast<int>(i));
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  return idx;
}

std::vector<double> gather(const Csv& csv, const std::vector<int>& cols) {
  std::vector<double> out;
  out.reserve(csv.rows.size() * cols.size());
  for (const auto& row : csv.rows)
    for (int c : cols) out.push_back(row[static_cast<size_t>(c)]);
  return out;
}

// --- subcommands -------------------------------------------------------------

int cmd_design(int n, int dims, uint64_t seed, const std::string& out_path) {
  std::vector<double> pts(static_cast<size_t>(n) * dims);
  check(kohd_lhs(n, dims, seed, pts.data()), "design");
  std::vector<std::string> header;
  for (int j = 1; j <= dims; ++j) header.push_back("x_" + std::to_string(j));
  std::vector<std::vector<double>> rows(n);
  for (int i = 0; i < n; ++i)
    rows[i].assign(pts.begin() + static_cast<long>(i) * dims,
                   pts.begin() + static_cast<long>(i + 1) * dims);
  write_csv(out_path, header, rows);
  return 0;
}

int cmd_simulate(const std::string& problem, const std::string& in_path,
                 const std::string& out_path, const std::string& options_json) {
  kohd_problem* prob = nullptr;
  check(kohd_problem_create(problem.c_str(), options_json.c_str(), &prob), "problem");
  int p = 0, s = 0, n_out = 0;
  check(kohd_problem_dims(prob, &p, &s, &n_out), "dims");

  const Csv in = read_csv(in_path);
  auto xcols = prefixed_cols(in, "x");
  auto ucols = prefixed_cols(in, "u");
  if (static_cast<int>(xcols.size()) != p || static_cast<int>(ucols.size()) != s) {
    std::fprintf(stderr, "error: %s expects columns x_1..x_%d,u_1..u_%d\n",
                 problem.c_str(), p, s);
    kohd_problem_free(prob);
    return 1;
  }
  std::vector<int> cols = xcols;
  cols.insert(cols.end(), ucols.begin(), ucols.end());
  const std::vector<double> xu = gather(in, cols);
  const int n = static_cast<int>(in.rows.size());
  std::vector<double> y(static_cast<size_t>(n) * n_out);
  const kohd_status st = kohd_problem_simulate(prob, xu.data(), n, y.data());
  kohd_problem_free(prob);
  check(st, "simulate");

  std::vector<std::string> header = in.header;
  if (n_out == 1) {
    header.push_back("y");
  } else {
    for (int k = 1; k <= n_out; ++k) header.push_back("y_" + std::to_string(k));
  }
  std::vector<std::vector<double>> rows = in.rows;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n_out; ++k) rows[i].push_back(y[static_cast<size_t>(i) * n_out + k]);
  write_csv(out_path, header, rows);
  return 0;
}

int cmd_acquire(const std::string& field_path, const std::string& sim_path,
                const std::string& config_path, const std::string& out_path) {
  const Csv field = read_csv(field_path);
  const Csv sim = read_csv(sim_path);
  const auto fx = prefixed_cols(field, "x");
  const auto sx = prefixed_cols(sim, "x");
  const auto su = prefixed_cols(sim, "u");
  const int p = static_cast<int>(fx.size());
  const int s = static_cast<int>(su.size());
  if (p == 0 || s == 0 || static_cast<int>(sx.size()) != p) {
    std::fprintf(stderr,
                 "error: field needs x_1..x_p,y and sim needs x_1..x_p,u_1..u_s,y\n");
    return 1;
  }
  const std::vector<double> xf = gather(field, fx);
  const std::vector<double> yf = gather(field, {field.col("y")});
  std::vector<int> scols = sx;
  scols.insert(scols.end(), su.begin(), su.end());
  const std::vector<double> xm_um = gather(sim, scols);
  const std::vector<double> ym = gather(sim, {sim.col("y")});

  json cfg = json::parse(read_file(config_path), nullptr, false);
  if (cfg.is_discarded() || !cfg.is_object()) {
    std::fprintf(stderr, "error: %s is not a JSON object\n", config_path.c_str());
    return 1;
  }
  const std::string strategy = cfg.value("strategy", std::string("koh-imspe"));
  const uint64_t seed = cfg.value("seed", 0ULL);

  json fit_opts = cfg.value("fit", json::object());
  if (cfg.contains("problem")) fit_opts["problem"] = cfg.at("problem");
  const json acq_opts = cfg.value("acquisition", json::object());

  kohd_fit* fit = nullptr;
  check(kohd_fit_create(xf.data(), yf.data(), static_cast<int>(field.rows.size()),
                        xm_um.data(), ym.data(), static_cast<int>(sim.rows.size()),
                        p, s, fit_opts.dump().c_str(), seed, &fit),
        "fit");

  std::vector<double> u_hat(s), point(p + s);
  double value = 0.0;
  int fallback = 0;
  kohd_status st = kohd_fit_u_hat(fit, u_hat.data());
  if (st != KOHD_OK) {
    kohd_fit_free(fit);
    die(st, "u_hat");
  }
  const auto t0 = std::chrono::steady_clock::now();
  st = kohd_fit_acquire(fit, strategy.c_str(), acq_opts.dump().c_str(), seed + 1,
                        point.data(), &value, &fallback);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  kohd_fit_free(fit);
  check(st, "acquire");

  json out;
  out["strategy"] = strategy;
  out["point"] = point;
  out["criterion"] = value;
  out["u_hat"] = u_hat;
  out["fallback"] = fallback != 0;
  out["wall_time_s"] = wall_s;
  std::ofstream of(out_path, std::ios::trunc);
  if (!of) {
    std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
    return static_cast<int>(KOHD_ERR_IO);
  }
  of << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kohdesign: sequential design for computer-model calibration"};
  app.require_subcommand(1);

  // design
  auto* design = app.add_subcommand("design", "Generate a Latin hypercube design");
  int d_n = 0, d_dims = 0;
  uint64_t d_seed = 0;
  std::string d_out;
  design->add_option("--n", d_n, "Number of points")->required();
  design->add_option("--dims", d_dims, "Dimensions")->required();
  design->add_option("--seed", d_seed, "RNG seed")->required();
  design->add_option("--out", d_out, "Output CSV path")->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a benchmark simulator");
  std::string s_problem, s_in, s_out;
  double s_step = 0.0, s_tmax = 0.0;
  simulate->add_option("--problem", s_problem, "Problem name")->required();
  simulate->add_option("--in", s_in, "Input CSV with x_*,u_* columns")->required();
  simulate->add_option("--out", s_out, "Output CSV path")->required();
  simulate->add_option("--step", s_step, "Integrator step (sx)");
  simulate->add_option("--tmax", s_tmax, "Contact time (sx)");

  // acquire
  auto* acquire = app.add_subcommand("acquire", "Fit the calibration model and propose the next run");
  std::string a_field, a_sim, a_config, a_out;
  acquire->add_option("--field", a_field, "Field CSV (x_*,y)")->required();
  acquire->add_option("--sim", a_sim, "Simulator CSV (x_*,u_*,y)")->required();
  acquire->add_option("--config", a_config, "JSON config")->required();
  acquire->add_option("--out", a_out, "Output JSON path")->required();

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run a Monte-Carlo design campaign");
  std::string e_config, e_out;
  experiment->add_option("--config", e_config, "JSON config")->required();
  experiment->add_option("--out", e_out, "Output CSV path")->required();

  // summarize
  auto* summarize = app.add_subcommand("summarize", "Aggregate campaign records");
  std::string m_in, m_out;
  summarize->add_option("--in", m_in, "Record CSV")->required();
  summarize->add_option("--out", m_out, "Summary CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  if (design->parsed()) return cmd_design(d_n, d_dims, d_seed, d_out);
  if (simulate->parsed()) {
    json opts = json::object();
    if (simulate->count("--step") > 0) opts["sx_step"] = s_step;
    if (simulate->count("--tmax") > 0) opts["sx_tmax"] = s_tmax;
    return cmd_simulate(s_problem, s_in, s_out, opts.dump());
  }
  if (acquire->parsed()) return cmd_acquire(a_field, a_sim, a_config, a_out);
  if (experiment->parsed()) {
    check(kohd_experiment_run(read_file(e_config).c_str(), e_out.c_str()), "experiment");
    return 0;
  }
  if (summarize->parsed()) {
    check(kohd_summarize(m_in.c_str(), m_out.c_str()), "summarize");
    return 0;
  }
  return 1;
}
