#include "problems.hpp"

#include <cmath>

#include "design.hpp"

namespace kohdesign::problems {

namespace {

// ---------------------------------------------------------------------------
// Sinusoid: y_M = sin(10 x u), quadratic bias, u* = pi/5.
// ---------------------------------------------------------------------------

class Sinusoid final : public Problem {
 public:
  Sinusoid() : u_star_((VectorXd(1) << M_PI / 5.0).finished()) {}

  const char* name() const override { return "sinusoid"; }
  Eigen::Index p() const override { return 1; }
  Eigen::Index s() const override { return 1; }

  double simulate(const VectorXd& x, const VectorXd& u) const override {
    check_dims(x, u, 1, 1);
    return std::sin(10.0 * x[0] * u[0]);
  }

  double bias(const VectorXd& x) const override {
    return 1.0 - x[0] / 3.0 - 2.0 * x[0] * x[0] / 3.0;
  }

  double noise_sd() const override { return 0.1; }
  const VectorXd& u_star() const override { return u_star_; }

  FieldSpec default_field() const override {
    FieldSpec f;
    f.kind = FieldSpec::Kind::Grid;
    f.grid_points = 10;
    f.replicates = 2;
    return f;
  }
  int default_test_n() const override { return 100; }

  koh::Priors default_priors() const override {
    koh::Priors pr;
    pr.theta_m = {1.5, 2.0};
    pr.theta_b = {1.5, 5.0};
    pr.g_b = {1.5, 7.0};
    return pr;
  }

 private:
  static void check_dims(const VectorXd& x, const VectorXd& u, Eigen::Index p,
                         Eigen::Index s) {
    if (x.size() != p || u.size() != s) throw InvalidArgument("sinusoid: bad input dims");
  }
  VectorXd u_star_;
};

// ---------------------------------------------------------------------------
// Rational 2x2 benchmark with an exponential attenuation in x2 and a rational
// bias; u* = (0.2, 0.1).
// ---------------------------------------------------------------------------

class GohBastos final : public Problem {
 public:
  GohBastos() : u_star_((VectorXd(2) << 0.2, 0.1).finished()) {}

  const char* name() const override { return "gohbastos"; }
  Eigen::Index p() const override { return 2; }
  Eigen::Index s() const override { return 2; }

  double simulate(const VectorXd& x, const VectorXd& u) const override {
    if (x.size() != 2 || u.size() != 2) throw InvalidArgument("gohbastos: bad input dims");
    if (x[1] == 0.0) {
      // The attenuation factor has an essential singularity at x2 = 0; the
      // x2 -> 0+ limit is handled by exp underflow, the point itself is not
      // in the domain.
      throw InvalidArgument("gohbastos: x2 must be positive");
    }
    const double x1 = x[0], x2 = x[1];
    const double num = 1000.0 * u[0] * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    const double den = 100.0 * u[1] * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    return (1.0 - std::exp(-1.0 / (2.0 * x2))) * num / den;
  }

  double bias(const VectorXd& x) const override {
    const double x1 = x[0], x2 = x[1];
    return (10.0 * x1 * x1 + 4.0 * x2 * x2) / (50.0 * x1 * x2 + 10.0);
  }

  double noise_sd() const override { return 0.25; }
  const VectorXd& u_star() const override { return u_star_; }

  // Midpoint grid keeps field locations away from the x2 = 0 boundary.
  bool field_grid_midpoint() const override { return true; }

  FieldSpec default_field() const override {
    FieldSpec f;
    f.kind = FieldSpec::Kind::Grid;
    f.grid_points = 5;
    f.replicates = 2;
    return f;
  }
  int default_test_n() const override { return 1000; }

  koh::Priors default_priors() const override {
    koh::Priors pr;
    pr.theta_m = {1.5, 1.25};
    pr.theta_b = {1.5, 2.5};
    pr.g_b = {1.5, 0.05};
    return pr;
  }

 private:
  VectorXd u_star_;
};

// ---------------------------------------------------------------------------
// Solvent-extraction kinetics: lanthanum and sodium exchange with an acidic
// extractant across an aqueous/organic contact,
//
//   La3+ + 3 H2A2 <-> La(HA2)3 + 3 H+      (forward rate k_la_f [La][H2A2]^3)
//   Na+  +   H2A2 <-> Na(HA2)  +   H+      (forward rate k_na_f [Na][H2A2])
//
// integrated with classical RK4 on the two free concentrations [La3+], [Na+];
// the other species follow from conservation, so the mass balances hold to
// machine precision by construction.
// ---------------------------------------------------------------------------

struct SxConstants {
  // Coded-input natural ranges.
  double naoh_mols_lo = 0.0, naoh_mols_hi = 0.02;    // mols of caustic added
  double naoh_vol_lo = 0.005, naoh_vol_hi = 0.05;    // volume of caustic solution (L)
  double oa_lo = 0.1, oa_hi = 1.0;                   // organic:aqueous ratio
  // Fixed feed composition.
  double v_aq = 1.0;          // aqueous feed volume (L)
  double la_feed = 0.01;      // [La3+] in the feed (mol/L)
  double h2a2_org = 0.5265;   // extractant dimer in fresh organic (mol/L)
  double ph0 = 1.99;          // feed pH before caustic addition
  double kw = 1e-14;
  // Rate constants decode: log-uniform over [1e-3, 1e3].
  double log_k_lo = -3.0, log_k_hi = 3.0;
};

struct SxRates {
  double k_la_b, k_la_f;  // back (strip) and forward (extract) for La
  double k_na_b, k_na_f;
};

SxRates decode_rates(const VectorXd& u, const SxConstants& c) {
  if (u.size() != 4) throw InvalidArgument("sx: u must have 4 coordinates");
  const auto k = [&](double coded) {
    return std::pow(10.0, c.log_k_lo + (c.log_k_hi - c.log_k_lo) * coded);
  };
  return {k(u[0]), k(u[1]), k(u[2]), k(u[3])};
}

}  // namespace

SxState sx_integrate(const VectorXd& x_coded, const VectorXd& u_coded,
                     double step, double tmax) {
  const SxConstants c;
  if (x_coded.size() != 3) throw InvalidArgument("sx: x must have 3 coordinates");
  if (!(step > 0.0) || !(tmax >= 0.0)) throw InvalidArgument("sx: bad step/tmax");
  for (Eigen::Index i = 0; i < 3; ++i) {
    if (x_coded[i] < 0.0 || x_coded[i] > 1.0) throw InvalidArgument("sx: x out of [0,1]");
  }
  const SxRates k = decode_rates(u_coded, c);

  const double naoh_mols = c.naoh_mols_lo + (c.naoh_mols_hi - c.naoh_mols_lo) * x_coded[0];
  const double naoh_vol = c.naoh_vol_lo + (c.naoh_vol_hi - c.naoh_vol_lo) * x_coded[1];
  const double oa = c.oa_lo + (c.oa_hi - c.oa_lo) * x_coded[2];

  SxState st;
  const double v_org = oa * c.v_aq;
  st.v_aq_tot = c.v_aq + naoh_vol;
  st.v_tot = c.v_aq + v_org + naoh_vol;

  // Initial concentrations, everything normalized to the total mixture volume.
  st.la0 = c.la_feed * c.v_aq / st.v_tot;
  st.na0 = naoh_mols / st.v_tot;
  st.h2a20 = c.h2a2_org * v_org / st.v_tot;
  const double h_mols = std::pow(10.0, -c.ph0) * c.v_aq - naoh_mols;
  if (h_mols > 0.0) {
    st.h0 = h_mols / st.v_tot;
  } else if (h_mols < 0.0) {
    // Caustic excess: autoionization sets [H+] from the hydroxide surplus.
    st.h0 = c.kw / (-h_mols / st.v_tot);
  } else {
    st.h0 = 1e-7;
  }

  const double la0 = st.la0, na0 = st.na0, h2a20 = st.h2a20, h0 = st.h0;
  // State y = ([La3+], [Na+]); everything else follows from conservation.
  const auto deriv = [&](double la, double na, double& dla, double& dna) {
    const double la_a = la0 - la;
    const double na_a = na0 - na;
    const double h2a2 = h2a20 - 3.0 * la_a - na_a;
    const double h = h0 + 3.0 * la_a + na_a;
    dla = k.k_la_b * la_a * h * h * h - k.k_la_f * la * h2a2 * h2a2 * h2a2;
    dna = k.k_na_b * na_a * h - k.k_na_f * na * h2a2;
  };

  double la = la0, na = na0;
  double t = 0.0;
  while (t < tmax - 1e-12) {
    const double h_step = std::min(step, tmax - t);
    double k1l, k1n, k2l, k2n, k3l, k3n, k4l, k4n;
    deriv(la, na, k1l, k1n);
    deriv(la + 0.5 * h_step * k1l, na + 0.5 * h_step * k1n, k2l, k2n);
    deriv(la + 0.5 * h_step * k2l, na + 0.5 * h_step * k2n, k3l, k3n);
    deriv(la + h_step * k3l, na + h_step * k3n, k4l, k4n);
    la += h_step / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
    na += h_step / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n);
    for (double* v : {&la, &na}) {
      if (*v < -1e-12) {
        throw NumericError("sx: concentration went negative beyond tolerance");
      }
      if (*v < 0.0) *v = 0.0;
    }
    t += h_step;
  }

  st.la = la;
  st.na = na;
  st.la_a = la0 - la;
  st.na_a = na0 - na;
  st.h2a2 = h2a20 - 3.0 * st.la_a - st.na_a;
  st.h = h0 + 3.0 * st.la_a + st.na_a;
  return st;
}

namespace {

class SolventExtraction final : public Problem {
 public:
  explicit SolventExtraction(const ProblemOptions& opts)
      : step_(opts.sx_step),
        tmax_(opts.sx_tmax),
        u_star_((VectorXd(4) << 0.5, 0.7, 0.4, 0.6).finished()) {
    if (!(step_ > 0.0)) throw InvalidArgument("sx: step must be positive");
  }

  const char* name() const override { return "sx"; }
  Eigen::Index p() const override { return 3; }
  Eigen::Index s() const override { return 4; }
  Eigen::Index n_outputs() const override { return 2; }

  const char* output_name(Eigen::Index i) const override {
    return i == 0 ? "log_la" : "log_na";
  }

  double simulate(const VectorXd& x, const VectorXd& u) const override {
    return simulate_all(x, u)[0];
  }

  VectorXd simulate_all(const VectorXd& x, const VectorXd& u) const override {
    const SxState st = sx_integrate(x, u, step_, tmax_);
    // Log aqueous-basis concentrations: total mols re-normalized to the
    // aqueous volume (feed plus caustic solution).
    VectorXd out(2);
    out[0] = std::log(std::max(st.la * st.v_tot / st.v_aq_tot, 1e-300));
    out[1] = std::log(std::max(st.na * st.v_tot / st.v_aq_tot, 1e-300));
    return out;
  }

  double bias(const VectorXd& x) const override {
    return 0.2 * (1.0 - x[0] / 3.0 - 2.0 * x[1] * x[1] / 3.0);
  }

  double noise_sd() const override { return 0.1; }
  const VectorXd& u_star() const override { return u_star_; }

  FieldSpec default_field() const override {
    FieldSpec f;
    f.kind = FieldSpec::Kind::Lhs;
    f.lhs_n = 25;
    return f;
  }
  int default_test_n() const override { return 200; }

  koh::Priors default_priors() const override {
    koh::Priors pr;
    pr.theta_m = {1.5, 0.9};
    pr.theta_b = {1.5, 0.9};
    pr.g_b = {1.5, 0.05};
    return pr;
  }

 private:
  double step_, tmax_;
  VectorXd u_star_;
};

}  // namespace

const char* Problem::output_name(Eigen::Index) const { return "y"; }

VectorXd Problem::simulate_all(const VectorXd& x, const VectorXd& u) const {
  VectorXd out(1);
  out[0] = simulate(x, u);
  return out;
}

std::unique_ptr<Problem> make_problem(const std::string& name,
                                      const ProblemOptions& options) {
  if (name == "sinusoid") return std::make_unique<Sinusoid>();
  if (name == "gohbastos") return std::make_unique<GohBastos>();
  if (name == "sx") return std::make_unique<SolventExtraction>(options);
  throw InvalidArgument("unknown problem '" + name + "'");
}

MatrixXd field_design(const Problem& prob, const FieldSpec& spec, Rng& rng) {
  const Eigen::Index p = prob.p();
  if (spec.kind == FieldSpec::Kind::Lhs) {
    return design::lhs(spec.lhs_n, static_cast<int>(p), rng);
  }
  const int k = spec.grid_points;
  if (k < 1 || spec.replicates < 1) throw InvalidArgument("field_design: bad grid spec");
  const auto coord = [&](int i) {
    if (prob.field_grid_midpoint()) return (i + 0.5) / k;
    return k == 1 ? 0.5 : static_cast<double>(i) / (k - 1);
  };
  Eigen::Index n_unique = 1;
  for (Eigen::Index j = 0; j < p; ++j) n_unique *= k;
  MatrixXd uniq(n_unique, p);
  for (Eigen::Index r = 0; r < n_unique; ++r) {
    Eigen::Index rem = r;
    for (Eigen::Index j = 0; j < p; ++j) {
      uniq(r, j) = coord(static_cast<int>(rem % k));
      rem /= k;
    }
  }
  MatrixXd X(n_unique * spec.replicates, p);
  for (int rep = 0; rep < spec.replicates; ++rep) {
    X.middleRows(rep * n_unique, n_unique) = uniq;
  }
  return X;
}

VectorXd field_mean(const Problem& prob, const MatrixXd& X, double bias_scale) {
  VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const VectorXd x = X.row(i).transpose();
    y[i] = prob.simulate(x, prob.u_star()) + bias_scale * prob.bias(x);
  }
  return y;
}

VectorXd field_observe(const Problem& prob, const MatrixXd& X, double bias_scale,
                       Rng& rng) {
  VectorXd y = field_mean(prob, X, bias_scale);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += prob.noise_sd() * rng.normal();
  return y;
}

TestSet make_test_set(const Problem& prob, int n, bool noiseless, double bias_scale,
                      Rng& rng) {
  TestSet t;
  t.X = design::lhs(n, static_cast<int>(prob.p()), rng);
  t.y = noiseless ? field_mean(prob, t.X, bias_scale)
                  : field_observe(prob, t.X, bias_scale, rng);
  return t;
}

}  // namespace kohdesign::problems
