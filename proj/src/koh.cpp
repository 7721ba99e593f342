#include "koh.hpp"

#include <cmath>

#include "design.hpp"

namespace kohdesign::koh {

namespace {

constexpr double kVarianceTol = 1e-10;

MatrixXd join_xu(const MatrixXd& X, const MatrixXd& U) {
  MatrixXd Z(X.rows(), X.cols() + U.cols());
  Z << X, U;
  return Z;
}

MatrixXd broadcast_u(const MatrixXd& X, const VectorXd& u) {
  MatrixXd Z(X.rows(), X.cols() + u.size());
  Z.leftCols(X.cols()) = X;
  Z.rightCols(u.size()) = u.transpose().replicate(X.rows(), 1);
  return Z;
}

double log_beta_density(double u, double a, double b) {
  if (!(u > 0.0) || !(u < 1.0)) return -std::numeric_limits<double>::infinity();
  return (a - 1.0) * std::log(u) + (b - 1.0) * std::log(1.0 - u) +
         std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double logit(double u) {
  const double c = std::clamp(u, 1e-12, 1.0 - 1e-12);
  return std::log(c / (1.0 - c));
}

}  // namespace

gp::GpFit fit_surrogate(const SimData& sim, const FitOptions& opts) {
  if (sim.X.rows() != sim.U.rows() || sim.X.rows() != sim.y.size()) {
    throw InvalidArgument("fit_surrogate: inconsistent simulator data");
  }
  gp::MapOptions mopts;
  mopts.theta_prior = opts.priors.theta_m;
  mopts.fit_g = false;
  mopts.fixed_g = 0.0;
  mopts.jitter = opts.jitter;
  mopts.n_starts = opts.n_starts;
  mopts.seed = seed_stream(opts.seed, 1);
  mopts.theta_init = opts.theta_m_init;
  mopts.nm = opts.nm;
  return gp::map_fit(join_xu(sim.X, sim.U), sim.y, mopts);
}

double u_objective(const gp::GpFit& surrogate, const FieldData& field,
                   const Priors& priors, double jitter, const VectorXd& u,
                   const VectorXd& theta_b, double g) {
  const Eigen::Index p = field.X.cols();
  const MatrixXd Zf = broadcast_u(field.X, u);
  const VectorXd resid =
      field.y - kernels::cross_cov(Zf, surrogate.X, surrogate.cfg.theta) * surrogate.alpha;

  kernels::KernelConfig cfg;
  cfg.theta = theta_b;
  cfg.g = g;
  cfg.jitter = jitter;
  double obj;
  try {
    obj = gp::log_likelihood(gp::fit_gp(field.X, resid, cfg));
  } catch (const NumericError&) {
    return -std::numeric_limits<double>::infinity();
  }
  for (Eigen::Index l = 0; l < p; ++l) obj += priors.theta_b.log_density(theta_b[l]);
  obj += priors.g_b.log_density(g);
  for (Eigen::Index c = 0; c < u.size(); ++c) {
    obj += log_beta_density(u[c], priors.u_beta_a, priors.u_beta_b);
  }
  return obj;
}

UEstimate estimate_u(const gp::GpFit& surrogate, const FieldData& field,
                     const FitOptions& opts) {
  if (field.X.rows() == 0) throw InvalidArgument("estimate_u: no field data");
  const Eigen::Index p = field.X.cols();
  const Eigen::Index s = surrogate.X.cols() - p;
  if (s <= 0) throw InvalidArgument("estimate_u: surrogate has no calibration inputs");

  // Search space: [logit(u) (s), log theta_b (p), log g], so every trial stays
  // feasible without constraint handling.
  const Eigen::Index k = s + p + 1;
  const auto unpack = [&](const VectorXd& z, VectorXd& u, VectorXd& tb, double& g) {
    u.resize(s);
    for (Eigen::Index c = 0; c < s; ++c) u[c] = sigmoid(z[c]);
    tb = z.segment(s, p).array().exp();
    g = std::exp(z[k - 1]);
  };
  const auto neg_obj = [&](const VectorXd& z) -> double {
    VectorXd u, tb;
    double g;
    unpack(z, u, tb, g);
    return -u_objective(surrogate, field, opts.priors, opts.jitter, u, tb, g);
  };

  VectorXd base(k);
  base.head(s).setZero();  // u = 0.5, the Beta prior mode
  base.segment(s, p).setConstant(std::log(opts.priors.theta_b.mean()));
  base[k - 1] = std::log(std::max(opts.priors.g_b.mean(), 1e-8));

  std::vector<VectorXd> starts;
  if (opts.u_init) {  // incumbent from the previous sequential round
    VectorXd warm = base;
    for (Eigen::Index c = 0; c < s; ++c) warm[c] = logit((*opts.u_init)[c]);
    if (opts.theta_b_init) warm.segment(s, p) = opts.theta_b_init->array().log();
    if (opts.g_init) warm[k - 1] = std::log(std::max(*opts.g_init, 1e-10));
    starts.push_back(warm);
  }
  starts.push_back(base);
  if (static_cast<int>(starts.size()) < opts.n_starts) {
    Rng rng(seed_stream(opts.seed, 2));
    const int extra = opts.n_starts - static_cast<int>(starts.size());
    const MatrixXd pts = design::lhs(extra, static_cast<int>(k), rng);
    for (int i = 0; i < extra; ++i) {
      VectorXd z = base;
      for (Eigen::Index c = 0; c < s; ++c) z[c] = logit(0.02 + 0.96 * pts(i, c));
      for (Eigen::Index j = s; j < k; ++j) z[j] += 3.0 * (pts(i, j) - 0.5);
      starts.push_back(z);
    }
  }

  double best_f = std::numeric_limits<double>::infinity();
  VectorXd best_z = starts.front();
  for (const VectorXd& z0 : starts) {
    const auto res = optimize::nelder_mead(neg_obj, z0, opts.nm);
    if (res.f < best_f) {
      best_f = res.f;
      best_z = res.x;
    }
  }
  if (!std::isfinite(best_f)) throw NumericError("estimate_u: all multi-starts failed");

  UEstimate est;
  VectorXd tb;
  double g;
  unpack(best_z, est.u_hat, tb, g);
  est.objective = -best_f;
  est.cfg_b.theta = tb;
  est.cfg_b.g = g;
  est.cfg_b.jitter = opts.jitter;

  // Profiled bias scale at the optimum.
  const MatrixXd Zf = broadcast_u(field.X, est.u_hat);
  const VectorXd resid =
      field.y - kernels::cross_cov(Zf, surrogate.X, surrogate.cfg.theta) * surrogate.alpha;
  est.nu_b = gp::fit_gp(field.X, resid, est.cfg_b).nu;
  return est;
}

KohFit assemble(FieldData field, SimData sim, kernels::KernelConfig cfg_m,
                double nu_m, kernels::KernelConfig cfg_b, double nu_b,
                VectorXd u_hat) {
  KohFit fit;
  fit.p = sim.X.cols();
  fit.s = sim.U.cols();
  if (field.X.rows() > 0 && field.X.cols() != fit.p) {
    throw InvalidArgument("assemble: field dimension mismatch");
  }
  if (u_hat.size() != fit.s) throw InvalidArgument("assemble: u_hat dimension mismatch");
  cfg_m.validate(fit.d());
  if (fit.n_f() >= 0) cfg_b.validate(fit.p);
  if (!(nu_m > 0.0) || !(nu_b >= 0.0)) throw InvalidArgument("assemble: bad variance scales");

  fit.Xf = std::move(field.X);
  fit.yf = std::move(field.y);
  fit.Xm = std::move(sim.X);
  fit.Um = std::move(sim.U);
  fit.ym = std::move(sim.y);
  fit.cfg_m = std::move(cfg_m);
  fit.cfg_b = std::move(cfg_b);
  fit.nu_m = nu_m;
  fit.nu_b = nu_b;
  fit.u_hat = std::move(u_hat);

  const Eigen::Index nf = fit.n_f(), nm = fit.n_m(), n = fit.n();
  fit.Z.resize(n, fit.d());
  if (nf > 0) fit.Z.topRows(nf) = broadcast_u(fit.Xf, fit.u_hat);
  fit.Z.bottomRows(nm) << fit.Xm, fit.Um;

  const MatrixXd Km = kernels::cross_cov(fit.Z, fit.Z, fit.cfg_m.theta);
  const MatrixXd Kb = nf > 0 ? kernels::cross_cov(fit.Xf, fit.Xf, fit.cfg_b.theta)
                             : MatrixXd();

  // Jitter ladder on the joint covariance; the bias nugget usually keeps the
  // field block well conditioned, but replicated field sites make the jitter
  // load-bearing for the simulator block.
  const double ladder[] = {fit.cfg_m.jitter, 1e-6, 1e-4};
  for (double eps : ladder) {
    if (eps < fit.cfg_m.jitter) continue;
    MatrixXd sigma = nu_m * Km;
    sigma.diagonal().array() += nu_m * eps;
    if (nf > 0) {
      sigma.topLeftCorner(nf, nf) += nu_b * Kb;
      sigma.topLeftCorner(nf, nf).diagonal().array() += nu_b * (fit.cfg_b.g + eps);
    }
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) continue;
    fit.joint_chol = std::move(llt);
    fit.joint_jitter = eps;
    VectorXd y(n);
    y << fit.yf, fit.ym;
    fit.joint_alpha = fit.joint_chol.solve(y);
    return fit;
  }
  throw NumericError("assemble: joint covariance not positive definite after jitter ladder");
}

KohFit fit_koh(const FieldData& field, const SimData& sim, const FitOptions& opts) {
  if (field.X.rows() == 0) throw InvalidArgument("fit_koh: field data required");
  const gp::GpFit surrogate = fit_surrogate(sim, opts);
  const UEstimate est = estimate_u(surrogate, field, opts);
  return assemble(field, sim, surrogate.cfg, surrogate.nu, est.cfg_b, est.nu_b, est.u_hat);
}

Prediction predict_field(const KohFit& fit, const MatrixXd& Xstar) {
  if (Xstar.cols() != fit.p) throw InvalidArgument("predict_field: dimension mismatch");
  const Eigen::Index nf = fit.n_f(), m = Xstar.rows();

  const MatrixXd Zstar = broadcast_u(Xstar, fit.u_hat);
  MatrixXd C = fit.nu_m * kernels::cross_cov(fit.Z, Zstar, fit.cfg_m.theta);  // n x m
  if (nf > 0) {
    C.topRows(nf) += fit.nu_b * kernels::cross_cov(fit.Xf, Xstar, fit.cfg_b.theta);
  }

  Prediction out;
  out.mean = C.transpose() * fit.joint_alpha;
  const MatrixXd V = fit.joint_chol.matrixL().solve(C);
  out.var.resize(m);
  const double prior_var = fit.nu_m + fit.nu_b;  // latent self-covariance at a new x
  const double tol = kVarianceTol * std::max(1.0, prior_var);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double v = prior_var - V.col(j).squaredNorm();
    if (v < -tol) {
      throw NumericError("predict_field: negative variance signals a broken factorization");
    }
    out.var[j] = std::max(v, 0.0);
  }
  return out;
}

}  // namespace kohdesign::koh
