#include "gp.hpp"

#include <cmath>

#include "design.hpp"

namespace kohdesign::gp {

namespace {

constexpr double kNuFloor = 1e-12;
constexpr double kVarianceTol = 1e-10;  // allowed negativity before erroring

}  // namespace

double GammaPrior::log_density(double t) const {
  if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(t) - rate * t;
}

GpFit fit_gp(const MatrixXd& X, const VectorXd& y, kernels::KernelConfig cfg) {
  if (X.rows() != y.size()) throw InvalidArgument("fit_gp: X rows and y length differ");
  if (X.rows() == 0) throw InvalidArgument("fit_gp: empty design");
  cfg.validate(X.cols());

  const double ladder[] = {cfg.jitter, 1e-6, 1e-4};
  GpFit fit;
  for (double eps : ladder) {
    if (eps < cfg.jitter) continue;
    kernels::KernelConfig trial = cfg;
    trial.jitter = eps;
    const MatrixXd K = kernels::cov_matrix(X, trial);
    Eigen::LLT<MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) continue;

    fit.X = X;
    fit.y = y;
    fit.cfg = trial;
    fit.jitter_used = eps;
    fit.chol = std::move(llt);
    fit.alpha = fit.chol.solve(y);
    fit.log_det = 2.0 * fit.chol.matrixLLT().diagonal().array().log().sum();
    fit.nu = std::max(y.dot(fit.alpha) / static_cast<double>(X.rows()), kNuFloor);
    return fit;
  }
  throw NumericError("fit_gp: covariance not positive definite after jitter ladder");
}

double log_likelihood(const GpFit& fit) {
  const double n = static_cast<double>(fit.n());
  return -0.5 * n * (std::log(2.0 * M_PI) + std::log(fit.nu) + 1.0) - 0.5 * fit.log_det;
}

Prediction predict(const GpFit& fit, const MatrixXd& Xstar) {
  if (Xstar.cols() != fit.X.cols()) throw InvalidArgument("predict: dimension mismatch");
  const MatrixXd Kstar = kernels::cross_cov(Xstar, fit.X, fit.cfg.theta);
  Prediction out;
  out.mean = Kstar * fit.alpha;
  // Unit-scale variance via one triangular solve per test point.
  const MatrixXd V = fit.chol.matrixL().solve(Kstar.transpose());
  out.var.resize(Xstar.rows());
  for (Eigen::Index j = 0; j < Xstar.rows(); ++j) {
    double s2 = 1.0 - V.col(j).squaredNorm();
    if (s2 < -kVarianceTol) {
      throw NumericError("predict: negative variance " + std::to_string(s2) +
                         " signals a broken factorization");
    }
    out.var[j] = fit.nu * std::max(s2, 0.0);
  }
  return out;
}

double map_objective(const MatrixXd& X, const VectorXd& y, const MapOptions& opts,
                     const VectorXd& theta, double g) {
  kernels::KernelConfig cfg;
  cfg.theta = theta;
  cfg.g = g;
  cfg.jitter = opts.jitter;
  double obj;
  try {
    obj = log_likelihood(fit_gp(X, y, cfg));
  } catch (const NumericError&) {
    return -std::numeric_limits<double>::infinity();
  }
  for (Eigen::Index l = 0; l < theta.size(); ++l) obj += opts.theta_prior.log_density(theta[l]);
  if (opts.fit_g) obj += opts.g_prior.log_density(g);
  return obj;
}

GpFit map_fit(const MatrixXd& X, const VectorXd& y, const MapOptions& opts) {
  const Eigen::Index d = X.cols();
  const Eigen::Index k = d + (opts.fit_g ? 1 : 0);  // log theta (+ log g)

  const auto unpack_theta = [&](const VectorXd& z) -> VectorXd {
    return z.head(d).array().exp();
  };
  const auto unpack_g = [&](const VectorXd& z) -> double {
    return opts.fit_g ? std::exp(z[d]) : opts.fixed_g;
  };
  const auto neg_obj = [&](const VectorXd& z) -> double {
    return -map_objective(X, y, opts, unpack_theta(z), unpack_g(z));
  };

  // Multi-start initializations: warm start (if any), the prior mean, and
  // LHS jitter around the prior mean on the log scale.
  std::vector<VectorXd> starts;
  VectorXd base(k);
  base.head(d).setConstant(std::log(opts.theta_prior.mean()));
  if (opts.fit_g) base[d] = std::log(std::max(opts.g_prior.mean(), 1e-8));
  if (opts.theta_init) {
    VectorXd warm = base;
    warm.head(d) = opts.theta_init->array().log();
    if (opts.fit_g && opts.g_init) warm[d] = std::log(std::max(*opts.g_init, 1e-10));
    starts.push_back(warm);
  }
  starts.push_back(base);
  if (static_cast<int>(starts.size()) < opts.n_starts) {
    Rng rng(seed_stream(opts.seed, 0x6d6170666974ULL));  // stream tag for map_fit
    const int extra = opts.n_starts - static_cast<int>(starts.size());
    const MatrixXd jit = design::lhs(extra, static_cast<int>(k), rng);
    for (int i = 0; i < extra; ++i) {
      // Spread factors of roughly e^{-1.5} .. e^{+1.5} around the prior mean.
      starts.push_back(base + (3.0 * (jit.row(i).transpose().array() - 0.5)).matrix());
    }
  }

  double best_f = std::numeric_limits<double>::infinity();
  VectorXd best_z = starts.front();
  for (const VectorXd& z0 : starts) {
    const auto res = optimize::nelder_mead(neg_obj, z0, opts.nm);
    // nelder_mead never returns worse than its own start, so taking the best
    // over runs dominates every initialization.
    if (res.f < best_f) {
      best_f = res.f;
      best_z = res.x;
    }
  }
  if (!std::isfinite(best_f)) {
    throw NumericError("map_fit: all multi-start optimizations failed");
  }

  kernels::KernelConfig cfg;
  cfg.theta = unpack_theta(best_z);
  cfg.g = unpack_g(best_z);
  cfg.jitter = opts.jitter;
  return fit_gp(X, y, cfg);
}

}  // namespace kohdesign::gp
