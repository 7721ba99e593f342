#pragma once

// Zero-mean Gaussian-process regression with the separable Gaussian kernel and
// the process variance profiled out:
//
//   y ~ N(0, nu * Ktil),   Ktil = k(X, X) + (g + jitter) I,
//   nu_hat = y' Ktil^{-1} y / n.
//
// Hyperparameters are chosen by MAP under independent Gamma priors using
// multi-start Nelder-Mead on the log scale.

#include <optional>

#include "kernels.hpp"
#include "optimize.hpp"

namespace kohdesign::gp {

struct GammaPrior {
  double shape = 1.5;
  double rate = 1.0;  // density ~ t^(shape-1) exp(-rate t)

  double mean() const { return shape / rate; }
  double log_density(double t) const;
};

struct GpFit {
  MatrixXd X;
  VectorXd y;
  kernels::KernelConfig cfg;  // lengthscales/nugget actually used
  double jitter_used = 0.0;   // final rung of the jitter ladder
  double nu = 1.0;            // profiled process variance
  Eigen::LLT<MatrixXd> chol;  // Cholesky of the unit-scale Ktil
  VectorXd alpha;             // Ktil^{-1} y
  double log_det = 0.0;       // log |Ktil|

  Eigen::Index n() const { return X.rows(); }
};

// Factorizes at fixed hyperparameters.  On Cholesky failure the jitter is
// escalated through {cfg.jitter, 1e-6, 1e-4}; past the ladder, NumericError.
GpFit fit_gp(const MatrixXd& X, const VectorXd& y, kernels::KernelConfig cfg);

// Concentrated log marginal likelihood at the fit's hyperparameters,
// including constants (equals the dense MVN log-density at nu = nu_hat).
double log_likelihood(const GpFit& fit);

struct Prediction {
  VectorXd mean;
  VectorXd var;  // latent-surface variance, nu * (1 - k*' Ktil^{-1} k*)
};

Prediction predict(const GpFit& fit, const MatrixXd& Xstar);

struct MapOptions {
  GammaPrior theta_prior;           // applied independently to each lengthscale
  GammaPrior g_prior;               // used only when fit_g
  bool fit_g = false;
  double fixed_g = 0.0;             // nugget when !fit_g
  double jitter = 1e-8;
  int n_starts = 5;
  std::uint64_t seed = 0;           // for the extra multi-start locations
  std::optional<VectorXd> theta_init;  // warm start (natural scale)
  std::optional<double> g_init;
  optimize::NelderMeadOptions nm;
};

// MAP hyperparameter fit.  The returned objective is guaranteed to be at
// least as good as every multi-start initialization.
GpFit map_fit(const MatrixXd& X, const VectorXd& y, const MapOptions& opts);

// Log posterior (likelihood + priors) evaluated at given hyperparameters;
// exposed for tests and for the multi-start guarantee.
double map_objective(const MatrixXd& X, const VectorXd& y, const MapOptions& opts,
                     const VectorXd& theta, double g);

}  // namespace kohdesign::gp
