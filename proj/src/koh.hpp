#pragma once

// Two-stage (modularized) Kennedy-O'Hagan calibration model:
//
//   y^F(x) = y^M(x, u*) + b(x) + noise
//
// Stage 1 fits a GP surrogate to simulator runs over the joint (x, u) space.
// Stage 2 estimates the calibration input u by MAP: for a trial u, the
// surrogate mean at [X_F, u] is subtracted from the field responses and a
// bias GP (lengthscales theta_b, nugget g absorbing the noise) is fitted to
// the residuals; u, theta_b and g maximize the resulting posterior.
//
// The two processes are then combined into one joint Gaussian covariance over
// all field and simulator observations, which drives field prediction and the
// integrated variance criterion.

#include "gp.hpp"

namespace kohdesign::koh {

struct Priors {
  gp::GammaPrior theta_m{1.5, 2.0};  // surrogate lengthscales (each coordinate)
  gp::GammaPrior theta_b{1.5, 5.0};  // bias lengthscales
  gp::GammaPrior g_b{1.5, 7.0};      // bias nugget (relative noise variance)
  double u_beta_a = 2.0;             // Beta prior on each coordinate of u
  double u_beta_b = 2.0;
};

struct FitOptions {
  Priors priors;
  int n_starts = 5;
  double jitter = 1e-8;
  std::uint64_t seed = 0;
  std::optional<VectorXd> theta_m_init;  // warm start for the surrogate fit
  std::optional<VectorXd> u_init;        // incumbent u_hat from the previous round
  std::optional<VectorXd> theta_b_init;
  std::optional<double> g_init;
  optimize::NelderMeadOptions nm;
};

struct FieldData {
  MatrixXd X;  // n_f x p
  VectorXd y;
};

struct SimData {
  MatrixXd X;  // n_m x p
  MatrixXd U;  // n_m x s
  VectorXd y;
};

struct KohFit {
  // Data
  MatrixXd Xf;
  VectorXd yf;
  MatrixXd Xm, Um;
  VectorXd ym;
  Eigen::Index p = 0, s = 0;

  // Hyperparameters
  kernels::KernelConfig cfg_m;  // p+s lengthscales, zero nugget
  kernels::KernelConfig cfg_b;  // p lengthscales, nugget g > 0 (noise = nu_b * g)
  double nu_m = 1.0, nu_b = 0.0;
  VectorXd u_hat;

  // Joint covariance structures over the stacked [field; simulator] rows.
  MatrixXd Z;                       // (n_f+n_m) x (p+s): [Xf, u_hat; Xm, Um]
  Eigen::LLT<MatrixXd> joint_chol;  // of Sigma
  VectorXd joint_alpha;             // Sigma^{-1} [yf; ym]
  double joint_jitter = 1e-8;

  Eigen::Index n_f() const { return Xf.rows(); }
  Eigen::Index n_m() const { return Xm.rows(); }
  Eigen::Index n() const { return n_f() + n_m(); }
  Eigen::Index d() const { return p + s; }
};

// Stage 1: MAP surrogate fit on the joint (x, u) inputs with zero nugget.
gp::GpFit fit_surrogate(const SimData& sim, const FitOptions& opts);

struct UEstimate {
  VectorXd u_hat;
  kernels::KernelConfig cfg_b;
  double nu_b = 0.0;
  double objective = 0.0;  // log posterior at the optimum
};

// Stage 2: MAP over (u, theta_b, g) given a fitted surrogate.
UEstimate estimate_u(const gp::GpFit& surrogate, const FieldData& field,
                     const FitOptions& opts);

// Joint-covariance assembly from explicit hyperparameters (no optimization);
// also the building block for synthetic fits in tests.
KohFit assemble(FieldData field, SimData sim, kernels::KernelConfig cfg_m,
                double nu_m, kernels::KernelConfig cfg_b, double nu_b,
                VectorXd u_hat);

// Full pipeline: fit_surrogate + estimate_u + assemble.
KohFit fit_koh(const FieldData& field, const SimData& sim, const FitOptions& opts);

struct Prediction {
  VectorXd mean;
  VectorXd var;
};

// Field-response prediction at new x locations under the joint model.
Prediction predict_field(const KohFit& fit, const MatrixXd& Xstar);

// Log posterior of stage 2 at explicit values (exposed for tests).
double u_objective(const gp::GpFit& surrogate, const FieldData& field,
                   const Priors& priors, double jitter, const VectorXd& u,
                   const VectorXd& theta_b, double g);

}  // namespace kohdesign::koh
