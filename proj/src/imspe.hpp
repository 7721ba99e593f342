#pragma once

// Closed-form integrated mean-squared prediction error (IMSPE) criteria.
//
// For the joint calibration model the criterion integrates the field
// predictive variance over x in [0,1]^p with the calibration input pinned at
// u_hat, for a design augmented by one candidate [x_tilde, u_tilde]:
//
//   IMSPE = nu_m + nu_b - 1' ( Sigma_aug^{-1} o V ) 1,
//   V     = nu_m^2 Wmm + 2 nu_m nu_b Wmb + nu_b^2 Wbb,
//
// where each W collects 1-d integrals of products of Gaussian kernels over
// [0,1] that have closed forms in erf.  Candidate augmentation enters
// Sigma_aug^{-1} through a rank-one block inverse, and analytic derivatives
// of both factors give the gradient used by the acquisition optimizer.
//
// The classical single-GP criterion (integrating over the full input cube,
// no bias process) is provided alongside for the comparator strategies.

#include "koh.hpp"

namespace kohdesign::imspe {

// --- 1-d integral entries over [0,1] ---------------------------------------
// w_same:  int k(xi, x) k(xj, x) dx with a shared lengthscale.
double w_same(double xi, double xj, double theta);
// w_mixed: int k_m(xm, x) k_b(xb, x) dx with per-factor lengthscales.
double w_mixed(double xm, double xb, double theta_m, double theta_b);
// Derivatives with respect to the candidate coordinate xt:
double dw_same(double a, double xt, double theta);   // d/dxt w_same(a, xt)
double dw_same_diag(double xt, double theta);        // d/dxt w_same(xt, xt)
double dw_mixed(double xt, double xb, double theta_m, double theta_b);  // d/dxt

// --- W matrices over the augmented design -----------------------------------
// Row order: field rows, simulator rows, candidate last.  The derivative
// matrices (one per candidate coordinate) are nonzero only in the last row
// and column; derivatives of Wbb vanish identically and are not materialized.
struct WSet {
  MatrixXd wmm, wmb, wbb;            // (n+1) x (n+1)
  std::vector<MatrixXd> dwmm, dwmb;  // indexed by candidate coordinate (p+s)
};

WSet build_w_set(const koh::KohFit& fit, const VectorXd& cand);

// Candidate block of the partitioned inverse of Sigma_aug.
struct BlockInverse {
  VectorXd k_tilde;  // unit-scale kernel between candidate and existing rows
  VectorXd q;        // Sigma^{-1} k_tilde (symmetrized inverse)
  double b = 0.0;    // Schur complement nu_m (1 + jitter) - nu_m^2 k~' q
};

// Joint covariance over existing rows plus the candidate (test oracle).
MatrixXd augmented_sigma(const koh::KohFit& fit, const VectorXd& cand);

// Per-fit evaluator caching everything candidate-independent: the symmetrized
// inverse of Sigma and the inner blocks of V.
class KohImspe {
 public:
  explicit KohImspe(const koh::KohFit& fit);

  // Integrated variance of the fit as-is (no candidate).
  double current() const { return fit_->nu_m + fit_->nu_b - tr_pv_; }

  // Criterion after augmenting with the candidate.  Throws CandidateRejected
  // when the Schur complement falls below threshold (near-duplicate row).
  double value(const VectorXd& cand) const;

  // Analytic gradient with respect to the candidate coordinates.  Requires
  // the candidate to be at least 1e-6 away (per coordinate, L-inf) from every
  // existing design row; closer points throw CandidateRejected.
  VectorXd grad(const VectorXd& cand) const;

  BlockInverse block_inverse(const VectorXd& cand) const;

  // Full (n+1)^2 inverse assembled from the block formula (test use).
  MatrixXd augmented_inverse(const VectorXd& cand) const;

  const koh::KohFit& fit() const { return *fit_; }

 private:
  struct CandidateWork;
  void prepare(const VectorXd& cand, bool with_factors, CandidateWork& w) const;

  const koh::KohFit* fit_;
  Eigen::Index n_ = 0, nf_ = 0, p_ = 0, s_ = 0;
  MatrixXd P_;        // symmetrized Sigma^{-1}
  MatrixXd v_inner_;  // inner block of V (candidate independent)
  MatrixXd v_sym_;    // v_inner + v_inner'
  VectorXd ku_in_;    // u-space kernel of each row's u against u_hat
  double tr_pv_ = 0.0;
};

// One-shot wrappers (tests and the C API use these; the acquisition loop
// holds a KohImspe to amortize the per-fit work).
double koh_imspe(const koh::KohFit& fit, const VectorXd& cand);
VectorXd koh_imspe_grad(const koh::KohFit& fit, const VectorXd& cand);

// --- Classical single-GP IMSPE over [0,1]^d ---------------------------------
class MImspe {
 public:
  MImspe(MatrixXd X, kernels::KernelConfig cfg, double nu);

  double current() const { return nu_ * (1.0 - tr_pw_); }
  double value(const VectorXd& cand) const;
  VectorXd grad(const VectorXd& cand) const;

 private:
  struct CandidateWork;
  void prepare(const VectorXd& cand, bool with_factors, CandidateWork& w) const;

  MatrixXd X_;
  kernels::KernelConfig cfg_;
  double nu_ = 1.0;
  double jitter_used_ = 0.0;
  MatrixXd P_;  // symmetrized Ktil^{-1}
  MatrixXd W_;  // inner W
  double tr_pw_ = 0.0;
};

double m_imspe(const MatrixXd& X, const kernels::KernelConfig& cfg, double nu,
               const VectorXd& cand);
VectorXd m_imspe_grad(const MatrixXd& X, const kernels::KernelConfig& cfg, double nu,
                      const VectorXd& cand);

}  // namespace kohdesign::imspe
