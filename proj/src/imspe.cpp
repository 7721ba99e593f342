#include "imspe.hpp"

#include <cmath>

namespace kohdesign::imspe {

namespace {

constexpr double kSchurTol = 1e-12;
constexpr double kProximityTol = 1e-6;
const double kSqrtPi = std::sqrt(M_PI);

using kernels::erf;

// Symmetrized inverse from a Cholesky factorization (the partitioned-inverse
// identities assume an exactly symmetric inner inverse).
MatrixXd symmetrized_inverse(const Eigen::LLT<MatrixXd>& llt, Eigen::Index n) {
  const MatrixXd inv = llt.solve(MatrixXd::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

// ---------------------------------------------------------------------------
// 1-d entries
// ---------------------------------------------------------------------------

double w_same(double xi, double xj, double theta) {
  const double s2t = std::sqrt(2.0 * theta);
  const double pref = std::sqrt(2.0 * M_PI * theta) / 4.0 *
                      std::exp(-(xi - xj) * (xi - xj) / (2.0 * theta));
  return pref * (erf((2.0 - xi - xj) / s2t) + erf((xi + xj) / s2t));
}

double w_mixed(double xm, double xb, double theta_m, double theta_b) {
  const double c = 1.0 / theta_m + 1.0 / theta_b;
  const double m = (theta_b * xm + theta_m * xb) / (theta_m + theta_b);
  const double sc = std::sqrt(c);
  const double pref = std::exp(-(xm - xb) * (xm - xb) / (theta_m + theta_b));
  return pref * 0.5 * kSqrtPi / sc * (erf(sc * m) - erf(sc * (m - 1.0)));
}

double dw_same(double a, double xt, double theta) {
  const double s2t = std::sqrt(2.0 * theta);
  const double e = std::exp(-(a - xt) * (a - xt) / (2.0 * theta));
  const double bracket = erf((2.0 - a - xt) / s2t) + erf((a + xt) / s2t);
  const double term1 = (a - xt) * bracket / (2.0 * std::sqrt(theta));
  const double term2 = 0.5 * std::sqrt(2.0 / M_PI) *
                       (std::exp(-(a + xt) * (a + xt) / (2.0 * theta)) -
                        std::exp(-(2.0 - a - xt) * (2.0 - a - xt) / (2.0 * theta)));
  return std::sqrt(M_PI / 2.0) * e * (term1 + term2);
}

double dw_same_diag(double xt, double theta) {
  // Total derivative of w_same(xt, xt); the prefactors collapse completely.
  return std::exp(-2.0 * xt * xt / theta) -
         std::exp(-2.0 * (xt - 1.0) * (xt - 1.0) / theta);
}

double dw_mixed(double xt, double xb, double theta_m, double theta_b) {
  const double c = 1.0 / theta_m + 1.0 / theta_b;
  const double m = (theta_b * xt + theta_m * xb) / (theta_m + theta_b);
  const double sc = std::sqrt(c);
  const double pref = std::exp(-(xt - xb) * (xt - xb) / (theta_m + theta_b));
  return pref / (theta_m + theta_b) *
         (kSqrtPi / sc * (xb - xt) * (erf(sc * m) - erf(sc * (m - 1.0))) +
          theta_b * (std::exp(-c * m * m) - std::exp(-c * (m - 1.0) * (m - 1.0))));
}

// ---------------------------------------------------------------------------
// Full W matrices (oracle/diagnostic path)
// ---------------------------------------------------------------------------

WSet build_w_set(const koh::KohFit& fit, const VectorXd& cand) {
  if (cand.size() != fit.d()) throw InvalidArgument("build_w_set: candidate dimension");
  const Eigen::Index n = fit.n(), nf = fit.n_f(), p = fit.p, s = fit.s, na = n + 1;
  const VectorXd& tm = fit.cfg_m.theta;
  const VectorXd& tb = fit.cfg_b.theta;

  // Augmented design rows (x-part and u-part) with the candidate last.
  MatrixXd Zx(na, p), Zu(na, std::max<Eigen::Index>(s, 0));
  Zx.topRows(n) = fit.Z.leftCols(p);
  Zx.row(n) = cand.head(p).transpose();
  if (s > 0) {
    Zu.topRows(n) = fit.Z.rightCols(s);
    Zu.row(n) = cand.tail(s).transpose();
  }

  // u-space kernel factor of every row against u_hat (1 for field rows).
  VectorXd ku = VectorXd::Ones(na);
  for (Eigen::Index i = 0; i < na; ++i) {
    double q = 0.0;
    for (Eigen::Index l = 0; l < s; ++l) {
      const double dlt = Zu(i, l) - fit.u_hat[l];
      q += dlt * dlt / tm[p + l];
    }
    ku[i] = std::exp(-q);
  }

  WSet w;
  w.wmm.setZero(na, na);
  w.wmb.setZero(na, na);
  w.wbb.setZero(na, na);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = i; j < na; ++j) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p; ++l) prod *= w_same(Zx(i, l), Zx(j, l), tm[l]);
      w.wmm(i, j) = w.wmm(j, i) = prod * ku[i] * ku[j];
    }
    for (Eigen::Index j = 0; j < nf; ++j) {  // columns indexed by field rows only
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p; ++l) prod *= w_mixed(Zx(i, l), fit.Xf(j, l), tm[l], tb[l]);
      w.wmb(i, j) = prod * ku[i];
    }
  }
  for (Eigen::Index i = 0; i < nf; ++i) {
    for (Eigen::Index j = i; j < nf; ++j) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p; ++l) prod *= w_same(fit.Xf(i, l), fit.Xf(j, l), tb[l]);
      w.wbb(i, j) = w.wbb(j, i) = prod;
    }
  }

  // Derivatives: only the candidate row/column moves.
  w.dwmm.assign(static_cast<std::size_t>(p + s), MatrixXd::Zero(na, na));
  w.dwmb.assign(static_cast<std::size_t>(p + s), MatrixXd::Zero(na, na));
  for (Eigen::Index m = 0; m < p; ++m) {
    MatrixXd& dmm = w.dwmm[static_cast<std::size_t>(m)];
    MatrixXd& dmb = w.dwmb[static_cast<std::size_t>(m)];
    for (Eigen::Index i = 0; i < n; ++i) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        if (l != m) prod *= w_same(Zx(i, l), Zx(n, l), tm[l]);
      }
      const double v = prod * dw_same(Zx(i, m), Zx(n, m), tm[m]) * ku[i] * ku[n];
      dmm(i, n) = dmm(n, i) = v;
    }
    double prod_cc = 1.0;
    for (Eigen::Index l = 0; l < p; ++l) {
      if (l != m) prod_cc *= w_same(Zx(n, l), Zx(n, l), tm[l]);
    }
    dmm(n, n) = prod_cc * dw_same_diag(Zx(n, m), tm[m]) * ku[n] * ku[n];
    for (Eigen::Index j = 0; j < nf; ++j) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        if (l != m) prod *= w_mixed(Zx(n, l), fit.Xf(j, l), tm[l], tb[l]);
      }
      dmb(n, j) = prod * dw_mixed(Zx(n, m), fit.Xf(j, m), tm[m], tb[m]) * ku[n];
    }
  }
  for (Eigen::Index m = 0; m < s; ++m) {
    // u-coordinate: every affected entry carries exactly one ku[n] factor
    // (two on the corner), so the derivative is a rescaling.  It vanishes
    // identically at u_tilde = u_hat.
    const double fac = -2.0 * (Zu(n, m) - fit.u_hat[m]) / tm[p + m];
    MatrixXd& dmm = w.dwmm[static_cast<std::size_t>(p + m)];
    MatrixXd& dmb = w.dwmb[static_cast<std::size_t>(p + m)];
    for (Eigen::Index i = 0; i < n; ++i) {
      dmm(i, n) = dmm(n, i) = w.wmm(i, n) * fac;
    }
    dmm(n, n) = w.wmm(n, n) * 2.0 * fac;
    for (Eigen::Index j = 0; j < nf; ++j) dmb(n, j) = w.wmb(n, j) * fac;
  }
  return w;
}

MatrixXd augmented_sigma(const koh::KohFit& fit, const VectorXd& cand) {
  const Eigen::Index n = fit.n(), nf = fit.n_f(), na = n + 1;
  MatrixXd Zaug(na, fit.d());
  Zaug.topRows(n) = fit.Z;
  Zaug.row(n) = cand.transpose();

  MatrixXd sigma = fit.nu_m * kernels::cross_cov(Zaug, Zaug, fit.cfg_m.theta);
  sigma.diagonal().array() += fit.nu_m * fit.joint_jitter;
  if (nf > 0) {
    sigma.topLeftCorner(nf, nf) +=
        fit.nu_b * kernels::cross_cov(fit.Xf, fit.Xf, fit.cfg_b.theta);
    sigma.topLeftCorner(nf, nf).diagonal().array() +=
        fit.nu_b * (fit.cfg_b.g + fit.joint_jitter);
  }
  return sigma;
}

// ---------------------------------------------------------------------------
// KohImspe
// ---------------------------------------------------------------------------

KohImspe::KohImspe(const koh::KohFit& fit)
    : fit_(&fit), n_(fit.n()), nf_(fit.n_f()), p_(fit.p), s_(fit.s) {
  P_ = symmetrized_inverse(fit.joint_chol, n_);

  const VectorXd& tm = fit.cfg_m.theta;
  const VectorXd& tb = fit.cfg_b.theta;
  ku_in_.setOnes(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    double q = 0.0;
    for (Eigen::Index l = 0; l < s_; ++l) {
      const double dlt = fit.Z(i, p_ + l) - fit.u_hat[l];
      q += dlt * dlt / tm[p_ + l];
    }
    ku_in_[i] = std::exp(-q);
  }

  const double nm2 = fit.nu_m * fit.nu_m;
  const double nmb2 = 2.0 * fit.nu_m * fit.nu_b;
  const double nb2 = fit.nu_b * fit.nu_b;
  v_inner_.setZero(n_, n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (Eigen::Index j = i; j < n_; ++j) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p_; ++l) prod *= w_same(fit.Z(i, l), fit.Z(j, l), tm[l]);
      const double v = nm2 * prod * ku_in_[i] * ku_in_[j];
      v_inner_(i, j) += v;
      if (j != i) v_inner_(j, i) += v;
    }
    for (Eigen::Index j = 0; j < nf_; ++j) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p_; ++l) {
        prod *= w_mixed(fit.Z(i, l), fit.Xf(j, l), tm[l], tb[l]);
      }
      v_inner_(i, j) += nmb2 * prod * ku_in_[i];
    }
  }
  for (Eigen::Index i = 0; i < nf_; ++i) {
    for (Eigen::Index j = i; j < nf_; ++j) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < p_; ++l) prod *= w_same(fit_->Xf(i, l), fit_->Xf(j, l), tb[l]);
      v_inner_(i, j) += nb2 * prod;
      if (j != i) v_inner_(j, i) += nb2 * prod;
    }
  }
  v_sym_ = v_inner_ + v_inner_.transpose();
  tr_pv_ = (P_.array() * v_inner_.array()).sum();
}

// Candidate-dependent pieces shared by value() and grad().
struct KohImspe::CandidateWork {
  VectorXd k_tilde;  // n
  VectorXd q;        // P k_tilde
  double b = 0.0;
  double ku_c = 1.0;
  VectorXd vc;   // last column of V (length n)
  VectorXd vr;   // last row of V (length n)
  double vcc = 0.0;
  // Per-dimension 1-d factors, kept for leave-one-out products in grad().
  MatrixXd wfac;  // n x p: w_same(Z(i,l), cand_l; theta_m)
  MatrixXd mfac;  // nf x p: w_mixed(cand_l, Xf(j,l))
  VectorXd cfac;  // p: w_same(cand_l, cand_l)
};

void KohImspe::prepare(const VectorXd& cand, bool with_factors, CandidateWork& w) const {
  const koh::KohFit& fit = *fit_;
  if (cand.size() != fit.d()) throw InvalidArgument("koh_imspe: candidate dimension");
  const VectorXd& tm = fit.cfg_m.theta;
  const VectorXd& tb = fit.cfg_b.theta;

  w.k_tilde.resize(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    w.k_tilde[i] = kernels::kernel_value(fit.Z.row(i), cand.transpose(), tm);
  }
  w.q = P_ * w.k_tilde;
  w.b = fit.nu_m * (1.0 + fit.joint_jitter) -
        fit.nu_m * fit.nu_m * w.k_tilde.dot(w.q);
  if (!(w.b > kSchurTol)) {
    throw CandidateRejected("candidate Schur complement " + std::to_string(w.b) +
                            " below threshold (near-duplicate design row)");
  }

  double qc = 0.0;
  for (Eigen::Index l = 0; l < s_; ++l) {
    const double dlt = cand[p_ + l] - fit.u_hat[l];
    qc += dlt * dlt / tm[p_ + l];
  }
  w.ku_c = std::exp(-qc);

  if (with_factors) {
    w.wfac.resize(n_, p_);
    w.mfac.resize(nf_, p_);
  }
  w.cfac.resize(p_);
  for (Eigen::Index l = 0; l < p_; ++l) w.cfac[l] = w_same(cand[l], cand[l], tm[l]);

  const double nm2 = fit.nu_m * fit.nu_m;
  const double nmb2 = 2.0 * fit.nu_m * fit.nu_b;
  w.vc.resize(n_);
  w.vr.resize(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    double prod = 1.0;
    for (Eigen::Index l = 0; l < p_; ++l) {
      const double f = w_same(fit.Z(i, l), cand[l], tm[l]);
      if (with_factors) w.wfac(i, l) = f;
      prod *= f;
    }
    const double mm = nm2 * prod * ku_in_[i] * w.ku_c;
    w.vc[i] = mm;  // last column: pure Wmm (candidate is not a field column)
    w.vr[i] = mm;
  }
  for (Eigen::Index j = 0; j < nf_; ++j) {
    double prod = 1.0;
    for (Eigen::Index l = 0; l < p_; ++l) {
      const double f = w_mixed(cand[l], fit.Xf(j, l), tm[l], tb[l]);
      if (with_factors) w.mfac(j, l) = f;
      prod *= f;
    }
    w.vr[j] += nmb2 * prod * w.ku_c;
  }
  w.vcc = nm2 * w.cfac.prod() * w.ku_c * w.ku_c;
}

double KohImspe::value(const VectorXd& cand) const {
  CandidateWork w;
  prepare(cand, /*with_factors=*/false, w);
  const double nm = fit_->nu_m;
  // 1'(A o V)1 expanded over the partitioned inverse of Sigma_aug.
  const double s_total = tr_pv_ + (nm * nm / w.b) * w.q.dot(v_inner_ * w.q) -
                         (nm / w.b) * w.q.dot(w.vc + w.vr) + w.vcc / w.b;
  return fit_->nu_m + fit_->nu_b - s_total;
}

VectorXd KohImspe::grad(const VectorXd& cand) const {
  const koh::KohFit& fit = *fit_;
  for (Eigen::Index i = 0; i < n_; ++i) {
    if ((fit.Z.row(i).transpose() - cand).cwiseAbs().maxCoeff() < kProximityTol) {
      throw CandidateRejected("candidate within 1e-6 of an existing design row");
    }
  }
  CandidateWork w;
  prepare(cand, /*with_factors=*/true, w);
  const double nm = fit.nu_m;
  const VectorXd& tm = fit.cfg_m.theta;

  // Last column of the augmented inverse: s_vec = A e_c.
  VectorXd s_in = -(nm / w.b) * w.q;
  const double s_c = 1.0 / w.b;

  // z = (V + V') (A e_c), assembled blockwise.
  VectorXd z_in = v_sym_ * s_in + (w.vc + w.vr) * s_c;
  const double z_c = (w.vc + w.vr).dot(s_in) + 2.0 * w.vcc * s_c;

  VectorXd grad(p_ + s_);
  VectorXd dk(n_), dvc(n_), dvr(n_);
  for (Eigen::Index m = 0; m < p_ + s_; ++m) {
    // d k_tilde / d cand_m for every existing row.
    for (Eigen::Index i = 0; i < n_; ++i) {
      dk[i] = -2.0 * (cand[m] - fit.Z(i, m)) / tm[m] * w.k_tilde[i];
    }
    // r = A [dk; 0].
    const double qdk = w.q.dot(dk);
    const VectorXd r_in = P_ * dk + (nm * nm / w.b) * w.q * qdk;
    const double r_c = -(nm / w.b) * qdk;
    const double term1 = nm * (r_in.dot(z_in) + r_c * z_c);

    // Derivatives of the candidate row/column of V.
    double dvcc;
    if (m < p_) {
      const double nm2 = nm * nm;
      const double nmb2 = 2.0 * nm * fit.nu_b;
      for (Eigen::Index i = 0; i < n_; ++i) {
        double prod = 1.0;
        for (Eigen::Index l = 0; l < p_; ++l) {
          if (l != m) prod *= w.wfac(i, l);
        }
        const double dmm = nm2 * prod * dw_same(fit.Z(i, m), cand[m], tm[m]) *
                           ku_in_[i] * w.ku_c;
        dvc[i] = dmm;
        dvr[i] = dmm;
      }
      for (Eigen::Index j = 0; j < nf_; ++j) {
        double prod = 1.0;
        for (Eigen::Index l = 0; l < p_; ++l) {
          if (l != m) prod *= w.mfac(j, l);
        }
        dvr[j] += nmb2 * prod *
                  dw_mixed(cand[m], fit.Xf(j, m), tm[m], fit.cfg_b.theta[m]) * w.ku_c;
      }
      double prod_cc = 1.0;
      for (Eigen::Index l = 0; l < p_; ++l) {
        if (l != m) prod_cc *= w.cfac[l];
      }
      dvcc = nm2 * prod_cc * dw_same_diag(cand[m], tm[m]) * w.ku_c * w.ku_c;
    } else {
      const double fac = -2.0 * (cand[m] - fit.u_hat[m - p_]) / tm[m];
      dvc = w.vc * fac;
      dvr = w.vr * fac;
      dvcc = w.vcc * 2.0 * fac;
    }
    const double term2 = s_in.dot(dvc + dvr) + s_c * dvcc;
    grad[m] = term1 - term2;
  }
  return grad;
}

BlockInverse KohImspe::block_inverse(const VectorXd& cand) const {
  CandidateWork w;
  prepare(cand, false, w);
  BlockInverse bi;
  bi.k_tilde = std::move(w.k_tilde);
  bi.q = std::move(w.q);
  bi.b = w.b;
  return bi;
}

MatrixXd KohImspe::augmented_inverse(const VectorXd& cand) const {
  const BlockInverse bi = block_inverse(cand);
  const double nm = fit_->nu_m;
  MatrixXd A(n_ + 1, n_ + 1);
  A.topLeftCorner(n_, n_) = P_ + (nm * nm / bi.b) * bi.q * bi.q.transpose();
  A.topRightCorner(n_, 1) = -(nm / bi.b) * bi.q;
  A.bottomLeftCorner(1, n_) = A.topRightCorner(n_, 1).transpose();
  A(n_, n_) = 1.0 / bi.b;
  return A;
}

double koh_imspe(const koh::KohFit& fit, const VectorXd& cand) {
  return KohImspe(fit).value(cand);
}

VectorXd koh_imspe_grad(const koh::KohFit& fit, const VectorXd& cand) {
  return KohImspe(fit).grad(cand);
}

// ---------------------------------------------------------------------------
// MImspe
// ---------------------------------------------------------------------------

MImspe::MImspe(MatrixXd X, kernels::KernelConfig cfg, double nu)
    : X_(std::move(X)), cfg_(std::move(cfg)), nu_(nu) {
  if (!(nu_ > 0.0)) throw InvalidArgument("m_imspe: nu must be positive");
  const Eigen::Index n = X_.rows(), d = X_.cols();
  cfg_.validate(d);

  const double ladder[] = {cfg_.jitter, 1e-6, 1e-4};
  bool ok = false;
  Eigen::LLT<MatrixXd> llt;
  for (double eps : ladder) {
    if (eps < cfg_.jitter) continue;
    kernels::KernelConfig trial = cfg_;
    trial.jitter = eps;
    llt.compute(kernels::cov_matrix(X_, trial));
    if (llt.info() == Eigen::Success) {
      jitter_used_ = eps;
      ok = true;
      break;
    }
  }
  if (!ok) throw NumericError("m_imspe: covariance not positive definite");

  P_ = symmetrized_inverse(llt, n);
  W_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < d; ++l) prod *= w_same(X_(i, l), X_(j, l), cfg_.theta[l]);
      W_(i, j) = W_(j, i) = prod;
    }
  }
  tr_pw_ = (P_.array() * W_.array()).sum();
}

struct MImspe::CandidateWork {
  VectorXd k_tilde, q;
  double b = 0.0;
  VectorXd wc;    // W entries between existing rows and the candidate
  double wcc = 0.0;
  MatrixXd wfac;  // n x d per-dimension factors
  VectorXd cfac;  // d
};

void MImspe::prepare(const VectorXd& cand, bool with_factors, CandidateWork& w) const {
  const Eigen::Index n = X_.rows(), d = X_.cols();
  if (cand.size() != d) throw InvalidArgument("m_imspe: candidate dimension");

  w.k_tilde.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w.k_tilde[i] = kernels::kernel_value(X_.row(i), cand.transpose(), cfg_.theta);
  }
  w.q = P_ * w.k_tilde;
  w.b = 1.0 + cfg_.g + jitter_used_ - w.k_tilde.dot(w.q);
  if (!(w.b > kSchurTol)) {
    throw CandidateRejected("candidate Schur complement below threshold");
  }

  if (with_factors) w.wfac.resize(n, d);
  w.wc.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double prod = 1.0;
    for (Eigen::Index l = 0; l < d; ++l) {
      const double f = w_same(X_(i, l), cand[l], cfg_.theta[l]);
      if (with_factors) w.wfac(i, l) = f;
      prod *= f;
    }
    w.wc[i] = prod;
  }
  w.cfac.resize(d);
  for (Eigen::Index l = 0; l < d; ++l) w.cfac[l] = w_same(cand[l], cand[l], cfg_.theta[l]);
  w.wcc = w.cfac.prod();
}

double MImspe::value(const VectorXd& cand) const {
  CandidateWork w;
  prepare(cand, false, w);
  const double s_total = tr_pw_ + (1.0 / w.b) * w.q.dot(W_ * w.q) -
                         (2.0 / w.b) * w.q.dot(w.wc) + w.wcc / w.b;
  return nu_ * (1.0 - s_total);
}

VectorXd MImspe::grad(const VectorXd& cand) const {
  const Eigen::Index n = X_.rows(), d = X_.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((X_.row(i).transpose() - cand).cwiseAbs().maxCoeff() < kProximityTol) {
      throw CandidateRejected("candidate within 1e-6 of an existing design row");
    }
  }
  CandidateWork w;
  prepare(cand, true, w);

  VectorXd s_in = -(1.0 / w.b) * w.q;
  const double s_c = 1.0 / w.b;
  VectorXd z_in = 2.0 * (W_ * s_in + w.wc * s_c);
  const double z_c = 2.0 * (w.wc.dot(s_in) + w.wcc * s_c);

  VectorXd grad(d), dk(n), dwc(n);
  for (Eigen::Index m = 0; m < d; ++m) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dk[i] = -2.0 * (cand[m] - X_(i, m)) / cfg_.theta[m] * w.k_tilde[i];
    }
    const double qdk = w.q.dot(dk);
    const VectorXd r_in = P_ * dk + (1.0 / w.b) * w.q * qdk;
    const double r_c = -(1.0 / w.b) * qdk;
    const double term1 = r_in.dot(z_in) + r_c * z_c;

    for (Eigen::Index i = 0; i < n; ++i) {
      double prod = 1.0;
      for (Eigen::Index l = 0; l < d; ++l) {
        if (l != m) prod *= w.wfac(i, l);
      }
      dwc[i] = prod * dw_same(X_(i, m), cand[m], cfg_.theta[m]);
    }
    double prod_cc = 1.0;
    for (Eigen::Index l = 0; l < d; ++l) {
      if (l != m) prod_cc *= w.cfac[l];
    }
    const double dwcc = prod_cc * dw_same_diag(cand[m], cfg_.theta[m]);
    const double term2 = 2.0 * s_in.dot(dwc) + s_c * dwcc;
    grad[m] = nu_ * (term1 - term2);
  }
  return grad;
}

double m_imspe(const MatrixXd& X, const kernels::KernelConfig& cfg, double nu,
               const VectorXd& cand) {
  return MImspe(X, cfg, nu).value(cand);
}

VectorXd m_imspe_grad(const MatrixXd& X, const kernels::KernelConfig& cfg, double nu,
                      const VectorXd& cand) {
  return MImspe(X, cfg, nu).grad(cand);
}

}  // namespace kohdesign::imspe
