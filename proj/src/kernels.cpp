#include "kernels.hpp"

#include <cmath>

namespace kohdesign::kernels {

void KernelConfig::validate(Eigen::Index dim) const {
  if (theta.size() != dim) {
    throw InvalidArgument("kernel config has " + std::to_string(theta.size()) +
                          " lengthscales, expected " + std::to_string(dim));
  }
  for (Eigen::Index l = 0; l < theta.size(); ++l) {
    if (!(theta[l] > 0.0) || !std::isfinite(theta[l])) {
      throw InvalidArgument("lengthscale " + std::to_string(l) + " must be positive and finite");
    }
  }
  if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidArgument("nugget must be >= 0");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw InvalidArgument("jitter must be >= 0");
}

double erf(double x) {
  // glibc's std::erf is correctly rounded, which comfortably meets the 1e-12
  // accuracy contract; the test suite checks it against an independent series.
  return std::erf(x);
}

double kernel_value(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b,
                    const VectorXd& theta) {
  double q = 0.0;
  for (Eigen::Index l = 0; l < theta.size(); ++l) {
    const double d = a[l] - b[l];
    q += d * d / theta[l];
  }
  return std::exp(-q);
}

double kernel_grad(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                   const Eigen::Ref<const Eigen::RowVectorXd>& b,
                   const VectorXd& theta, Eigen::Index l) {
  return -2.0 * (a[l] - b[l]) / theta[l] * kernel_value(a, b, theta);
}

MatrixXd cov_matrix(const MatrixXd& X, const KernelConfig& cfg) {
  cfg.validate(X.cols());
  const Eigen::Index n = X.rows();
  MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0 + cfg.g + cfg.jitter;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = kernel_value(X.row(i), X.row(j), cfg.theta);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

MatrixXd cross_cov(const MatrixXd& A, const MatrixXd& B, const VectorXd& theta) {
  if (A.cols() != B.cols() || A.cols() != theta.size()) {
    throw InvalidArgument("cross_cov: dimension mismatch");
  }
  MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      K(i, j) = kernel_value(A.row(i), B.row(j), theta);
    }
  }
  return K;
}

}  // namespace kohdesign::kernels
