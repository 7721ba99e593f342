#pragma once

// Anisotropic Gaussian correlation kernel shared by every surface in the
// toolkit:
//
//   k(a, b) = exp(-sum_l (a_l - b_l)^2 / theta_l)       (unit variance)
//
// with a nugget g added when both arguments are the same observation and a
// small jitter added to self-covariance diagonals for conditioning.  The
// process variance is profiled out elsewhere, so everything here is on the
// unit scale.

#include "common.hpp"

namespace kohdesign::kernels {

struct KernelConfig {
  VectorXd theta;        // per-dimension lengthscales (squared-distance denominators), all > 0
  double g = 0.0;        // nugget, >= 0
  double jitter = 1e-8;  // diagonal conditioning term

  void validate(Eigen::Index dim) const;
};

// Error function used by the closed-form design integrals; accurate to at
// least 1e-12 relative over the arguments that arise (|x| <= ~40).
double erf(double x);

// Unit-scale correlation between two points (no nugget, no jitter).
double kernel_value(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b,
                    const VectorXd& theta);

// d k(a, b) / d a_l  =  -2 (a_l - b_l) / theta_l * k(a, b).
double kernel_grad(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                   const Eigen::Ref<const Eigen::RowVectorXd>& b,
                   const VectorXd& theta, Eigen::Index l);

// Dense self-covariance of the rows of X: k(X, X) + (g + jitter) I.
MatrixXd cov_matrix(const MatrixXd& X, const KernelConfig& cfg);

// Cross-covariance k(A, B) between row sets; never carries nugget or jitter,
// even when rows coincide.
MatrixXd cross_cov(const MatrixXd& A, const MatrixXd& B, const VectorXd& theta);

}  // namespace kohdesign::kernels
