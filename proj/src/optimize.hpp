#pragma once

// Local optimizers used across the toolkit:
//  - Nelder-Mead simplex for low-dimensional hyperparameter MAP fits
//    (derivative-free, unconstrained; callers reparameterize to R^k).
//  - Projected BFGS with Armijo backtracking for box-constrained criterion
//    minimization with analytic gradients.

#include <functional>

#include "common.hpp"

namespace kohdesign::optimize {

using Objective = std::function<double(const VectorXd&)>;
using Gradient = std::function<VectorXd(const VectorXd&)>;

struct NelderMeadOptions {
  int max_iter = 500;        // simplex iterations
  double initial_step = 0.5; // per-coordinate offset of the initial simplex
  double f_tol = 1e-9;       // relative spread of simplex values
  double x_tol = 1e-7;       // simplex diameter
};

struct NelderMeadResult {
  VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes f starting from x0.
NelderMeadResult nelder_mead(const Objective& f, const VectorXd& x0,
                             const NelderMeadOptions& opts = {});

struct ProjectedBfgsOptions {
  int max_iter = 200;
  double grad_tol = 1e-6;   // infinity norm of the projected gradient
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
};

struct ProjectedBfgsResult {
  VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;   // projected-gradient norm reached grad_tol
};

// Minimizes f over the box [lo, hi]^d.  The objective may throw
// CandidateRejected to veto a trial point; the line search then backtracks.
ProjectedBfgsResult projected_bfgs(const Objective& f, const Gradient& grad,
                                   const VectorXd& x0, double lo, double hi,
                                   const ProjectedBfgsOptions& opts = {});

}  // namespace kohdesign::optimize
