#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kohdesign::optimize {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Evaluate with candidate rejection mapped to +inf so both optimizers treat
// vetoed points as arbitrarily bad instead of aborting.
double safe_eval(const Objective& f, const VectorXd& x) {
  try {
    const double v = f(x);
    return std::isnan(v) ? kInf : v;
  } catch (const CandidateRejected&) {
    return kInf;
  }
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, const VectorXd& x0,
                             const NelderMeadOptions& opts) {
  const Eigen::Index n = x0.size();
  if (n == 0) throw InvalidArgument("nelder_mead: empty start point");

  // Standard coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  std::vector<VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) xs[i + 1][i] += opts.initial_step;
  for (Eigen::Index i = 0; i <= n; ++i) fs[i] = safe_eval(f, xs[i]);

  std::vector<Eigen::Index> order(n + 1);
  NelderMeadResult res;
  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return fs[a] < fs[b]; });
    const Eigen::Index best = order[0], worst = order[n], second = order[n - 1];

    double diam = 0.0;
    for (Eigen::Index i = 1; i <= n; ++i) {
      diam = std::max(diam, (xs[order[i]] - xs[best]).cwiseAbs().maxCoeff());
    }
    const double spread = std::abs(fs[worst] - fs[best]);
    if (spread <= opts.f_tol * (std::abs(fs[best]) + opts.f_tol) && diam <= opts.x_tol) {
      res.converged = true;
      break;
    }

    VectorXd centroid = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (i != worst) centroid += xs[i];
    }
    centroid /= static_cast<double>(n);

    const VectorXd xr = centroid + alpha * (centroid - xs[worst]);
    const double fr = safe_eval(f, xr);
    if (fr < fs[best]) {
      const VectorXd xe = centroid + gamma * (xr - centroid);
      const double fe = safe_eval(f, xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      const VectorXd base = (fr < fs[worst]) ? xr : xs[worst];
      const double fbase = std::min(fr, fs[worst]);
      const VectorXd xc = centroid + rho * (base - centroid);
      const double fc = safe_eval(f, xc);
      if (fc < fbase) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (Eigen::Index i = 0; i <= n; ++i) {
          if (i == best) continue;
          xs[i] = xs[best] + sigma * (xs[i] - xs[best]);
          fs[i] = safe_eval(f, xs[i]);
        }
      }
    }
  }

  const auto it = std::min_element(fs.begin(), fs.end());
  res.f = *it;
  res.x = xs[static_cast<std::size_t>(it - fs.begin())];
  return res;
}

ProjectedBfgsResult projected_bfgs(const Objective& f, const Gradient& grad,
                                   const VectorXd& x0, double lo, double hi,
                                   const ProjectedBfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  if (!(lo < hi)) throw InvalidArgument("projected_bfgs: empty box");

  const auto clip = [&](VectorXd v) {
    return v.cwiseMax(lo).cwiseMin(hi);
  };

  ProjectedBfgsResult res;
  VectorXd x = clip(x0);
  double fx = safe_eval(f, x);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.f = fx;
    return res;  // start point is rejected; caller falls back
  }
  VectorXd g = grad(x);
  MatrixXd H = MatrixXd::Identity(n, n);

  const auto projected_grad_norm = [&](const VectorXd& xc, const VectorXd& gc) {
    // Size of the step x -> clip(x - g): zero exactly at a box-constrained
    // stationary point.
    return (xc - clip(xc - gc)).cwiseAbs().maxCoeff();
  };

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    if (projected_grad_norm(x, g) <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    VectorXd dir = -(H * g);
    if (dir.dot(g) >= 0.0) {  // not a descent direction: reset curvature
      H.setIdentity();
      dir = -g;
    }

    double step = 1.0;
    VectorXd x_new;
    double f_new = kInf;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      x_new = clip(x + step * dir);
      const VectorXd actual = x_new - x;
      if (actual.cwiseAbs().maxCoeff() < 1e-15) break;  // pinned to the boundary
      f_new = safe_eval(f, x_new);
      if (f_new <= fx + opts.armijo_c1 * g.dot(actual)) {
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) break;  // no further progress possible along this direction

    const VectorXd g_new = grad(x_new);
    const VectorXd s = x_new - x;
    const VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {  // curvature condition, else skip update
      const VectorXd Hy = H * yv;
      const double yHy = yv.dot(Hy);
      H += ((sy + yHy) / (sy * sy)) * (s * s.transpose());
      H -= (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }

  res.x = x;
  res.f = fx;
  if (!res.converged) res.converged = projected_grad_norm(x, g) <= opts.grad_tol;
  return res;
}

}  // namespace kohdesign::optimize
