#pragma once

// Sequential-design acquisition: pick the next simulator run.
//
// Model-based strategies minimize an integrated-variance criterion with a
// two-stage search: an LHS candidate sweep over the coded box, then projected
// BFGS with analytic gradients from the best candidates.  Model-free
// comparators draw from a pre-committed master LHS or uniformly at random.

#include "design.hpp"
#include "imspe.hpp"

namespace kohdesign::acq {

enum class Strategy {
  KohImspe,        // calibration-aware integrated variance over field x
  MImspe,          // single-GP integrated variance over the full (x, u) cube
  MImspeXInField,  // MImspe with x restricted to the unique field locations
  MImspeUAtUhat,   // MImspe with u pinned at u_hat
  Lhs,             // next unused point of the master LHS, in random order
  Uniform,         // iid uniform draw
};

Strategy strategy_from_string(const std::string& name);
const char* to_string(Strategy s);

struct Options {
  int cand_per_dim = 100;  // candidate pool size = cand_per_dim * (free dims)
  int n_starts = 5;        // descents launched from the best candidates
  double box_lo = 1e-9;    // coded-box clamp keeping evaluations interior
  double box_hi = 1.0 - 1e-9;
  optimize::ProjectedBfgsOptions bfgs;  // 200 iterations, grad tol 1e-6
};

struct Result {
  VectorXd point;  // coded [x, u] of dimension p+s
  double value = std::numeric_limits<double>::quiet_NaN();  // criterion at point
  bool fallback = false;  // every descent hit the proximity guard, so the
                          // point is the best raw candidate
  double wall_s = 0.0;
  Strategy strategy = Strategy::KohImspe;
};

Result acquire_koh_imspe(const koh::KohFit& fit, const Options& opts, Rng& rng);
Result acquire_m_imspe(const koh::KohFit& fit, const Options& opts, Rng& rng);
Result acquire_m_imspe_x_in_field(const koh::KohFit& fit, const Options& opts, Rng& rng);
Result acquire_m_imspe_u_at_uhat(const koh::KohFit& fit, const Options& opts, Rng& rng);

// Dispatcher used by the experiment harness.  The Lhs strategy consumes a
// random not-yet-used row of `master` (tracked through `remaining`).
Result acquire(Strategy strategy, const koh::KohFit& fit, const Options& opts, Rng& rng,
               const MatrixXd* master = nullptr, std::vector<int>* remaining = nullptr);

}  // namespace kohdesign::acq
