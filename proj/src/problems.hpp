#pragma once

// Benchmark calibration problems.  Every problem lives on the coded unit cube:
// x in [0,1]^p are controllable inputs, u in [0,1]^s are calibration inputs
// (decoded to their natural ranges internally).  Field observations are
// synthetic: simulator at the ground-truth u*, plus a bias term scaled by
// bias_scale, plus iid Gaussian noise.

#include <memory>
#include <string>

#include "koh.hpp"

namespace kohdesign::problems {

struct ProblemOptions {
  double sx_step = 5e-5;  // RK4 step for the solvent-extraction integrator
  double sx_tmax = 20.0;  // contact time (s)
};

struct FieldSpec {
  enum class Kind { Grid, Lhs };
  Kind kind = Kind::Grid;
  int grid_points = 10;  // per x dimension, replicated as a full block
  int replicates = 2;
  int lhs_n = 20;
};

class Problem {
 public:
  virtual ~Problem() = default;

  virtual const char* name() const = 0;
  virtual Eigen::Index p() const = 0;
  virtual Eigen::Index s() const = 0;
  virtual Eigen::Index n_outputs() const { return 1; }
  virtual const char* output_name(Eigen::Index i) const;

  // Primary simulator output at coded (x, u).
  virtual double simulate(const VectorXd& x, const VectorXd& u) const = 0;
  // All outputs (multi-output simulators override).
  virtual VectorXd simulate_all(const VectorXd& x, const VectorXd& u) const;

  virtual double bias(const VectorXd& x) const = 0;
  virtual double noise_sd() const = 0;
  virtual const VectorXd& u_star() const = 0;

  // Field-design conventions and fitting defaults for this problem.
  virtual bool field_grid_midpoint() const { return false; }
  virtual FieldSpec default_field() const = 0;
  virtual int default_test_n() const = 0;
  virtual koh::Priors default_priors() const = 0;
};

std::unique_ptr<Problem> make_problem(const std::string& name,
                                      const ProblemOptions& options = {});

// Field design on the coded x cube: an evenly spaced grid replicated as a
// block, or an LHS.
MatrixXd field_design(const Problem& prob, const FieldSpec& spec, Rng& rng);

// Noiseless field surface sim(x, u*) + bias_scale * b(x).
VectorXd field_mean(const Problem& prob, const MatrixXd& X, double bias_scale);

VectorXd field_observe(const Problem& prob, const MatrixXd& X, double bias_scale,
                       Rng& rng);

struct TestSet {
  MatrixXd X;
  VectorXd y;
};

TestSet make_test_set(const Problem& prob, int n, bool noiseless, double bias_scale,
                      Rng& rng);

// --- Solvent-extraction internals exposed for validation -------------------
// Final state of the two-reaction kinetics, all concentrations normalized to
// the total mixture volume.
struct SxState {
  double la = 0.0;    // [La3+]
  double na = 0.0;    // [Na+]
  double la_a = 0.0;  // [La(HA2)3]
  double na_a = 0.0;  // [Na(HA2)]
  double h2a2 = 0.0;  // [H2A2]
  double h = 0.0;     // [H+]
  double v_tot = 0.0;     // total mixture volume
  double v_aq_tot = 0.0;  // aqueous volume (feed + caustic solution)
  // Initial values backing the conservation checks.
  double la0 = 0.0, na0 = 0.0, h2a20 = 0.0, h0 = 0.0;
};

// Integrates the kinetics at coded inputs and returns the full final state.
SxState sx_integrate(const VectorXd& x_coded, const VectorXd& u_coded,
                     double step, double tmax);

}  // namespace kohdesign::problems
