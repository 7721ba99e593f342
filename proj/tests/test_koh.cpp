#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "design.hpp"
#include "koh.hpp"
#include "problems.hpp"

using namespace kohdesign;

namespace {

// Synthetic calibration data from the sinusoid benchmark.
struct Setup {
  koh::FieldData field;
  koh::SimData sim;
};

Setup sinusoid_data(int n_m, std::uint64_t seed) {
  const auto prob = problems::make_problem("sinusoid");
  Rng rng(seed);
  Setup s;
  s.field.X = problems::field_design(*prob, prob->default_field(), rng);
  s.field.y = problems::field_observe(*prob, s.field.X, 1.0, rng);
  const MatrixXd XU = design::lhs(n_m, 2, rng);
  s.sim.X = XU.leftCols(1);
  s.sim.U = XU.rightCols(1);
  s.sim.y.resize(n_m);
  for (int i = 0; i < n_m; ++i) {
    s.sim.y[i] = prob->simulate(s.sim.X.row(i).transpose(), s.sim.U.row(i).transpose());
  }
  return s;
}

koh::KohFit fixed_fit(const Setup& s) {
  kernels::KernelConfig cfg_m;
  cfg_m.theta = (VectorXd(2) << 0.1, 0.2).finished();
  kernels::KernelConfig cfg_b;
  cfg_b.theta = VectorXd::Constant(1, 0.5);
  cfg_b.g = 0.05;
  return koh::assemble(s.field, s.sim, cfg_m, 1.3, cfg_b, 0.4,
                       VectorXd::Constant(1, 0.6));
}

}  // namespace

TEST_CASE("joint covariance matches a hand-built dense oracle") {
  const Setup s = sinusoid_data(15, 21);
  const koh::KohFit fit = fixed_fit(s);
  const Eigen::Index nf = fit.n_f(), n = fit.n();

  // Oracle: nu_m * (K_m(Z) + eps I) everywhere, plus the bias block
  // nu_b * (K_b(Xf) + (g + eps) I) on field rows.
  MatrixXd sigma =
      fit.nu_m * kernels::cross_cov(fit.Z, fit.Z, fit.cfg_m.theta);
  sigma.diagonal().array() += fit.nu_m * fit.joint_jitter;
  MatrixXd bias = fit.nu_b * kernels::cross_cov(fit.Xf, fit.Xf, fit.cfg_b.theta);
  bias.diagonal().array() += fit.nu_b * (fit.cfg_b.g + fit.joint_jitter);
  sigma.topLeftCorner(nf, nf) += bias;

  const MatrixXd recon = fit.joint_chol.matrixL() * MatrixXd(fit.joint_chol.matrixL()).transpose();
  CHECK((recon - sigma).cwiseAbs().maxCoeff() < 1e-10);

  VectorXd y(n);
  y.head(nf) = fit.yf;
  y.tail(n - nf) = fit.ym;
  CHECK((sigma * fit.joint_alpha - y).cwiseAbs().maxCoeff() < 1e-8);

  // Z stacks field rows (u pinned at u_hat) over simulator rows.
  CHECK((fit.Z.topLeftCorner(nf, fit.p) - fit.Xf).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fit.Z.topRightCorner(nf, fit.s).array() - fit.u_hat[0]).abs().maxCoeff() == 0.0);
  CHECK((fit.Z.bottomLeftCorner(n - nf, fit.p) - fit.Xm).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fit.Z.bottomRightCorner(n - nf, fit.s) - fit.Um).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("field prediction matches dense gaussian conditioning") {
  const Setup s = sinusoid_data(12, 22);
  const koh::KohFit fit = fixed_fit(s);
  const Eigen::Index nf = fit.n_f(), n = fit.n();

  MatrixXd sigma = fit.nu_m * kernels::cross_cov(fit.Z, fit.Z, fit.cfg_m.theta);
  sigma.diagonal().array() += fit.nu_m * fit.joint_jitter;
  MatrixXd bias = fit.nu_b * kernels::cross_cov(fit.Xf, fit.Xf, fit.cfg_b.theta);
  bias.diagonal().array() += fit.nu_b * (fit.cfg_b.g + fit.joint_jitter);
  sigma.topLeftCorner(nf, nf) += bias;
  const MatrixXd sigma_inv = sigma.inverse();
  VectorXd y(n);
  y.head(nf) = fit.yf;
  y.tail(n - nf) = fit.ym;

  Rng rng(5);
  MatrixXd Xstar(7, 1);
  for (int i = 0; i < 7; ++i) Xstar(i, 0) = rng.uniform();
  const koh::Prediction pred = koh::predict_field(fit, Xstar);

  for (int i = 0; i < 7; ++i) {
    MatrixXd zrow(1, 2);
    zrow << Xstar(i, 0), fit.u_hat[0];
    VectorXd c = fit.nu_m * kernels::cross_cov(fit.Z, zrow, fit.cfg_m.theta).col(0);
    c.head(nf) += fit.nu_b *
                  kernels::cross_cov(fit.Xf, Xstar.row(i), fit.cfg_b.theta).col(0);
    const double mean = c.dot(sigma_inv * y);
    const double var = fit.nu_m + fit.nu_b - c.dot(sigma_inv * c);
    CHECK(pred.mean[i] == doctest::Approx(mean).epsilon(1e-8));
    CHECK(pred.var[i] == doctest::Approx(var).epsilon(1e-6));
  }
}

TEST_CASE("reordering observations leaves predictions unchanged") {
  const Setup s = sinusoid_data(14, 23);
  const koh::KohFit fit = fixed_fit(s);

  Setup sp = s;
  Rng rng(6);
  std::vector<int> perm(static_cast<size_t>(s.sim.X.rows()));
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  rng.shuffle(perm.begin(), perm.end());
  for (size_t i = 0; i < perm.size(); ++i) {
    sp.sim.X.row(static_cast<Eigen::Index>(i)) = s.sim.X.row(perm[i]);
    sp.sim.U.row(static_cast<Eigen::Index>(i)) = s.sim.U.row(perm[i]);
    sp.sim.y[static_cast<Eigen::Index>(i)] = s.sim.y[perm[i]];
  }
  const koh::KohFit fitp = fixed_fit(sp);

  MatrixXd Xstar(5, 1);
  Xstar << 0.05, 0.3, 0.55, 0.72, 0.97;
  const koh::Prediction a = koh::predict_field(fit, Xstar);
  const koh::Prediction b = koh::predict_field(fitp, Xstar);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((a.var - b.var).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("far-field prediction reverts to the joint prior") {
  const Setup s = sinusoid_data(10, 24);
  koh::KohFit fit = fixed_fit(s);
  // Shrink lengthscales so x = 40 is effectively independent of the data.
  fit = koh::assemble({s.field.X, s.field.y}, s.sim, fit.cfg_m, fit.nu_m,
                      fit.cfg_b, fit.nu_b, fit.u_hat);
  MatrixXd far(1, 1);
  far << 40.0;
  const koh::Prediction pred = koh::predict_field(fit, far);
  CHECK(std::abs(pred.mean[0]) < 1e-6);
  CHECK(pred.var[0] == doctest::Approx(fit.nu_m + fit.nu_b).epsilon(1e-6));
}

TEST_CASE("stage-2 objective is finite and consistent with the estimate") {
  const Setup s = sinusoid_data(30, 25);
  koh::FitOptions opts;
  opts.priors = problems::make_problem("sinusoid")->default_priors();
  opts.n_starts = 3;
  opts.seed = 77;
  const gp::GpFit sur = koh::fit_surrogate(s.sim, opts);
  const koh::UEstimate est = koh::estimate_u(sur, s.field, opts);

  const double at_est = koh::u_objective(sur, s.field, opts.priors, opts.jitter,
                                         est.u_hat, est.cfg_b.theta, est.cfg_b.g);
  CHECK(std::isfinite(at_est));
  CHECK(at_est == doctest::Approx(est.objective).epsilon(1e-9));

  // The optimizer should not be beaten by the plain base initialization.
  const double at_base = koh::u_objective(
      sur, s.field, opts.priors, opts.jitter, VectorXd::Constant(1, 0.5),
      VectorXd::Constant(1, opts.priors.theta_b.mean()), opts.priors.g_b.mean());
  CHECK(at_est >= at_base - 1e-9);
  CHECK(est.nu_b > 0.0);
  CHECK(est.u_hat[0] > 0.0);
  CHECK(est.u_hat[0] < 1.0);
}

TEST_CASE("full pipeline recovers the sinusoid calibration input") {
  const Setup s = sinusoid_data(40, 26);
  koh::FitOptions opts;
  opts.priors = problems::make_problem("sinusoid")->default_priors();
  opts.n_starts = 5;
  opts.seed = 99;
  const koh::KohFit fit = koh::fit_koh(s.field, s.sim, opts);
  CHECK(std::abs(fit.u_hat[0] - M_PI / 5.0) < 0.15);
  CHECK(fit.nu_m > 0.0);
  CHECK(fit.nu_b > 0.0);

  // Prediction should track the noiseless field surface reasonably well.
  const auto prob = problems::make_problem("sinusoid");
  Rng rng(4);
  MatrixXd Xstar = design::lhs(50, 1, rng);
  const VectorXd truth = problems::field_mean(*prob, Xstar, 1.0);
  const koh::Prediction pred = koh::predict_field(fit, Xstar);
  const double rmse = std::sqrt((pred.mean - truth).squaredNorm() / 50.0);
  CHECK(rmse < 0.25);
  CHECK(pred.var.minCoeff() >= 0.0);
}

TEST_CASE("fit rejects malformed inputs") {
  const Setup s = sinusoid_data(8, 27);
  koh::FitOptions opts;
  koh::FieldData empty;
  empty.X.resize(0, 1);
  empty.y.resize(0);
  CHECK_THROWS_AS(koh::fit_koh(empty, s.sim, opts), InvalidArgument);

  koh::SimData bad = s.sim;
  bad.y.resize(3);
  CHECK_THROWS_AS(koh::fit_koh(s.field, bad, opts), InvalidArgument);
}
