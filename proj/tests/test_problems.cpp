#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "problems.hpp"

using namespace kohdesign;
using problems::make_problem;

TEST_CASE("sinusoid simulator and bias") {
  const auto prob = make_problem("sinusoid");
  CHECK(prob->p() == 1);
  CHECK(prob->s() == 1);
  CHECK(prob->n_outputs() == 1);
  CHECK(std::string(prob->output_name(0)) == "y");
  CHECK(prob->noise_sd() == 0.1);
  CHECK(prob->u_star()[0] == doctest::Approx(M_PI / 5.0).epsilon(1e-15));

  // At the true calibration value the response is sin(2 pi x): a full period.
  const VectorXd u_star = prob->u_star();
  CHECK(prob->simulate(VectorXd::Constant(1, 0.5), u_star) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(prob->simulate(VectorXd::Constant(1, 0.25), u_star) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(prob->simulate(VectorXd::Constant(1, 0.3), VectorXd::Constant(1, 0.7)) ==
        doctest::Approx(std::sin(2.1)).epsilon(1e-15));

  CHECK(prob->bias(VectorXd::Constant(1, 0.0)) == doctest::Approx(1.0));
  CHECK(prob->bias(VectorXd::Constant(1, 1.0)) == doctest::Approx(0.0));
  CHECK(prob->bias(VectorXd::Constant(1, 0.5)) ==
        doctest::Approx(1.0 - 0.5 / 3.0 - 2.0 * 0.25 / 3.0));

  CHECK_THROWS_AS(prob->simulate(VectorXd::Zero(2), u_star), InvalidArgument);
  CHECK_THROWS_AS(prob->simulate(VectorXd::Zero(1), VectorXd::Zero(2)),
                  InvalidArgument);
}

TEST_CASE("rational 2x2 simulator matches a hand evaluation") {
  const auto prob = make_problem("gohbastos");
  CHECK(prob->p() == 2);
  CHECK(prob->s() == 2);
  CHECK(prob->noise_sd() == 0.25);
  CHECK(prob->u_star()[0] == 0.2);
  CHECK(prob->u_star()[1] == 0.1);

  // x = (0.5, 0.5), u = (0.2, 0.1):
  //   numerator  = 1000*0.2*0.125 + 1900*0.25 + 2092*0.5 + 60 = 1606
  //   denominator = 100*0.1*0.125 + 500*0.25 + 4*0.5 + 20     = 148.25
  VectorXd x(2), u(2);
  x << 0.5, 0.5;
  u << 0.2, 0.1;
  const double expect = (1.0 - std::exp(-1.0)) * 1606.0 / 148.25;
  CHECK(prob->simulate(x, u) == doctest::Approx(expect).epsilon(1e-14));

  // u1 multiplies the positive cubic numerator term, so the response grows
  // with u1 whenever x1 > 0.
  VectorXd u_hi = u;
  u_hi[0] = 0.3;
  CHECK(prob->simulate(x, u_hi) > prob->simulate(x, u));

  CHECK(prob->bias(VectorXd::Zero(2)) == 0.0);
  VectorXd xb(2);
  xb << 1.0, 1.0;
  CHECK(prob->bias(xb) == doctest::Approx(14.0 / 60.0));

  VectorXd x0(2);
  x0 << 0.5, 0.0;
  CHECK_THROWS_AS(prob->simulate(x0, u), InvalidArgument);
  // Just above the singular boundary the attenuation saturates at 1.
  x0[1] = 1e-12;
  CHECK(prob->simulate(x0, u) ==
        doctest::Approx(1606.0 / 148.25).epsilon(1e-14));
}

TEST_CASE("make_problem rejects unknown names and bad options") {
  CHECK_THROWS_AS(make_problem("nope"), InvalidArgument);
  problems::ProblemOptions opts;
  opts.sx_step = 0.0;
  CHECK_THROWS_AS(make_problem("sx", opts), InvalidArgument);
}

TEST_CASE("grid field designs replicate the expected lattices") {
  Rng rng(1);
  const auto sinusoid = make_problem("sinusoid");
  const MatrixXd Xs =
      problems::field_design(*sinusoid, sinusoid->default_field(), rng);
  REQUIRE(Xs.rows() == 20);
  REQUIRE(Xs.cols() == 1);
  for (int i = 0; i < 10; ++i) {
    CHECK(Xs(i, 0) == doctest::Approx(i / 9.0).epsilon(1e-15));
    CHECK(Xs(i + 10, 0) == Xs(i, 0));  // replicate block
  }

  const auto gb = make_problem("gohbastos");
  const MatrixXd Xg = problems::field_design(*gb, gb->default_field(), rng);
  REQUIRE(Xg.rows() == 50);
  REQUIRE(Xg.cols() == 2);
  std::set<std::pair<double, double>> uniq;
  for (int i = 0; i < 25; ++i) {
    uniq.insert({Xg(i, 0), Xg(i, 1)});
    CHECK(Xg(i + 25, 0) == Xg(i, 0));
    CHECK(Xg(i + 25, 1) == Xg(i, 1));
  }
  CHECK(uniq.size() == 25);  // 5x5 lattice of unique sites
  // Midpoint rule keeps every coordinate interior, away from x2 = 0.
  CHECK(Xg.minCoeff() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(Xg.maxCoeff() == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(Xg(0, 0) == doctest::Approx(0.1));
  CHECK(Xg(1, 0) == doctest::Approx(0.3));  // first coordinate varies fastest
  CHECK(Xg(5, 1) == doctest::Approx(0.3));

  problems::FieldSpec one;
  one.kind = problems::FieldSpec::Kind::Grid;
  one.grid_points = 1;
  one.replicates = 1;
  CHECK(problems::field_design(*sinusoid, one, rng)(0, 0) == 0.5);

  problems::FieldSpec lhs_spec;
  lhs_spec.kind = problems::FieldSpec::Kind::Lhs;
  lhs_spec.lhs_n = 7;
  const MatrixXd Xl = problems::field_design(*gb, lhs_spec, rng);
  CHECK(Xl.rows() == 7);
  CHECK(Xl.cols() == 2);
  CHECK(Xl.minCoeff() >= 0.0);
  CHECK(Xl.maxCoeff() <= 1.0);

  problems::FieldSpec bad;
  bad.kind = problems::FieldSpec::Kind::Grid;
  bad.grid_points = 0;
  CHECK_THROWS_AS(problems::field_design(*sinusoid, bad, rng), InvalidArgument);
}

TEST_CASE("field observations are simulator-at-u-star plus scaled bias plus noise") {
  Rng rng(7);
  const auto prob = make_problem("sinusoid");
  const MatrixXd X = problems::field_design(*prob, prob->default_field(), rng);

  const VectorXd mean_full = problems::field_mean(*prob, X, 1.0);
  const VectorXd mean_zero = problems::field_mean(*prob, X, 0.0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const VectorXd x = X.row(i).transpose();
    CHECK(mean_full[i] == doctest::Approx(prob->simulate(x, prob->u_star()) +
                                          prob->bias(x)));
    // Zero bias scale leaves the pure simulator response at u*.
    CHECK(mean_zero[i] == doctest::Approx(prob->simulate(x, prob->u_star())));
  }
  // Noiseless means make replicate pairs identical.
  for (int i = 0; i < 10; ++i) CHECK(mean_full[i] == mean_full[i + 10]);

  Rng ra(33), rb(33);
  const VectorXd ya = problems::field_observe(*prob, X, 1.0, ra);
  const VectorXd yb = problems::field_observe(*prob, X, 1.0, rb);
  CHECK((ya - yb).cwiseAbs().maxCoeff() == 0.0);
  Rng rc(33);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    CHECK(ya[i] == doctest::Approx(mean_full[i] + 0.1 * rc.normal()));
  }
}

TEST_CASE("test sets are latin hypercube draws of the field surface") {
  Rng rng(11);
  const auto prob = make_problem("gohbastos");
  const problems::TestSet ts = problems::make_test_set(*prob, 40, true, 1.0, rng);
  REQUIRE(ts.X.rows() == 40);
  REQUIRE(ts.X.cols() == 2);
  CHECK(ts.y.size() == 40);
  const VectorXd want = problems::field_mean(*prob, ts.X, 1.0);
  CHECK((ts.y - want).cwiseAbs().maxCoeff() == 0.0);

  Rng rng2(11);
  const problems::TestSet noisy = problems::make_test_set(*prob, 40, false, 1.0, rng2);
  CHECK((noisy.X - ts.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((noisy.y - ts.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("kinetics integrator conserves every species balance") {
  // Two caustic loadings: below the feed-acid equivalence point (free acid
  // remains) and above it (autoionization leaves [H+]0 near 1e-12, so the
  // proton balance must be judged against the full proton inventory st.h).
  VectorXd u(4);
  u << 0.85, 0.85, 0.5, 0.5;
  for (double x0 : {0.5, 0.9}) {
    VectorXd x(3);
    x << x0, 0.5, 0.5;
    for (double tmax : {0.0, 10.0, 20.0}) {
      const problems::SxState st = problems::sx_integrate(x, u, 5e-4, tmax);
      CHECK(std::abs(st.la + st.la_a - st.la0) <= 1e-8 * st.la0);
      CHECK(std::abs(st.na + st.na_a - st.na0) <= 1e-8 * st.na0);
      CHECK(std::abs(st.h2a2 + 3.0 * st.la_a + st.na_a - st.h2a20) <=
            1e-8 * st.h2a20);
      CHECK(std::abs(st.h - 3.0 * st.la_a - st.na_a - st.h0) <= 1e-8 * st.h);
      for (double v : {st.la, st.na, st.h2a2, st.h, st.la_a, st.na_a}) {
        CHECK(v >= 0.0);
      }
    }
  }
}

TEST_CASE("kinetics integrator is deterministic and supports frozen dynamics") {
  VectorXd x(3), u(4);
  x << 0.3, 0.6, 0.8;
  u << 0.4, 0.7, 0.5, 0.6;
  const problems::SxState a = problems::sx_integrate(x, u, 1e-3, 5.0);
  const problems::SxState b = problems::sx_integrate(x, u, 1e-3, 5.0);
  CHECK(a.la == b.la);
  CHECK(a.na == b.na);
  CHECK(a.h == b.h);

  // Driving every rate constant to a vanishing magnitude freezes the state.
  const VectorXd u_frozen = VectorXd::Constant(4, -30.0);
  const problems::SxState f0 = problems::sx_integrate(x, u_frozen, 1e-2, 0.0);
  const problems::SxState f1 = problems::sx_integrate(x, u_frozen, 1e-2, 20.0);
  CHECK(f1.la == f0.la);
  CHECK(f1.na == f0.na);
  CHECK(f1.la == f0.la0);
  CHECK(f1.na == f0.na0);
}

TEST_CASE("kinetics integrator shows fourth-order step convergence") {
  VectorXd x(3), u(4);
  x << 0.5, 0.5, 0.5;
  u << 0.5, 0.5, 0.5, 0.5;
  const double h = 0.2;
  const problems::SxState ch = problems::sx_integrate(x, u, h, 20.0);
  const problems::SxState c2 = problems::sx_integrate(x, u, h / 2.0, 20.0);
  const problems::SxState c4 = problems::sx_integrate(x, u, h / 4.0, 20.0);
  const double e_h = std::abs(ch.la - c4.la) + std::abs(ch.na - c4.na);
  const double e_h2 = std::abs(c2.la - c4.la) + std::abs(c2.na - c4.na);
  const double ratio = e_h / e_h2;
  CAPTURE(e_h);
  CAPTURE(e_h2);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("kinetics reach detailed balance on a fast parameter draw") {
  VectorXd x(3), u(4);
  x << 0.5, 0.5, 0.5;
  u << 0.9, 0.9, 0.9, 0.9;
  const problems::SxState st = problems::sx_integrate(x, u, 5e-5, 20.0);
  const double k = std::pow(10.0, -3.0 + 6.0 * 0.9);
  const double la_strip = k * st.la_a * st.h * st.h * st.h;
  const double la_extract = k * st.la * st.h2a2 * st.h2a2 * st.h2a2;
  CHECK(std::abs(la_strip - la_extract) <= 1e-4 * std::abs(la_extract));
  const double na_strip = k * st.na_a * st.h;
  const double na_extract = k * st.na * st.h2a2;
  CHECK(std::abs(na_strip - na_extract) <= 1e-4 * std::abs(na_extract));
}

TEST_CASE("kinetics problem wraps the integrator with log outputs") {
  problems::ProblemOptions opts;
  opts.sx_step = 1e-3;
  opts.sx_tmax = 2.0;
  const auto prob = make_problem("sx", opts);
  CHECK(prob->p() == 3);
  CHECK(prob->s() == 4);
  CHECK(prob->n_outputs() == 2);
  CHECK(std::string(prob->output_name(0)) == "log_la");
  CHECK(std::string(prob->output_name(1)) == "log_na");
  CHECK(prob->u_star().size() == 4);

  VectorXd x(3), u(4);
  x << 0.4, 0.5, 0.6;
  u << 0.5, 0.6, 0.4, 0.7;
  const problems::SxState st = problems::sx_integrate(x, u, 1e-3, 2.0);
  const VectorXd out = prob->simulate_all(x, u);
  REQUIRE(out.size() == 2);
  CHECK(out[0] ==
        doctest::Approx(std::log(st.la * st.v_tot / st.v_aq_tot)).epsilon(1e-12));
  CHECK(out[1] ==
        doctest::Approx(std::log(st.na * st.v_tot / st.v_aq_tot)).epsilon(1e-12));
  CHECK(prob->simulate(x, u) == out[0]);

  CHECK_THROWS_AS(problems::sx_integrate(VectorXd::Zero(2), u, 1e-3, 1.0),
                  InvalidArgument);
  CHECK_THROWS_AS(problems::sx_integrate(x, VectorXd::Zero(3), 1e-3, 1.0),
                  InvalidArgument);
  CHECK_THROWS_AS(problems::sx_integrate(x, u, -1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(problems::sx_integrate(VectorXd::Constant(3, 1.5), u, 1e-3, 1.0),
                  InvalidArgument);
}
