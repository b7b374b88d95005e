#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sdelab/brownian_oracle.hpp"
#include "sdelab/schemes.hpp"

using namespace sdelab;

namespace {

SdeSpec constant_coeff_spec(double a, double b) {
  SdeSpec s;
  s.name = "const_ab";
  s.coeffs = CoefficientField(
      [a](int, int j, double, double) { return j == 0 ? a : 0.0; },
      [b](int, int j, double, double) { return j == 0 ? b : 0.0; }, {2, 3}, SmoothDomain{}, true);
  s.x0 = 0.0;
  return s;
}

}  // namespace

TEST_CASE("euler: degenerate cases") {
  PathState p(1, 0);
  SdeSpec zero = constant_coeff_spec(0.0, 0.0);
  zero.x0 = 3.25;
  TrajectoryOutput t0 = run_scheme(zero, {SchemeId::euler, 8}, p);
  for (double v : t0.values) CHECK(v == 3.25);
  CHECK(t0(0.77) == 3.25);

  SdeSpec drift1 = constant_coeff_spec(1.0, 0.0);
  TrajectoryOutput t1 = run_scheme(drift1, {SchemeId::euler, 7}, p);
  CHECK(t1.endpoint() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("euler single step of the linear equation") {
  PathState p(2, 0);
  const SdeSpec gbm = make_gbm(0.0, 1.0, 1.0);
  TrajectoryOutput t = run_scheme(gbm, {SchemeId::euler, 1}, p);
  const double w = p.value_at(1.0);
  CHECK(t.endpoint() == 1.0 + w);  // x + 0*h + 1*x0*dW with x0=1
}

TEST_CASE("milstein single step, multiplicative noise") {
  PathState p(3, 0);
  SdeSpec s = make_gbm(0.0, 1.0, 1.0);  // a=0, b(x)=x
  TrajectoryOutput t = run_scheme(s, {SchemeId::milstein, 1}, p);
  const double dw = p.value_at(1.0);
  CHECK(t.endpoint() == doctest::Approx(1.0 + dw + 0.5 * (dw * dw - 1.0)).epsilon(1e-14));
}

TEST_CASE("milstein collapses to euler bitwise for additive noise") {
  for (std::uint64_t rep = 0; rep < 4; ++rep) {
    PathState p1(11, rep), p2(11, rep);
    const SdeSpec s = make_sgn_drift();  // b constant
    TrajectoryOutput te = run_scheme(s, {SchemeId::euler, 16}, p1);
    TrajectoryOutput tm = run_scheme(s, {SchemeId::milstein, 16}, p2);
    for (std::size_t i = 0; i < te.values.size(); ++i) CHECK(te.values[i] == tm.values[i]);
  }
}

TEST_CASE("coupling: two schemes on one path observe identical increments") {
  PathState p(12, 0);
  const SdeSpec s = make_gbm(0.2, 0.8);
  run_scheme(s, {SchemeId::euler, 8}, p);
  const auto knots_before = p.knot_values();
  run_scheme(s, {SchemeId::milstein, 8}, p);
  CHECK(p.knot_values() == knots_before);  // nothing redrawn, same increments
}

TEST_CASE("wagner-platen: hand-checked single step with pure drift") {
  // dX = X dt, x0 = 1, one step of length 1: 1 + 1 + 1/2 = 2.5
  SdeSpec s;
  s.name = "pure_linear_drift";
  s.coeffs = CoefficientField(
      [](int, int j, double, double x) { return j == 0 ? x : (j == 1 ? 1.0 : 0.0); },
      [](int, int, double, double) { return 0.0; }, {2, 3}, SmoothDomain{}, true);
  s.x0 = 1.0;
  PathState p(4, 0);
  TrajectoryOutput t = run_scheme(s, {SchemeId::wagner_platen_truncated, 1}, p);
  CHECK(t.endpoint() == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("wagner-platen reduces to euler for constant coefficients, bitwise") {
  SdeSpec s = constant_coeff_spec(0.7, 1.3);
  s.x0 = 0.4;
  for (std::uint64_t rep = 0; rep < 4; ++rep) {
    PathState p1(13, rep), p2(13, rep), p3(13, rep);
    TrajectoryOutput te = run_scheme(s, {SchemeId::euler, 8}, p1);
    TrajectoryOutput tm = run_scheme(s, {SchemeId::milstein, 8}, p2);
    TrajectoryOutput tw = run_scheme(s, {SchemeId::wagner_platen_truncated, 8}, p3);
    for (std::size_t i = 0; i < te.values.size(); ++i) {
      CHECK(te.values[i] == tm.values[i]);
      CHECK(tm.values[i] == tw.values[i]);
    }
  }
}

TEST_CASE("wagner-platen one step matches the six-term expansion symbolically (GBM)") {
  const double alpha = 0.3, beta = 0.9, x0 = 1.4, T = 1.0;
  SdeSpec s = make_gbm(alpha, beta, x0);
  PathState p(14, 0);
  TrajectoryOutput t = run_scheme(s, {SchemeId::wagner_platen_truncated, 1}, p);
  const double dw = p.value_at(T);
  const double h = T;
  const double a = alpha * x0, b = beta * x0;
  const double expected = x0 + a * h + b * dw + 0.5 * b * beta * (dw * dw - h) +
                          (a * beta - 0.5 * b * beta * beta) * dw * h +
                          (b * beta * beta) / 6.0 * dw * dw * dw +
                          0.5 * (a * alpha) * h * h;
  CHECK(t.endpoint() == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("taming perturbs bounded increments by at most M^2/k per unit step") {
  // |f - f/(1+|f|/k)| = f^2/(k + |f|) <= M^2 / k
  const double M = 2.0;
  for (int k : {16, 64, 256}) {
    for (double f : {-2.0, -0.5, 0.1, 2.0}) {
      const double tamed = f / (1.0 + std::abs(f) / k);
      CHECK(std::abs(f - tamed) <= M * M / k + 1e-15);
    }
  }
}

TEST_CASE("tamed schemes stay finite on the quintic equation") {
  const SdeSpec q = make_quintic(2.0);  // aggressive start
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    PathState p1(15, rep), p2(15, rep);
    CHECK_NOTHROW(run_scheme(q, {SchemeId::tamed_euler, 16}, p1));
    CHECK_NOTHROW(run_scheme(q, {SchemeId::tamed_milstein, 16}, p2));
  }
}

TEST_CASE("implicit square-root scheme: degenerate noise limit and positivity") {
  // sigma -> 0: one step from x0=1, delta=1, beta=0, h=1/2 gives implicit
  // Euler for the drift ODE: 1.5
  SdeSpec tiny = make_cir(1.0, 0.0, 1e-8, 1.0);
  tiny.horizon = 0.5;
  PathState p(16, 0);
  TrajectoryOutput t = run_scheme(tiny, {SchemeId::drift_implicit_sqrt, 1}, p);
  CHECK(t.endpoint() == doctest::Approx(1.5).epsilon(1e-6));

  // positivity scan at delta = 5
  const SdeSpec c5 = make_cir(5.0, 1.0, 2.0, 1.0);
  for (std::uint64_t rep = 0; rep < 10000; ++rep) {
    PathState q(17, rep);
    TrajectoryOutput tr = run_scheme(c5, {SchemeId::drift_implicit_sqrt, 16}, q);
    for (double v : tr.values) {
      CHECK(v > 0.0);
      if (!(v > 0.0)) return;
    }
  }
}

TEST_CASE("implicit square-root scheme rejects invalid regimes") {
  PathState p(18, 0);
  // delta = 0.5, sigma = 2 violates 2 delta > sigma^2 / 2
  CHECK_THROWS_AS(run_scheme(make_cir(0.5, 0.0), {SchemeId::drift_implicit_sqrt, 4}, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_scheme(make_quintic(), {SchemeId::drift_implicit_sqrt, 4}, p),
                  std::invalid_argument);
}

TEST_CASE("linear interpolation evaluator") {
  PathState p(19, 0);
  const SdeSpec s = make_gbm(0.1, 0.7);
  TrajectoryOutput t = interpolate_linear(run_scheme(s, {SchemeId::euler, 4}, p));
  for (std::size_t i = 0; i < t.times.size(); ++i) CHECK(t(t.times[i]) == t.values[i]);
  CHECK(t(0.125) == doctest::Approx(0.5 * (t.values[0] + t.values[1])).epsilon(1e-15));
}

TEST_CASE("continuous-time euler interpolant matches its formula between nodes") {
  const SdeSpec s = make_gbm(0.4, 1.0);
  PathState p(20, 0);
  SchemeConfig cfg{SchemeId::euler, 4, true};
  TrajectoryOutput t = run_scheme(s, cfg, p);
  for (std::size_t i = 0; i < t.times.size(); ++i) CHECK(t(t.times[i]) == t.values[i]);
  const double tt = 0.3;  // inside span [0.25, 0.5)
  const double x1 = t.values[1];
  const double w1 = p.value_at(0.25);
  const double wt = p.evaluate(tt);
  const double manual = x1 + 0.4 * x1 * (tt - 0.25) + x1 * (wt - w1);
  CHECK(t(tt) == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("PL and continuous-time euler interpolants drift together as k grows") {
  const SdeSpec s = make_gbm(0.2, 1.0);
  auto l1_gap = [&](int k) {
    PathState p(21, 7);
    SchemeConfig cont{SchemeId::euler, k, true};
    TrajectoryOutput tc = run_scheme(s, cont, p);
    TrajectoryOutput tl = interpolate_linear(tc);
    const int fine = 4096;
    double acc = 0.0;
    for (int j = 0; j <= fine; ++j) {
      const double t = static_cast<double>(j) / fine;
      acc += ((j == 0 || j == fine) ? 0.5 : 1.0) * std::abs(tc(t) - tl(t));
    }
    return acc / fine;
  };
  const double g16 = l1_gap(16), g256 = l1_gap(256);
  CHECK(g16 >= 0.0);
  CHECK(g256 < g16);
}

TEST_CASE("divergent explicit schemes raise divergence errors") {
  // plain euler on the quintic with a huge start blows up fast
  SdeSpec q = make_quintic(10.0);
  PathState p(22, 0);
  CHECK_THROWS_AS(run_scheme(q, {SchemeId::euler, 4}, p), divergence_error);
}
