#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "sdelab/proof_lab.hpp"
#include "sdelab/prob_tools.hpp"
#include "sdelab/rng.hpp"

using namespace sdelab;

namespace {

SdeSpec localized_quintic() {
  return localize(make_quintic(), Interval{0.25, 4.0}, Interval{0.5, 2.0}, Interval{0.75, 1.5});
}

SdeSpec linear_drift_unit_noise() {
  // dX = X dt + dW: a01 = 1, b01 = 0, gap = 1 everywhere
  SdeSpec s;
  s.name = "linear_drift_unit_noise";
  s.coeffs = CoefficientField(
      [](int, int j, double, double x) { return j == 0 ? x : (j == 1 ? 1.0 : 0.0); },
      [](int, int j, double, double) { return j == 0 ? 1.0 : 0.0; }, {2, 3}, SmoothDomain{}, true);
  s.x0 = 0.3;
  return s;
}

}  // namespace

TEST_CASE("weight path trivializes for constant coefficients") {
  SdeSpec s;
  s.name = "const";
  s.coeffs = CoefficientField([](int, int j, double, double) { return j == 0 ? 0.4 : 0.0; },
                              [](int, int j, double, double) { return j == 0 ? 1.2 : 0.0; },
                              {2, 3}, SmoothDomain{}, true);
  s.x0 = 0.0;
  PathState p(1, 0);
  const WeightPath wp = build_weight_path(s, p, 8);
  for (double mv : wp.m) CHECK(mv == 1.0);
  for (double bm : wp.big_m) CHECK(bm == 1.0);
  for (double yv : wp.y) CHECK(yv == 0.0);
}

TEST_CASE("weight path hand check at k = 1 on the quintic") {
  const SdeSpec q = make_quintic();
  PathState p(2, 0);
  const WeightPath wp = build_weight_path(q, p, 1);
  const double w1 = p.value_at(1.0);
  // a = -x^5, b = x: a01(0,1) = -5, b01 = 1
  CHECK(wp.m[0] == doctest::Approx(1.0 - 5.0 + w1).epsilon(1e-14));
  CHECK(wp.big_m[1] == 1.0);
  CHECK(wp.y[0] == doctest::Approx(-4.0).epsilon(1e-14));  // gap at x0 = 1
}

TEST_CASE("zero-gap equations produce a vanishing correction process") {
  const SdeSpec g = make_gbm(0.6, 1.1);
  PathState p(3, 0);
  const AuxState st = build_aux_scheme(g, p, 16);
  for (std::size_t l = 0; l < st.aux.size(); ++l)
    CHECK(std::abs(st.aux[l] - st.weights.x[l]) < 1e-12);
}

TEST_CASE("endpoint decomposition holds to relative 1e-10") {
  const SdeSpec q = localized_quintic();
  for (int k : {8, 32, 128}) {
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      PathState p(4, rep * 1000 + static_cast<std::uint64_t>(k));
      const AuxState st = build_aux_scheme(q, p, k);
      const AuxIdentity id = aux_identity(st);
      const double scale = std::max({1.0, std::abs(id.lhs), std::abs(id.rhs)});
      CHECK(std::abs(id.lhs - id.rhs) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("rhat on hand-built weight data") {
  WeightPath wp;
  wp.k = 2;
  wp.y = {1.0, 8.0};  // |1|^(2/3) + |8|^(2/3) = 1 + 4
  CHECK(rhat(wp) == doctest::Approx(2.5).epsilon(1e-14));
  wp.y = {0.0, 0.0};
  CHECK(rhat(wp) == 0.0);
}

TEST_CASE("conditional variance bound arithmetic") {
  WeightPath wp;
  wp.k = 2;
  wp.y = {3.0, 4.0};
  CHECK(conditional_variance_bound(wp, {0, 0}) == doctest::Approx(25.0 / 96.0).epsilon(1e-14));
  CHECK(conditional_variance_bound(wp, {1, 0}) ==
        doctest::Approx((9.0 / 4.0 + 16.0) / 96.0).epsilon(1e-14));
  CHECK_THROWS_AS(conditional_variance_bound(wp, {0}), std::invalid_argument);
  CHECK_THROWS_AS(conditional_variance_bound(wp, {-1, 0}), std::invalid_argument);
}

TEST_CASE("bound equals the variance of the resampled endpoint sum at d = 0") {
  const SdeSpec q = localized_quintic();
  const int k = 32;
  PathState p(5, 0);
  const WeightPath wp = build_weight_path(q, p, k);
  const double bound = conditional_variance_bound(wp, std::vector<int>(static_cast<std::size_t>(k), 0));

  // resample the span integrals I_l ~ N(0, h^3/12) independently and estimate
  // Var(sum_l Y_l I_l); at d = 0 the bound is attained with equality
  const double sd_i = std::sqrt(1.0 / (12.0 * k * k * k));
  const int R = 20000;
  RngStream rng(6, 0);
  double s2 = 0.0;
  for (int r = 0; r < R; ++r) {
    double s = 0.0;
    for (double yv : wp.y) s += yv * sd_i * rng.gaussian();
    s2 += s * s;
  }
  const double var = s2 / R;
  const double se = var * std::sqrt(2.0 / R);
  CHECK(std::abs(var - bound) <= 3.0 * se);
}

TEST_CASE("continuous weight: closed form when the exponent is deterministic") {
  // gap = 1 and a01 - b01^2/2 = 1, so Y(t) = exp(1 - t) exactly at any grid
  const SdeSpec s = linear_drift_unit_noise();
  PathState p(7, 0);
  CHECK(weight_continuous(s, p, 0.25, 16) == doctest::Approx(std::exp(0.75)).epsilon(1e-12));
  PathState p2(7, 1);
  CHECK(weight_continuous(s, p2, 0.0, 8) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  PathState p3(7, 2);
  CHECK_THROWS_AS(weight_continuous(s, p3, 0.3, 16), std::invalid_argument);
  SdeSpec bad = s;
  bad.horizon = 0.5;
  PathState p4(7, 3);
  CHECK_THROWS_AS(weight_continuous(bad, p4, 0.0, 8), std::invalid_argument);
}

TEST_CASE("continuous weight vanishes with the gap and stabilizes under refinement") {
  PathState pg(8, 0);
  CHECK(std::abs(weight_continuous(make_gbm(0.5, 1.0), pg, 0.5, 32)) < 1e-10);

  // the pathwise left-point quadrature of the stochastic exponent converges
  // slowly, so compare laws at two resolutions instead of single realizations
  const SdeSpec q = localized_quintic();
  const int reps = 400;
  std::vector<double> w64, w128;
  for (int r = 0; r < reps; ++r) {
    PathState p1(9, static_cast<std::uint64_t>(r));
    PathState p2(90, static_cast<std::uint64_t>(r));
    w64.push_back(weight_continuous(q, p1, 0.5, 64));
    w128.push_back(weight_continuous(q, p2, 0.5, 128));
  }
  const MeanSe m64 = mean_se(w64), m128 = mean_se(w128);
  const double se = std::sqrt(m64.se * m64.se + m128.se * m128.se);
  CHECK(std::abs(m64.mean - m128.mean) <= 3.0 * se + 0.05);
  CHECK(m64.mean < 0.0);  // gap is negative around x = 1
}

TEST_CASE("rhat law is stable in k (KS distance between k = 64 and k = 128)") {
  const SdeSpec q = localized_quintic();
  const int reps = 4000;
  std::vector<double> r64, r128;
  r64.reserve(reps);
  r128.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    PathState p1(10, static_cast<std::uint64_t>(r));
    PathState p2(11, static_cast<std::uint64_t>(r));
    r64.push_back(rhat(build_weight_path(q, p1, 64)));
    r128.push_back(rhat(build_weight_path(q, p2, 128)));
  }
  // the discretization bias shifts the law by O(1/k); allow for it on top of
  // the ~0.03 KS noise floor at this sample size
  CHECK(ks_two_sample(r64, r128).statistic < 0.1);
}

TEST_CASE("stripped milstein interpolant: nodes and correction bookkeeping") {
  // with b01 = 0 the stripped process IS the milstein/euler run
  {
    const SdeSpec s = make_sgn_drift();
    PathState p1(12, 0), p2(12, 0);
    const TrajectoryOutput aux = milstein_aux(s, p1, 16);
    const TrajectoryOutput mil = run_scheme(s, {SchemeId::milstein, 16}, p2);
    for (std::size_t i = 0; i < mil.values.size(); ++i) CHECK(aux.values[i] == mil.values[i]);
  }
  // in general the node gap is exactly the milstein correction of the span
  {
    const SdeSpec g = make_gbm(0.3, 1.0);
    const int k = 8;
    PathState p1(13, 0), p2(13, 0);
    const TrajectoryOutput aux = milstein_aux(g, p1, k);
    const TrajectoryOutput mil = run_scheme(g, {SchemeId::milstein, k}, p2);
    const auto& c = g.coeffs;
    const double h = 1.0 / k;
    for (int l = 0; l < k; ++l) {
      const double t = mil.times[static_cast<std::size_t>(l)];
      const double x = mil.values[static_cast<std::size_t>(l)];
      const double w0 = l == 0 ? 0.0 : p2.value_at(t);
      const double w1 = p2.value_at(mil.times[static_cast<std::size_t>(l) + 1]);
      const double dw = w1 - w0;
      const double corr = 0.5 * c.b(0, 0, t, x) * c.b(0, 1, t, x) * (dw * dw - h);
      CHECK(mil.values[static_cast<std::size_t>(l) + 1] -
                aux.values[static_cast<std::size_t>(l) + 1] ==
            doctest::Approx(corr).epsilon(1e-12));
    }
  }
}

TEST_CASE("stripped milstein interpolant never charges for interior queries") {
  const SdeSpec g = make_gbm(0.3, 1.0);
  PathState p(14, 0);
  const TrajectoryOutput aux = milstein_aux(g, p, 8);
  const std::uint64_t cost0 = p.cost();
  for (double t : {0.05, 0.3, 0.77, 0.99}) CHECK(std::isfinite(aux(t)));
  for (std::size_t i = 0; i < aux.times.size(); ++i) CHECK(aux(aux.times[i]) == aux.values[i]);
  CHECK(p.cost() == cost0);
}
