#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "sdelab/prob_tools.hpp"
#include "sdelab/rng.hpp"

using namespace sdelab;

TEST_CASE("mean_se on a hand computable sample") {
  const MeanSe ms = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(ms.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-12));
  CHECK(ms.n == 4);
  CHECK(mean_se({7.0}).se == 0.0);
  CHECK_THROWS_AS(mean_se({}), std::invalid_argument);
}

TEST_CASE("wilson interval basics") {
  const WilsonInterval w = wilson_interval(50, 100);
  CHECK(w.estimate == 0.5);
  CHECK(w.lo < 0.5);
  CHECK(w.hi > 0.5);
  CHECK(w.lo > 0.39);
  CHECK(w.hi < 0.61);
  CHECK(wilson_interval(0, 10).lo == 0.0);
  CHECK(wilson_interval(10, 10).hi == doctest::Approx(1.0).epsilon(1e-12));
  // more data tightens the interval
  const WilsonInterval w2 = wilson_interval(500, 1000);
  CHECK(w2.hi - w2.lo < w.hi - w.lo);
  CHECK_THROWS_AS(wilson_interval(0, 0), std::invalid_argument);
}

TEST_CASE("two-sample KS distinguishes equal from shifted laws") {
  RngStream rng(99, 0);
  std::vector<double> a(5000), b(5000), c(5000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.gaussian();
    b[i] = rng.gaussian();
    c[i] = rng.gaussian() + 0.5;
  }
  CHECK(ks_two_sample(a, b).p_value > 0.01);
  CHECK(ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("loglog_fit recovers exact power laws") {
  std::vector<double> ns, e1, e2;
  for (int p = 4; p <= 10; ++p) {
    const double n = std::pow(2.0, p);
    ns.push_back(n);
    e1.push_back(3.0 / n);
    e2.push_back(5.0 / std::sqrt(n));
  }
  const LogLogFit f1 = loglog_fit(ns, e1);
  CHECK(f1.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(f1.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  CHECK(f1.r2 > 0.999999);
  CHECK(f1.rss < 1e-20);
  CHECK(loglog_fit(ns, e2).slope == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("loglog_fit slope is scale equivariant") {
  std::vector<double> ns{16, 32, 64, 128}, errs{0.11, 0.062, 0.028, 0.016}, scaled;
  for (double e : errs) scaled.push_back(17.3 * e);
  CHECK(loglog_fit(ns, errs).slope == doctest::Approx(loglog_fit(ns, scaled).slope).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_fit({2.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(loglog_fit({2.0, 4.0}, {1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("fixed log offsets separate sqrt(log n / n) from a pure power law") {
  std::vector<double> ns, errs, offs;
  for (int p = 4; p <= 10; ++p) {
    const double n = std::pow(2.0, p);
    ns.push_back(n);
    errs.push_back(std::sqrt(std::log(n + 1.0) / n));
    offs.push_back(0.5 * std::log(std::log(n + 1.0)));
  }
  const LogLogFit plain = loglog_fit(ns, errs);
  CHECK(plain.slope > -0.48);
  CHECK(plain.slope < -0.38);
  const LogLogFit corrected = loglog_fit(ns, errs, {}, offs);
  CHECK(corrected.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(corrected.rss < 1e-20);
  CHECK(corrected.rss < plain.rss);
}

TEST_CASE("anderson tail bound: standard normal at eps = 1/2") {
  const TailCheck t = anderson_tail_check(0.0, 1.0, 1.0, 0.5, 200000, 11);
  CHECK(t.pass);
  CHECK(t.claimed == 0.5);
  // true value 2(1 - Phi(1/2)) = 0.6171
  CHECK(std::abs(t.observed - 0.6171) <= 4.0 * t.se);

  // a huge mean makes the exceedance certain
  CHECK(anderson_tail_check(10.0, 1.0, 1.0, 0.9, 10000, 12).observed ==
        doctest::Approx(1.0).epsilon(1e-3));
  // near-trivial claims always pass
  CHECK(anderson_tail_check(0.0, 1.0, 1.0, 0.99, 10000, 13).pass);

  CHECK_THROWS_AS(anderson_tail_check(0.0, 1.0, 1.0, 1.5, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(anderson_tail_check(0.0, 0.5, 1.0, 0.5, 10, 1), std::invalid_argument);
}

TEST_CASE("max / sum of absolute normals against their thresholds") {
  // small c: threshold ~ 0.008, the max of two |N(0,1)| clears it a.s.
  CHECK(max_abs_normal_check({1.0, 1.0}, 0.01, 0.5, false, 20000, 21).pass);
  // absurdly large c must fail
  CHECK_FALSE(max_abs_normal_check({1.0, 1.0}, 10.0, 0.5, false, 20000, 22).pass);
  // sum version: E sum |Z_i| = 100 * sqrt(2/pi) = 79.8 >> c*delta*N = 10
  CHECK(max_abs_normal_check(std::vector<double>(100, 1.0), 0.1, 0.5, true, 5000, 23).pass);
  CHECK_THROWS_AS(max_abs_normal_check({}, 0.1, 0.5, false, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(max_abs_normal_check({0.0}, 0.1, 0.5, false, 10, 1), std::invalid_argument);
}

TEST_CASE("bridge L1 bound: small constants pass, huge constants fail") {
  const std::vector<double> ones4(4, 1.0);
  const BridgeL1Check ok = bridge_l1_check(8, ones4, 0.001, 0.1, nullptr, 20000, 31);
  CHECK(ok.tail.pass);
  const BridgeL1Check bad = bridge_l1_check(8, ones4, 5.0, 0.1, nullptr, 20000, 32);
  CHECK_FALSE(bad.tail.pass);
  CHECK(bad.tail.observed < 0.1);

  // a deterministic competitor cannot push the total below the bound
  const auto f = [](int, double t) { return 0.05 * t; };
  CHECK(bridge_l1_check(8, ones4, 0.001, 0.1, f, 20000, 33).tail.pass);

  CHECK_THROWS_AS(bridge_l1_check(7, ones4, 0.1, 0.1, nullptr, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(bridge_l1_check(8, {1.0}, 0.1, 0.1, nullptr, 10, 1), std::invalid_argument);
}

TEST_CASE("bridge L1 mean matches the Gaussian quadrature oracle (k = 2)") {
  // single bridge on a span of length 1/2; E ||B||_L1 = sqrt(pi/2) s^{3/2} / 4.
  // choose c at the analytic mean: the exceedance probability should be well
  // inside (0, 1), i.e. the simulated law is centered where the oracle says.
  const double s = 0.5;
  const double mean_l1 = std::sqrt(std::acos(-1.0) / 2.0) * std::pow(s, 1.5) / 4.0;
  const double c_at_mean = mean_l1;  // threshold = c * alpha / sqrt(1)
  const BridgeL1Check at_mean =
      bridge_l1_check(2, {1.0}, c_at_mean, 0.9, nullptr, 50000, 34);
  CHECK(at_mean.tail.observed > 0.25);
  CHECK(at_mean.tail.observed < 0.75);
}

TEST_CASE("bridge passing constant: positive and monotone in eps") {
  const std::vector<double> grid{1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
  const double c_strict = bridge_l1_passing_constant(8, 0.05, 20000, 41, grid);
  const double c_loose = bridge_l1_passing_constant(8, 0.5, 20000, 41, grid);
  CHECK(c_strict > 0.0);
  CHECK(c_loose >= c_strict);
}
