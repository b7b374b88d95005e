#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdelab/rng.hpp"

namespace sdelab {

// ---------------------------------------------------------------------------
// Small statistics helpers.
// ---------------------------------------------------------------------------
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_se: empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double m = sum / xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  MeanSe out;
  out.mean = m;
  out.n = xs.size();
  out.se = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1) / xs.size()) : 0.0;
  return out;
}

struct WilsonInterval {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval for a binomial proportion (z = 1.96 by default).
inline WilsonInterval wilson_interval(std::size_t successes, std::size_t trials,
                                      double z = 1.959963984540054) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: no trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {p, std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Two-sample Kolmogorov-Smirnov: returns the KS statistic and an approximate
// p-value (asymptotic Kolmogorov distribution).
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(ia / na - ib / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    p += sign * 2.0 * std::exp(-2.0 * lambda * lambda * j * j);
    sign = -sign;
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

// ---------------------------------------------------------------------------
// Log-log regression for convergence rates.  Weighted least squares of
// ln(err) on ln(n); weights default to (mean/se)^2, the inverse variance of
// ln(err) by the delta method.
// ---------------------------------------------------------------------------
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double slope_lo = 0.0;  // 95% CI
  double slope_hi = 0.0;
  double r2 = 0.0;
  double rss = 0.0;  // residual sum of squares in log space (unweighted)
};

inline LogLogFit loglog_fit(const std::vector<double>& ns, const std::vector<double>& errs,
                            const std::vector<double>& ses = {},
                            const std::vector<double>& log_offsets = {}) {
  const std::size_t n = ns.size();
  if (n < 2 || errs.size() != n)
    throw std::invalid_argument("loglog_fit: need >= 2 matching points");
  std::vector<double> x(n), y(n), w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ns[i] > 0.0) || !(errs[i] > 0.0) || !std::isfinite(errs[i]))
      throw std::invalid_argument("loglog_fit: all values must be positive and finite");
    x[i] = std::log(ns[i]);
    y[i] = std::log(errs[i]);
    if (!log_offsets.empty()) y[i] -= log_offsets[i];  // fixed model offsets
    if (!ses.empty() && ses[i] > 0.0) {
      const double rel = ses[i] / errs[i];
      w[i] = 1.0 / (rel * rel);
    }
  }
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (det <= 0.0) throw std::invalid_argument("loglog_fit: degenerate abscissae");
  LogLogFit fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;

  double rss_w = 0.0, tss_w = 0.0;
  const double ybar = sy / sw;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss_w += w[i] * r * r;
    tss_w += w[i] * (y[i] - ybar) * (y[i] - ybar);
    fit.rss += r * r;
  }
  fit.r2 = tss_w > 0.0 ? 1.0 - rss_w / tss_w : 1.0;
  const double dof = static_cast<double>(n) - 2.0;
  const double s2 = dof > 0.0 ? rss_w / dof : 0.0;
  fit.slope_se = std::sqrt(s2 * sw / det);
  // 97.5% t quantiles for small dof; 1.96 beyond
  static const double tq[] = {0, 12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306};
  const double t = dof >= 1 && dof <= 8 ? tq[static_cast<int>(dof)] : 1.96;
  fit.slope_lo = fit.slope - t * fit.slope_se;
  fit.slope_hi = fit.slope + t * fit.slope_se;
  return fit;
}

// ---------------------------------------------------------------------------
// Monte Carlo witnesses of the three Gaussian lower-bound lemmas.  Each check
// passes when the empirical frequency clears the claimed bound minus `slack`
// standard errors.
// ---------------------------------------------------------------------------
struct TailCheck {
  double claimed = 0.0;   // lower bound asserted by the lemma
  double observed = 0.0;  // empirical frequency
  double se = 0.0;
  bool pass = false;
};

// P(|Z| >= eps * sigma0) >= 1 - eps whenever Var(Z) >= sigma0^2.
inline TailCheck anderson_tail_check(double mean, double sd, double sigma0, double eps,
                                     int reps, std::uint64_t seed, double slack = 3.0) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("anderson_tail_check: eps in (0,1)");
  if (!(sd >= sigma0)) throw std::invalid_argument("anderson_tail_check: need Var(Z) >= sigma0^2");
  RngStream rng(seed, 0);
  std::size_t hits = 0;
  for (int r = 0; r < reps; ++r)
    if (std::abs(mean + sd * rng.gaussian()) >= eps * sigma0) ++hits;
  TailCheck out;
  out.claimed = 1.0 - eps;
  out.observed = static_cast<double>(hits) / reps;
  out.se = std::sqrt(out.observed * (1.0 - out.observed) / reps);
  out.pass = out.observed >= out.claimed - slack * std::max(out.se, 1e-9);
  return out;
}

// For independent Z_i ~ N(0, delta_i^2) with delta_i >= delta > 0:
//   P( max_i |Z_i| >= c * delta * sqrt(ln N) ) >= 1 - eps   (c small enough)
//   P( sum_i |Z_i| >= c * delta * N )          >= 1 - eps
inline TailCheck max_abs_normal_check(const std::vector<double>& deltas, double c, double eps,
                                      bool sum_version, int reps, std::uint64_t seed,
                                      double slack = 3.0) {
  if (deltas.empty()) throw std::invalid_argument("max_abs_normal_check: empty variances");
  const std::size_t n = deltas.size();
  double dmin = deltas[0];
  for (double d : deltas) {
    if (!(d > 0.0)) throw std::invalid_argument("max_abs_normal_check: deltas must be positive");
    dmin = std::min(dmin, d);
  }
  const double threshold = sum_version
                               ? c * dmin * static_cast<double>(n)
                               : c * dmin * std::sqrt(std::log(static_cast<double>(n)));
  RngStream rng(seed, 0);
  std::size_t hits = 0;
  for (int r = 0; r < reps; ++r) {
    double stat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = std::abs(deltas[i] * rng.gaussian());
      stat = sum_version ? stat + z : std::max(stat, z);
    }
    if (stat >= threshold) ++hits;
  }
  TailCheck out;
  out.claimed = 1.0 - eps;
  out.observed = static_cast<double>(hits) / reps;
  out.se = std::sqrt(out.observed * (1.0 - out.observed) / reps);
  out.pass = out.observed >= out.claimed - slack * std::max(out.se, 1e-9);
  return out;
}

// ---------------------------------------------------------------------------
// Bridge L1 lower bound: for k/2 independent Brownian bridges B_i on spans of
// length 1/k, scaled by a_i with |a_i| >= alpha, and arbitrary measurable
// competitors f_i,
//   P( sum_i ||a_i B_i - f_i||_{L1} >= c * alpha / sqrt(k/2) ) >= 1 - eps
// for c small enough.  Each bridge is simulated on `subpoints` interior
// points, the L1 norm by the composite trapezoid rule.
// ---------------------------------------------------------------------------
struct BridgeL1Check {
  double threshold = 0.0;
  TailCheck tail;
};

// f_fn(i, t) is the competitor on bridge i at local time t in [0, 1/k];
// pass nullptr for the zero competitor.
inline BridgeL1Check bridge_l1_check(int k, const std::vector<double>& scales, double c,
                                     double eps,
                                     const std::function<double(int, double)>& f_fn,
                                     int reps, std::uint64_t seed, int subpoints = 64,
                                     double slack = 3.0) {
  if (k < 2 || k % 2 != 0) throw std::invalid_argument("bridge_l1_check: k must be even, >= 2");
  const int nb = k / 2;
  if (static_cast<int>(scales.size()) != nb)
    throw std::invalid_argument("bridge_l1_check: need k/2 scale factors");
  double alpha = std::abs(scales[0]);
  for (double a : scales) alpha = std::min(alpha, std::abs(a));
  if (!(alpha > 0.0)) throw std::invalid_argument("bridge_l1_check: scales must be nonzero");

  const double span = 1.0 / k;
  const double threshold = c * alpha / std::sqrt(static_cast<double>(nb));
  RngStream rng(seed, 1);
  std::size_t hits = 0;
  std::vector<double> bridge(static_cast<std::size_t>(subpoints) + 1);
  for (int r = 0; r < reps; ++r) {
    double total = 0.0;
    for (int i = 0; i < nb; ++i) {
      // sequential conditional sampling of a 0->0 bridge on [0, span]
      bridge[0] = 0.0;
      for (int j = 1; j < subpoints; ++j) {
        const double t_prev = span * (j - 1) / subpoints;
        const double t_cur = span * j / subpoints;
        const double rem = span - t_prev;
        const double mean = bridge[static_cast<std::size_t>(j) - 1] * (span - t_cur) / rem;
        const double var = (t_cur - t_prev) * (span - t_cur) / rem;
        bridge[static_cast<std::size_t>(j)] = mean + std::sqrt(var) * rng.gaussian();
      }
      bridge[static_cast<std::size_t>(subpoints)] = 0.0;
      double l1 = 0.0;
      for (int j = 0; j <= subpoints; ++j) {
        const double t = span * j / subpoints;
        const double v = std::abs(scales[static_cast<std::size_t>(i)] *
                                      bridge[static_cast<std::size_t>(j)] -
                                  (f_fn ? f_fn(i, t) : 0.0));
        l1 += (j == 0 || j == subpoints) ? 0.5 * v : v;
      }
      total += l1 * span / subpoints;
    }
    if (total >= threshold) ++hits;
  }
  BridgeL1Check out;
  out.threshold = threshold;
  out.tail.claimed = 1.0 - eps;
  out.tail.observed = static_cast<double>(hits) / reps;
  out.tail.se = std::sqrt(out.tail.observed * (1.0 - out.tail.observed) / reps);
  out.tail.pass = out.tail.observed >= out.tail.claimed - slack * std::max(out.tail.se, 1e-9);
  return out;
}

// Largest c in a descending sweep for which the bridge L1 check passes.
inline double bridge_l1_passing_constant(int k, double eps, int reps, std::uint64_t seed,
                                         const std::vector<double>& c_grid) {
  std::vector<double> scales(static_cast<std::size_t>(k / 2), 1.0);
  std::vector<double> grid = c_grid;
  std::sort(grid.rbegin(), grid.rend());
  for (double c : grid) {
    const auto chk = bridge_l1_check(k, scales, c, eps, nullptr, reps, seed);
    if (chk.tail.pass) return c;
  }
  return 0.0;
}

}  // namespace sdelab
