#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sdelab/brownian_oracle.hpp"
#include "sdelab/prob_tools.hpp"
#include "sdelab/schemes.hpp"
#include "sdelab/sde_model.hpp"

namespace sdelab {

// ---------------------------------------------------------------------------
// Error criteria.
// ---------------------------------------------------------------------------
enum class MetricKind { endpoint, lp, sup, max_pointwise };

inline const char* to_string(MetricKind k) {
  switch (k) {
    case MetricKind::endpoint: return "endpoint";
    case MetricKind::lp: return "Lp";
    case MetricKind::sup: return "sup";
    case MetricKind::max_pointwise: return "max_pointwise";
  }
  return "?";
}

struct ErrorMetric {
  MetricKind kind = MetricKind::endpoint;
  double p = 1.0;         // for Lp
  int resolution = 4096;  // minimum path-norm evaluation grid
};

// ---------------------------------------------------------------------------
// Reference solutions.  Each catalog family designates a reference scheme;
// specs with an exact solution use it directly.  The reference runs on a
// refinement (k_ref) of the same Brownian path as the compared scheme.
// ---------------------------------------------------------------------------
inline SchemeConfig reference_scheme_for(const SdeSpec& spec) {
  SchemeConfig cfg;
  const auto has_prefix = [&](const char* p) { return spec.name.rfind(p, 0) == 0; };
  if (has_prefix("cir") || has_prefix("squared_bessel")) {
    // the implicit square-root scheme needs 2 delta > sigma^2 / 2
    const double delta = spec.a(0, 0, 0.0, 0.0);
    const double sigma = spec.b(0, 0, 0.0, 1.0);
    cfg.id = 2.0 * delta > 0.5 * sigma * sigma ? SchemeId::drift_implicit_sqrt
                                               : SchemeId::euler;
  } else if (has_prefix("quintic")) {
    cfg.id = SchemeId::tamed_milstein;
  } else if (has_prefix("sgn_drift")) {
    cfg.id = SchemeId::euler;
  } else if (has_prefix("gbm")) {
    cfg.id = SchemeId::milstein;  // fallback when the exact formula is bypassed
  } else {
    throw std::invalid_argument("no designated reference scheme for family '" + spec.name +
                                "' and no exact solution");
  }
  return cfg;
}

// Reference trajectory at resolution k_ref on the given path.  With an exact
// solution the grid values come from the closed formula at each node.
inline TrajectoryOutput reference_solution(const SdeSpec& spec, PathState& path, int k_ref) {
  if (k_ref < 1) throw std::invalid_argument("reference_solution: k_ref >= 1");
  if (spec.exact) {
    TrajectoryOutput out;
    out.times.resize(static_cast<std::size_t>(k_ref) + 1);
    out.values.resize(static_cast<std::size_t>(k_ref) + 1);
    for (int l = 0; l <= k_ref; ++l) {
      const double t = spec.horizon * l / k_ref;
      const double w = l == 0 ? 0.0 : path.evaluate(t);
      out.times[static_cast<std::size_t>(l)] = t;
      out.values[static_cast<std::size_t>(l)] = (*spec.exact)(spec.x0, t, w);
    }
    out.evaluator = detail::linear_evaluator(out.times, out.values);
    return out;
  }
  SchemeConfig cfg = reference_scheme_for(spec);
  cfg.steps = k_ref;
  return run_scheme(spec, cfg, path);
}

// ---------------------------------------------------------------------------
// Monte Carlo error estimation.  Several scheme "arms" can share one
// replication (one path, one reference) so coupled comparisons are cheap.
// ---------------------------------------------------------------------------
struct SchemeArm {
  SchemeConfig cfg;
  bool linear_interp = true;  // evaluator used for path metrics
  std::string label;
};

struct McError {
  double mean = 0.0;
  double se = 0.0;
  int reps = 0;
  int discarded = 0;  // divergent runs, reported not hidden
};

namespace detail {

inline int effective_resolution(const ErrorMetric& metric, int n, int ref_multiplier) {
  int k_ref = std::max(metric.resolution, ref_multiplier * n);
  k_ref = ((k_ref + n - 1) / n) * n;  // multiple of the compared k
  return k_ref;
}

inline void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 1 || count < 2) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  const int workers = std::min(jobs, count);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Per-replication errors of each arm against the shared reference; the
// building block under mc_error / rate_experiment / probability_tail.
inline std::vector<std::vector<double>> replication_errors(
    const SdeSpec& spec, const std::vector<SchemeArm>& arms, const ErrorMetric& metric, int n,
    int M, std::uint64_t seed, int ref_multiplier = 16, int jobs = 1,
    std::vector<int>* discarded_out = nullptr) {
  if (M < 1) throw std::invalid_argument("replication_errors: M >= 1");
  if (n < 1) throw std::invalid_argument("replication_errors: n >= 1");
  const double T = spec.horizon;
  const int k_ref = detail::effective_resolution(metric, n, ref_multiplier);
  const std::uint64_t salt = seed ^ RngStream::mix(0x5de1ab00u + static_cast<std::uint64_t>(n));
  const bool endpoint_only = metric.kind == MetricKind::endpoint;
  const bool exact_endpoint = endpoint_only && spec.exact.has_value();

  std::vector<std::vector<double>> errs(arms.size(),
                                        std::vector<double>(static_cast<std::size_t>(M), -1.0));
  std::vector<int> discarded(arms.size(), 0);
  std::mutex disc_mutex;

  detail::parallel_for(M, jobs, [&](int r) {
    PathState path(salt, static_cast<std::uint64_t>(r));
    // reference first: every later query is then an exact-knot lookup
    TrajectoryOutput ref;
    double ref_end = 0.0;
    if (exact_endpoint) {
      ref_end = (*spec.exact)(spec.x0, T, path.evaluate(T));
    } else {
      ref = reference_solution(spec, path, k_ref);
      ref_end = ref.endpoint();
    }
    for (std::size_t a = 0; a < arms.size(); ++a) {
      SchemeConfig cfg = arms[a].cfg;
      cfg.steps = n;
      double e;
      try {
        TrajectoryOutput traj = run_scheme(spec, cfg, path);
        if (endpoint_only) {
          e = std::abs(traj.endpoint() - ref_end);
        } else {
          // composite trapezoid / max over the shared reference grid; the
          // arm's evaluator is piecewise linear unless cfg.continuous asked
          // for the continuous-time interpolant
          double acc = 0.0, mx = 0.0;
          const double hh = T / k_ref;
          for (int j = 0; j <= k_ref; ++j) {
            const double t = ref.times[static_cast<std::size_t>(j)];
            const double d = std::abs(traj(t) - ref.values[static_cast<std::size_t>(j)]);
            mx = std::max(mx, d);
            const double wgt = (j == 0 || j == k_ref) ? 0.5 : 1.0;
            acc += wgt * std::pow(d, metric.p);
          }
          if (metric.kind == MetricKind::sup)
            e = mx;
          else
            e = std::pow(acc * hh, 1.0 / metric.p);
        }
      } catch (const divergence_error&) {
        std::lock_guard<std::mutex> lock(disc_mutex);
        ++discarded[a];
        e = -1.0;  // sentinel, filtered out below
      }
      errs[a][static_cast<std::size_t>(r)] = e;
    }
  });

  for (auto& v : errs)
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return x < 0.0; }), v.end());
  if (discarded_out) *discarded_out = discarded;
  return errs;
}

inline McError mc_error(const SdeSpec& spec, const SchemeConfig& cfg, const ErrorMetric& metric,
                        int n, int M, std::uint64_t seed, int ref_multiplier = 16,
                        int jobs = 1) {
  std::vector<int> disc;
  SchemeArm arm;
  arm.cfg = cfg;
  const auto errs =
      replication_errors(spec, {arm}, metric, n, M, seed, ref_multiplier, jobs, &disc);
  McError out;
  out.discarded = disc[0];
  if (!errs[0].empty()) {
    const MeanSe ms = mean_se(errs[0]);
    out.mean = ms.mean;
    out.se = ms.se;
    out.reps = static_cast<int>(ms.n);
  }
  return out;
}

// max_pointwise needs cross-replication aggregation: sup over t of the
// pointwise mean error, evaluated on the shared grid.
inline McError mc_error_max_pointwise(const SdeSpec& spec, const SchemeConfig& cfg_in,
                                      const ErrorMetric& metric, int n, int M,
                                      std::uint64_t seed, int ref_multiplier = 16) {
  const double T = spec.horizon;
  const int k_ref = detail::effective_resolution(metric, n, ref_multiplier);
  const std::uint64_t salt = seed ^ RngStream::mix(0x5de1ab00u + static_cast<std::uint64_t>(n));
  std::vector<double> sum(static_cast<std::size_t>(k_ref) + 1, 0.0);
  std::vector<double> sum2(static_cast<std::size_t>(k_ref) + 1, 0.0);
  for (int r = 0; r < M; ++r) {
    PathState path(salt, static_cast<std::uint64_t>(r));
    TrajectoryOutput ref = reference_solution(spec, path, k_ref);
    SchemeConfig cfg = cfg_in;
    cfg.steps = n;
    TrajectoryOutput traj = run_scheme(spec, cfg, path);
    for (int j = 0; j <= k_ref; ++j) {
      const double d = std::abs(traj(T * j / k_ref) - ref.values[static_cast<std::size_t>(j)]);
      sum[static_cast<std::size_t>(j)] += d;
      sum2[static_cast<std::size_t>(j)] += d * d;
    }
  }
  McError out;
  out.reps = M;
  std::size_t arg = 0;
  for (std::size_t j = 0; j < sum.size(); ++j)
    if (sum[j] > sum[arg]) arg = j;
  out.mean = sum[arg] / M;
  const double var = std::max(0.0, sum2[arg] / M - out.mean * out.mean);
  out.se = M > 1 ? std::sqrt(var / (M - 1)) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Rate experiments.
// ---------------------------------------------------------------------------
struct RateReport {
  std::string label;
  std::string spec_name;
  std::string scheme;
  std::string metric;
  std::vector<int> ns;
  std::vector<double> means;
  std::vector<double> ses;
  LogLogFit fit;        // the fit used for the verdict
  LogLogFit plain_fit;  // plain power model (differs only for log-corrected runs)
  bool log_corrected = false;
  double target = 0.0;
  double band = 0.25;
  bool within = false;
  bool gate_ok = true;  // reference self-consistency gate
  double gate_factor = 0.0;
  std::string note;
  int M = 0;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;
};

struct RatePlan {
  std::string label;
  SchemeConfig scheme;
  ErrorMetric metric;
  std::vector<int> ns{16, 32, 64, 128, 256, 512};
  int M = 10000;
  double target = -1.0;
  double band = 0.25;
  bool log_corrected = false;  // fit err ~ C sqrt(ln(n+1)) n^s instead of C n^s
  int ref_multiplier = 16;
  bool relax_gate = false;  // document-only gate (CIR delta < 1 regime)
  int jobs = 1;
  std::string note;
};

// Richardson-style check that the reference is far more accurate than the
// smallest measured scheme error: |ref(k_ref) - ref(k_ref/2)| vs min error.
inline double reference_gate_factor(const SdeSpec& spec, const ErrorMetric& metric, int n,
                                    int ref_multiplier, std::uint64_t seed, int probes = 16) {
  if (spec.exact && metric.kind == MetricKind::endpoint) return
      std::numeric_limits<double>::infinity();
  const int k_ref = detail::effective_resolution(metric, n, ref_multiplier);
  const double T = spec.horizon;
  const std::uint64_t salt = seed ^ RngStream::mix(0xca7e0000u + static_cast<std::uint64_t>(n));
  double acc = 0.0;
  for (int r = 0; r < probes; ++r) {
    PathState path(salt, static_cast<std::uint64_t>(r));
    TrajectoryOutput fine = reference_solution(spec, path, k_ref);
    TrajectoryOutput half = reference_solution(spec, path, k_ref / 2);
    if (metric.kind == MetricKind::endpoint) {
      acc += std::abs(fine.endpoint() - half.endpoint());
    } else {
      double m = 0.0, tr = 0.0;
      for (int j = 0; j <= k_ref; ++j) {
        const double t = T * j / k_ref;
        const double d = std::abs(fine.values[static_cast<std::size_t>(j)] - half(t));
        m = std::max(m, d);
        tr += ((j == 0 || j == k_ref) ? 0.5 : 1.0) * std::pow(d, metric.p);
      }
      acc += metric.kind == MetricKind::sup ? m : std::pow(tr * T / k_ref, 1.0 / metric.p);
    }
  }
  return acc / probes;
}

inline RateReport rate_experiment(const SdeSpec& spec, const RatePlan& plan,
                                  std::uint64_t seed) {
  if (plan.ns.size() < 4) throw std::invalid_argument("rate_experiment: need >= 4 grid points");
  const auto t_start = std::chrono::steady_clock::now();
  RateReport rep;
  rep.label = plan.label;
  rep.spec_name = spec.name;
  rep.scheme = to_string(plan.scheme.id);
  rep.metric = to_string(plan.metric.kind);
  rep.target = plan.target;
  rep.band = plan.band;
  rep.log_corrected = plan.log_corrected;
  rep.M = plan.M;
  rep.seed = seed;
  rep.note = plan.note;

  for (int n : plan.ns) {
    McError e = plan.metric.kind == MetricKind::max_pointwise
                    ? mc_error_max_pointwise(spec, plan.scheme, plan.metric, n, plan.M, seed,
                                             plan.ref_multiplier)
                    : mc_error(spec, plan.scheme, plan.metric, n, plan.M, seed,
                               plan.ref_multiplier, plan.jobs);
    rep.ns.push_back(n);
    rep.means.push_back(e.mean);
    rep.ses.push_back(e.se);
  }

  std::vector<double> nsd(rep.ns.begin(), rep.ns.end());
  rep.plain_fit = loglog_fit(nsd, rep.means, rep.ses);
  if (plan.log_corrected) {
    std::vector<double> offs(nsd.size());
    for (std::size_t i = 0; i < nsd.size(); ++i)
      offs[i] = 0.5 * std::log(std::log(nsd[i] + 1.0));
    rep.fit = loglog_fit(nsd, rep.means, rep.ses, offs);
  } else {
    rep.fit = rep.plain_fit;
  }
  rep.within = rep.fit.slope >= plan.target - plan.band && rep.fit.slope <= plan.target + plan.band;

  // reference self-consistency gate at the largest n
  const double gate = reference_gate_factor(spec, plan.metric, plan.ns.back(),
                                            plan.ref_multiplier, seed);
  const double min_err = *std::min_element(rep.means.begin(), rep.means.end());
  rep.gate_factor = std::isfinite(gate) && gate > 0.0
                        ? min_err / gate
                        : std::numeric_limits<double>::infinity();
  rep.gate_ok = plan.relax_gate || rep.gate_factor >= 8.0;
  if (plan.relax_gate && rep.gate_factor < 8.0)
    rep.note += (rep.note.empty() ? "" : "; ") +
                std::string("reference gate relaxed: slope-only (lower-bound) comparison");

  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Probability-tail probing: empirical P(error >= c * rate(n)) per n, with the
// uniform-in-n floor gamma_hat = min over n of the lower Wilson bounds.
// ---------------------------------------------------------------------------
enum class RateForm { inv_n, sqrt_log_over_n, inv_sqrt_n };

inline double rate_value(RateForm f, int n) {
  switch (f) {
    case RateForm::inv_n: return 1.0 / n;
    case RateForm::sqrt_log_over_n: return std::sqrt(std::log(n + 1.0) / n);
    case RateForm::inv_sqrt_n: return 1.0 / std::sqrt(static_cast<double>(n));
  }
  return 0.0;
}

struct TailReport {
  std::vector<int> ns;
  std::vector<WilsonInterval> exceedance;
  double gamma_floor = 0.0;  // min over n of the lower Wilson bounds
};

inline TailReport probability_tail(const SdeSpec& spec, const SchemeConfig& cfg,
                                   const ErrorMetric& metric, double c, RateForm form,
                                   const std::vector<int>& ns, int M, std::uint64_t seed,
                                   int ref_multiplier = 16, int jobs = 1) {
  TailReport rep;
  rep.gamma_floor = 1.0;
  SchemeArm arm;
  arm.cfg = cfg;
  for (int n : ns) {
    const auto errs = replication_errors(spec, {arm}, metric, n, M, seed, ref_multiplier, jobs);
    const double threshold = c * rate_value(form, n);
    std::size_t hits = 0;
    for (double e : errs[0])
      if (e >= threshold) ++hits;
    rep.ns.push_back(n);
    rep.exceedance.push_back(wilson_interval(hits, errs[0].size()));
    rep.gamma_floor = std::min(rep.gamma_floor, rep.exceedance.back().lo);
  }
  return rep;
}

}  // namespace sdelab
