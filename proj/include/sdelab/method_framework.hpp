#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdelab/brownian_oracle.hpp"
#include "sdelab/schemes.hpp"
#include "sdelab/sde_model.hpp"

namespace sdelab {

// A method is a sequence of rule triples acting on the data vector
//   D_k = (X(0), W(tau_1), ..., W(tau_k)).
// site_rule picks the next observation time from the data seen so far,
// stop_rule decides termination, output_rule post-processes the transcript.
// The harness enforces that rules never see anything beyond D_k.
struct MethodOutput {
  std::optional<double> scalar;            // e.g. an approximation of X(T)
  std::optional<TrajectoryOutput> traj;    // or a whole path approximation
};

struct AdaptiveMethod {
  std::string name;
  // data = (x0, w_1, ..., w_{k-1}) when choosing the k-th site / deciding
  // after the k-th observation.
  std::function<double(int k, std::span<const double> data)> site_rule;
  std::function<bool(int k, std::span<const double> data)> stop_rule;
  std::function<MethodOutput(const SdeSpec& spec, std::span<const double> times,
                             std::span<const double> data)> output_rule;
  std::uint64_t declared_budget = 0;  // worst-case bound on nu, 0 = none declared
};

struct MethodRun {
  MethodOutput output;
  std::uint64_t evaluations = 0;                      // nu consumed by this run
  std::vector<std::pair<double, double>> transcript;  // (tau_i, W(tau_i))
};

// Replays the site rule against prefixes of a transcript and checks that it
// reproduces the recorded query times bit for bit: the machine-checkable half
// of information admissibility.
inline bool verify_transcript(const AdaptiveMethod& m, double x0,
                              const std::vector<std::pair<double, double>>& transcript) {
  std::vector<double> data{x0};
  for (std::size_t k = 0; k < transcript.size(); ++k) {
    const double tau = m.site_rule(static_cast<int>(k) + 1, data);
    if (tau != transcript[k].first) return false;
    data.push_back(transcript[k].second);
  }
  return true;
}

inline MethodRun run_method(const AdaptiveMethod& m, const SdeSpec& spec, PathState& path,
                            std::uint64_t hard_cap = 1000000) {
  const std::uint64_t nu0 = path.cost();
  std::vector<double> data{spec.x0};
  std::vector<double> times{0.0};
  MethodRun run;
  for (std::uint64_t k = 1;; ++k) {
    if (k > hard_cap)
      throw divergence_error("run_method: hard evaluation cap exceeded (" +
                             std::to_string(hard_cap) + ")");
    const double tau = m.site_rule(static_cast<int>(k), data);
    if (!(tau >= 0.0) || !std::isfinite(tau))
      throw std::invalid_argument("site rule produced an invalid time");
    const double w = path.evaluate(tau);
    data.push_back(w);
    times.push_back(tau);
    run.transcript.emplace_back(tau, w);
    if (m.stop_rule(static_cast<int>(k), data)) break;
  }
  run.output = m.output_rule(spec, times, data);
  run.evaluations = path.cost() - nu0;
  if (!verify_transcript(m, spec.x0, run.transcript))
    throw std::logic_error("method is not information-admissible: replay mismatch");
  return run;
}

// ---------------------------------------------------------------------------
// Equidistant subclass: observe W at l T/n and feed a fixed scheme.  The
// output rule reruns the scheme against the frozen transcript, so it is
// bit-identical to running the scheme on the oracle directly while keeping
// nu = n exactly.
// ---------------------------------------------------------------------------
inline AdaptiveMethod equidistant_wrapper(int n, SchemeConfig cfg, double horizon = 1.0) {
  if (n < 1) throw std::invalid_argument("equidistant_wrapper: need n >= 1");
  cfg.steps = n;
  AdaptiveMethod m;
  m.name = std::string("equidistant_") + to_string(cfg.id) + "_n" + std::to_string(n);
  m.declared_budget = static_cast<std::uint64_t>(n);
  m.site_rule = [n, horizon](int k, std::span<const double>) {
    return horizon * k / n;
  };
  m.stop_rule = [n](int k, std::span<const double>) { return k >= n; };
  m.output_rule = [cfg](const SdeSpec& spec, std::span<const double> times,
                        std::span<const double> data) {
    std::vector<double> ts(times.begin(), times.end());
    std::vector<double> ws(data.begin(), data.end());
    ws[0] = 0.0;  // slot 0 of the data vector holds x0, the path starts at 0
    RecordedPath rec(std::move(ts), std::move(ws));
    SchemeConfig run_cfg = cfg;
    run_cfg.continuous = false;  // transcript has no interior information
    TrajectoryOutput traj = run_scheme(spec, run_cfg, rec, data[0]);
    MethodOutput out;
    out.scalar = traj.endpoint();
    out.traj = std::move(traj);
    return out;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Average-cost estimation over replications; runs that blow the hard cap are
// discarded and counted.
// ---------------------------------------------------------------------------
struct CostEstimate {
  double mean_cost = 0.0;
  double se = 0.0;
  std::uint64_t max_seen = 0;
  int discarded = 0;
  bool within_budget = true;  // max_seen <= declared budget (if declared)
};

inline CostEstimate average_cost(const AdaptiveMethod& m, const SdeSpec& spec, int reps,
                                 std::uint64_t seed, std::uint64_t hard_cap = 1000000) {
  if (reps < 1) throw std::invalid_argument("average_cost: need reps >= 1");
  CostEstimate est;
  double sum = 0.0, sum2 = 0.0;
  int used = 0;
  for (int r = 0; r < reps; ++r) {
    PathState path(seed, static_cast<std::uint64_t>(r));
    try {
      MethodRun run = run_method(m, spec, path, hard_cap);
      const double nu = static_cast<double>(run.evaluations);
      sum += nu;
      sum2 += nu * nu;
      est.max_seen = std::max(est.max_seen, run.evaluations);
      ++used;
    } catch (const divergence_error&) {
      ++est.discarded;
    }
  }
  if (used > 0) {
    est.mean_cost = sum / used;
    const double var = std::max(0.0, sum2 / used - est.mean_cost * est.mean_cost);
    est.se = used > 1 ? std::sqrt(var / (used - 1)) : 0.0;
  }
  if (m.declared_budget > 0) est.within_budget = est.max_seen <= m.declared_budget;
  return est;
}

// ---------------------------------------------------------------------------
// Demonstration of genuinely adaptive site placement with a deterministic
// worst-case budget: Euler stepping on a coarse grid of floor(n/m) spans,
// where a span whose left state lies in `refine_region` is subdivided into m
// fine steps.  Worst case nu = floor(n/m) * m <= n.
// ---------------------------------------------------------------------------
inline AdaptiveMethod adaptive_demo(const SdeSpec& spec, int budget,
                                    std::optional<Interval> refine_region, int fine_factor) {
  if (fine_factor < 1) throw std::invalid_argument("adaptive_demo: fine_factor >= 1");
  if (budget < 2 * fine_factor)
    throw std::invalid_argument("adaptive_demo: budget must be >= 2 * fine_factor");
  const int coarse = budget / fine_factor;
  const double T = spec.horizon;
  const int m_fac = fine_factor;
  const int total_ticks = coarse * m_fac;  // fine grid resolution

  // Recompute the (deterministic, data-measurable) Euler state from the data
  // vector; every rule sees only D_k, so the refinement decisions are
  // functions of the observed increments alone.  Times live on the exact fine
  // grid tick/total_ticks so the worst-case step count is exactly coarse*m.
  auto state_and_tick = [spec, refine_region, m_fac, T,
                         total_ticks](std::span<const double> data) -> std::pair<double, int> {
    double x = data[0];
    int tick = 0;
    double w_prev = 0.0;
    const auto& c = spec.coeffs;
    for (std::size_t i = 1; i < data.size(); ++i) {
      const bool fine = refine_region && refine_region->contains(x);
      const int step = std::min(fine ? 1 : m_fac, total_ticks - tick);
      const double t = T * tick / total_ticks;
      const double h = T * (tick + step) / total_ticks - t;
      const double w = data[i];
      x += c.a(0, 0, t, x) * h + c.b(0, 0, t, x) * (w - w_prev);
      tick += step;
      w_prev = w;
    }
    return {x, tick};
  };

  AdaptiveMethod m;
  m.name = "adaptive_demo_n" + std::to_string(budget) + "_m" + std::to_string(fine_factor);
  m.declared_budget = static_cast<std::uint64_t>(coarse * fine_factor);
  m.site_rule = [state_and_tick, refine_region, m_fac, T, total_ticks](
                    int, std::span<const double> data) {
    const auto [x, tick] = state_and_tick(data);
    const bool fine = refine_region && refine_region->contains(x);
    const int step = std::min(fine ? 1 : m_fac, total_ticks - tick);
    return T * (tick + step) / total_ticks;
  };
  m.stop_rule = [state_and_tick, total_ticks](int, std::span<const double> data) {
    return state_and_tick(data).second >= total_ticks;
  };
  m.output_rule = [](const SdeSpec& spec2, std::span<const double> times,
                     std::span<const double> data) {
    // Euler along the visited (possibly non-uniform) grid
    double x = data[0];
    const auto& c = spec2.coeffs;
    for (std::size_t i = 1; i < data.size(); ++i) {
      const double h = times[i] - times[i - 1];
      const double dw = data[i] - (i == 1 ? 0.0 : data[i - 1]);
      x += c.a(0, 0, times[i - 1], x) * h + c.b(0, 0, times[i - 1], x) * dw;
    }
    MethodOutput out;
    out.scalar = x;
    return out;
  };
  return m;
}

}  // namespace sdelab
