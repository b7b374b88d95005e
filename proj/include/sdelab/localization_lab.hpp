#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sdelab/brownian_oracle.hpp"
#include "sdelab/prob_tools.hpp"
#include "sdelab/schemes.hpp"
#include "sdelab/sde_model.hpp"

namespace sdelab {

// Result of running the same scheme on the original and the localized
// equation against one shared Brownian path.
//
// Exit detection is at grid nodes only.  `stayed` means the original
// trajectory sat inside I at every node that fed an update (l = 0..k-1);
// with that grid-level convention, "stayed" and "all k+1 nodes agree
// bitwise" are equivalent events, the discrete analogue of the
// positive-probability full-agreement statement.
struct CouplingResult {
  std::vector<double> times;
  std::vector<double> original;
  std::vector<double> localized;
  int exit_index = -1;      // first node where either trajectory is outside I; k+1 if none
  int agreed_through = -1;  // last node index with exact bitwise agreement from the start
  bool stayed = false;      // no exit strictly before the final node
  bool full_agreement = false;
};

inline CouplingResult coupled_simulate(const SdeSpec& spec, const SdeSpec& localized_spec,
                                       const Interval& inner, const SchemeConfig& cfg,
                                       PathState& path) {
  if (localized_spec.horizon != spec.horizon || localized_spec.x0 != spec.x0)
    throw std::invalid_argument("coupled_simulate: specs must share horizon and x0");
  TrajectoryOutput orig = run_scheme(spec, cfg, path);
  TrajectoryOutput loc = run_scheme(localized_spec, cfg, path);

  CouplingResult res;
  res.times = orig.times;
  res.original = orig.values;
  res.localized = loc.values;
  const int k = cfg.steps;
  res.exit_index = k + 1;
  for (int l = 0; l <= k; ++l) {
    if (!inner.contains(orig.values[static_cast<std::size_t>(l)]) ||
        !inner.contains(loc.values[static_cast<std::size_t>(l)])) {
      res.exit_index = l;
      break;
    }
  }
  res.agreed_through = -1;
  for (int l = 0; l <= k; ++l) {
    if (orig.values[static_cast<std::size_t>(l)] != loc.values[static_cast<std::size_t>(l)]) break;
    res.agreed_through = l;
  }
  res.stayed = res.exit_index >= k;
  res.full_agreement = res.agreed_through == k;
  return res;
}

struct StayEstimate {
  double estimate = 0.0;
  WilsonInterval ci;
  int stayed = 0;
  int reps = 0;
};

// P(X_hat(t) in I for all grid t <= S) by Monte Carlo with Wilson 95% CI.
inline StayEstimate stay_probability(const SdeSpec& spec, const Interval& interval, double S,
                                     SchemeConfig cfg, int reps, std::uint64_t seed) {
  if (reps < 100) throw std::invalid_argument("stay_probability: need >= 100 replications");
  if (!(S > 0.0 && S <= spec.horizon))
    throw std::invalid_argument("stay_probability: S in (0, horizon]");
  SdeSpec clipped = spec;
  clipped.horizon = S;
  StayEstimate out;
  out.reps = reps;
  for (int r = 0; r < reps; ++r) {
    PathState path(seed, static_cast<std::uint64_t>(r));
    TrajectoryOutput traj = run_scheme(clipped, cfg, path);
    bool in = true;
    for (double v : traj.values)
      if (!interval.contains(v)) {
        in = false;
        break;
      }
    if (in) ++out.stayed;
  }
  out.ci = wilson_interval(static_cast<std::size_t>(out.stayed), static_cast<std::size_t>(reps));
  out.estimate = out.ci.estimate;
  return out;
}

}  // namespace sdelab
