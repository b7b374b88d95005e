#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdelab/brownian_oracle.hpp"
#include "sdelab/sde_model.hpp"

namespace sdelab {

enum class SchemeId {
  euler,
  milstein,
  wagner_platen_truncated,
  tamed_euler,
  tamed_milstein,
  drift_implicit_sqrt,
};

inline const char* to_string(SchemeId id) {
  switch (id) {
    case SchemeId::euler: return "euler";
    case SchemeId::milstein: return "milstein";
    case SchemeId::wagner_platen_truncated: return "wagner_platen_truncated";
    case SchemeId::tamed_euler: return "tamed_euler";
    case SchemeId::tamed_milstein: return "tamed_milstein";
    case SchemeId::drift_implicit_sqrt: return "drift_implicit_sqrt";
  }
  return "?";
}

inline SchemeId scheme_from_string(const std::string& s) {
  for (SchemeId id : {SchemeId::euler, SchemeId::milstein, SchemeId::wagner_platen_truncated,
                      SchemeId::tamed_euler, SchemeId::tamed_milstein,
                      SchemeId::drift_implicit_sqrt})
    if (s == to_string(id)) return id;
  throw std::invalid_argument("unknown scheme: " + s);
}

struct SchemeConfig {
  SchemeId id = SchemeId::euler;
  int steps = 1;
  bool continuous = false;  // continuous-time interpolant instead of grid-only
};

// Grid values of one scheme run plus an evaluator for interior times.
// The default evaluator is piecewise linear; the continuous-time Euler and
// Milstein interpolants carry per-span coefficients and ask the supplied
// Wiener source for interior path values.
struct TrajectoryOutput {
  std::vector<double> times;
  std::vector<double> values;
  std::function<double(double)> evaluator;

  double endpoint() const { return values.back(); }
  double operator()(double t) const { return evaluator(t); }
};

namespace detail {

inline void check_finite(double x, int step, const char* scheme) {
  if (!std::isfinite(x))
    throw divergence_error(std::string(scheme) + " produced a non-finite value at step " +
                           std::to_string(step));
}

inline std::function<double(double)> linear_evaluator(std::vector<double> times,
                                                      std::vector<double> values) {
  return [times = std::move(times), values = std::move(values)](double t) -> double {
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return values[i - 1] + w * (values[i] - values[i - 1]);
  };
}

}  // namespace detail

// Replace a trajectory's evaluator by the piecewise-linear interpolant of its
// grid values.
inline TrajectoryOutput interpolate_linear(const TrajectoryOutput& traj) {
  TrajectoryOutput out;
  out.times = traj.times;
  out.values = traj.values;
  out.evaluator = detail::linear_evaluator(out.times, out.values);
  return out;
}

// ---------------------------------------------------------------------------
// Core scheme runners.  They are templated on the Wiener source W (a callable
// t -> W(t)) so the same arithmetic can run either against the live oracle or
// against a frozen transcript.  W(0) is taken to be 0 without a query.
// ---------------------------------------------------------------------------

template <class WienerFn>
TrajectoryOutput run_scheme(const SdeSpec& spec, const SchemeConfig& cfg, WienerFn&& wf,
                            double x0) {
  const int k = cfg.steps;
  if (k < 1) throw std::invalid_argument("scheme: need at least one step");
  const double T = spec.horizon;
  const double h = T / k;
  const auto& c = spec.coeffs;

  // taming of an increment coefficient, rho = 1
  const auto tame = [k](double f) { return f / (1.0 + std::abs(f) / k); };

  std::vector<double> times(static_cast<std::size_t>(k) + 1);
  std::vector<double> values(static_cast<std::size_t>(k) + 1);
  std::vector<double> wvals(static_cast<std::size_t>(k) + 1);
  times[0] = 0.0;
  values[0] = x0;
  wvals[0] = 0.0;

  if (cfg.id == SchemeId::drift_implicit_sqrt) {
    // Positivity-preserving square-root scheme for dX = (d - b X)dt + s sqrt(X) dW:
    // advance Y = sqrt(X) through the closed-form positive root of
    //   (1 + b h) Y^2 = (Y_l + s dW/2)^2 + (d - s^2/4) h,
    // which for s -> 0 collapses to deterministic implicit Euler in X.
    if (spec.name.rfind("cir", 0) != 0 && spec.name.rfind("squared_bessel", 0) != 0)
      throw std::invalid_argument("drift_implicit_sqrt: only valid for the square-root family");
    if (x0 <= 0.0) throw std::invalid_argument("drift_implicit_sqrt: need x0 > 0");
    const double t0 = 0.0;
    const double delta = c.a(0, 0, t0, 0.0);                    // a(x) = delta - beta x
    const double beta = -c.a(0, 1, t0, 0.0);
    const double sigma = c.b(0, 0, t0, 1.0);                    // b(x) = sigma sqrt(x)
    if (!(2.0 * delta > sigma * sigma / 2.0))
      throw std::invalid_argument("drift_implicit_sqrt: parameter regime requires 2 delta > sigma^2/2");
    double y = std::sqrt(x0);
    for (int l = 0; l < k; ++l) {
      const double t_next = T * (l + 1) / k;
      const double w_next = wf(t_next);
      const double dw = w_next - wvals[l];
      const double u = y + 0.5 * sigma * dw;
      const double y2 = (u * u + (delta - 0.25 * sigma * sigma) * h) / (1.0 + beta * h);
      y = std::sqrt(y2);
      detail::check_finite(y, l, "drift_implicit_sqrt");
      times[static_cast<std::size_t>(l) + 1] = t_next;
      wvals[static_cast<std::size_t>(l) + 1] = w_next;
      values[static_cast<std::size_t>(l) + 1] = y2;
    }
    TrajectoryOutput out;
    out.times = std::move(times);
    out.values = std::move(values);
    out.evaluator = detail::linear_evaluator(out.times, out.values);
    return out;
  }

  const bool tamed = cfg.id == SchemeId::tamed_euler || cfg.id == SchemeId::tamed_milstein;
  const bool milstein_term = cfg.id == SchemeId::milstein || cfg.id == SchemeId::tamed_milstein ||
                             cfg.id == SchemeId::wagner_platen_truncated;
  const bool wp = cfg.id == SchemeId::wagner_platen_truncated;

  struct SpanCoef {
    double a, b, bb01;
  };
  std::vector<SpanCoef> span;
  if (cfg.continuous) span.resize(static_cast<std::size_t>(k));

  double x = x0;
  for (int l = 0; l < k; ++l) {
    const double t = T * l / k;
    const double t_next = T * (l + 1) / k;
    const double w_next = wf(t_next);
    const double dw = w_next - wvals[l];

    double av = c.a(0, 0, t, x);
    double bv = c.b(0, 0, t, x);
    if (tamed) {
      av = tame(av);
      bv = tame(bv);
    }
    double x_next = x + av * h + bv * dw;
    double bb01 = 0.0;
    if (milstein_term) {
      const double b01 = c.b(0, 1, t, x);
      bb01 = 0.5 * c.b(0, 0, t, x) * b01;
      if (tamed) bb01 = tame(bb01);
      x_next += bb01 * (dw * dw - h);
      if (wp) {
        const double a01 = c.a(0, 1, t, x);
        const double a02 = c.a(0, 2, t, x);
        const double a10 = c.a(1, 0, t, x);
        const double b02 = c.b(0, 2, t, x);
        const double b10 = c.b(1, 0, t, x);
        const double c_wh = b10 + av * b01 - 0.5 * bv * b01 * b01;
        const double c_w3 = (bv * b01 * b01 + bv * bv * b02) / 6.0;
        const double c_h2 = 0.5 * (a10 + av * a01 + 0.5 * bv * bv * a02);
        x_next += c_wh * dw * h + c_w3 * dw * dw * dw + c_h2 * h * h;
      }
    }
    detail::check_finite(x_next, l, to_string(cfg.id));
    if (cfg.continuous) span[static_cast<std::size_t>(l)] = {av, bv, bb01};
    times[static_cast<std::size_t>(l) + 1] = t_next;
    wvals[static_cast<std::size_t>(l) + 1] = w_next;
    values[static_cast<std::size_t>(l) + 1] = x_next;
    x = x_next;
  }

  TrajectoryOutput out;
  out.times = std::move(times);
  out.values = std::move(values);
  if (!cfg.continuous || wp) {
    out.evaluator = detail::linear_evaluator(out.times, out.values);
  } else {
    // exact continuous-time interpolant: within span l,
    //   X(t) = X_l + a_l (t - t_l) + b_l (W(t) - W_l) [+ bb01_l ((W(t)-W_l)^2 - (t-t_l))]
    auto wfn = std::function<double(double)>(wf);
    out.evaluator = [T, k, times = out.times, values = out.values,
                     wvals = std::move(wvals), span = std::move(span),
                     wfn = std::move(wfn)](double t) -> double {
      if (t <= 0.0) return values.front();
      if (t >= T) return values.back();
      const int l = std::min(static_cast<int>(t * k / T), k - 1);
      const std::size_t sl = static_cast<std::size_t>(l);
      if (t == times[sl + 1]) return values[sl + 1];
      const double dw = wfn(t) - wvals[sl];
      const double dt = t - times[sl];
      return values[sl] + span[sl].a * dt + span[sl].b * dw +
             span[sl].bb01 * (dw * dw - dt);
    };
  }
  return out;
}

// Convenience overload against the live oracle; the caller keeps `path`
// alive for as long as a continuous-time evaluator may be queried.
inline TrajectoryOutput run_scheme(const SdeSpec& spec, const SchemeConfig& cfg,
                                   PathState& path) {
  auto wf = [p = &path](double t) { return t == 0.0 ? 0.0 : p->evaluate(t); };
  return run_scheme(spec, cfg, wf, spec.x0);
}

inline TrajectoryOutput run_scheme(const SdeSpec& spec, const SchemeConfig& cfg,
                                   PathState& path, double x0) {
  auto wf = [p = &path](double t) { return t == 0.0 ? 0.0 : p->evaluate(t); };
  return run_scheme(spec, cfg, wf, x0);
}

}  // namespace sdelab
