#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sdelab/brownian_oracle.hpp"
#include "sdelab/schemes.hpp"
#include "sdelab/sde_model.hpp"

namespace sdelab {

// Everything in this lab works on the unit horizon T = 1 with the equidistant
// grid t_l = l/k (a general horizon rescales via t -> t/T, x -> x, W -> W_T).

namespace detail {
inline void require_unit_horizon(const SdeSpec& spec) {
  if (spec.horizon != 1.0)
    throw std::invalid_argument("proof_lab: unit horizon required (rescale the spec)");
}
}  // namespace detail

// Discrete weight data built on top of a truncated Wagner-Platen run:
//   m_l  = 1 + a^(0,1)(t_l, X_l) h + b^(0,1)(t_l, X_l) dW_l
//   M(t_l) = m_l ... m_{k-1}   (empty product = 1 at l = k)
//   Y(t_l) = M(t_{l+1}) * G(t_l, X_l)
// with X the Wagner-Platen iterates and G the commutator gap.
struct WeightPath {
  int k = 0;
  std::vector<double> times;    // size k+1
  std::vector<double> x;        // Wagner-Platen iterates, size k+1
  std::vector<double> m;        // multipliers m_l, size k
  std::vector<double> big_m;    // M(t_l), size k+1, big_m[k] = 1
  std::vector<double> y;        // Y(t_l), size k
};

inline WeightPath build_weight_path(const SdeSpec& spec, PathState& path, int k) {
  detail::require_unit_horizon(spec);
  if (k < 1) throw std::invalid_argument("build_weight_path: k >= 1");
  SchemeConfig cfg;
  cfg.id = SchemeId::wagner_platen_truncated;
  cfg.steps = k;
  TrajectoryOutput wpt = run_scheme(spec, cfg, path);

  WeightPath wp;
  wp.k = k;
  wp.times = wpt.times;
  wp.x = wpt.values;
  wp.m.resize(static_cast<std::size_t>(k));
  wp.big_m.assign(static_cast<std::size_t>(k) + 1, 1.0);
  wp.y.resize(static_cast<std::size_t>(k));
  const double h = 1.0 / k;
  const auto& c = spec.coeffs;
  for (int l = 0; l < k; ++l) {
    const double t = wp.times[static_cast<std::size_t>(l)];
    const double xv = wp.x[static_cast<std::size_t>(l)];
    const double w0 = l == 0 ? 0.0 : path.value_at(t);
    const double w1 = path.value_at(wp.times[static_cast<std::size_t>(l) + 1]);
    wp.m[static_cast<std::size_t>(l)] =
        1.0 + c.a(0, 1, t, xv) * h + c.b(0, 1, t, xv) * (w1 - w0);
  }
  for (int l = k - 1; l >= 0; --l)
    wp.big_m[static_cast<std::size_t>(l)] =
        wp.m[static_cast<std::size_t>(l)] * wp.big_m[static_cast<std::size_t>(l) + 1];
  for (int l = 0; l < k; ++l)
    wp.y[static_cast<std::size_t>(l)] =
        wp.big_m[static_cast<std::size_t>(l) + 1] *
        lie_gap(spec, wp.times[static_cast<std::size_t>(l)], wp.x[static_cast<std::size_t>(l)]);
  return wp;
}

// R_k = (1/k) sum |Y(t_l)|^(2/3)
inline double rhat(const WeightPath& wp) {
  double s = 0.0;
  for (double yv : wp.y) s += std::pow(std::abs(yv), 2.0 / 3.0);
  return s / wp.k;
}

// Lower bound for the conditional variance of the aux/scheme endpoint gap:
//   sum_l Y_l^2 * 1/(12 k^3) * 1/(d_l + 1)^2
// where d_l is the number of extra observation sites a method placed in
// span l (equidistant information: d_l = 0).
inline double conditional_variance_bound(const WeightPath& wp, const std::vector<int>& d) {
  if (d.size() != wp.y.size())
    throw std::invalid_argument("conditional_variance_bound: need one occupancy per span");
  const double k = static_cast<double>(wp.k);
  double s = 0.0;
  for (std::size_t l = 0; l < wp.y.size(); ++l) {
    if (d[l] < 0) throw std::invalid_argument("conditional_variance_bound: d_l >= 0");
    const double denom = static_cast<double>(d[l]) + 1.0;
    s += wp.y[l] * wp.y[l] / (denom * denom);
  }
  return s / (12.0 * k * k * k);
}

// Auxiliary scheme: X_aux = X_wpt + Q with
//   Q(0) = 0,
//   Q(t_{l+1}) = m_l Q(t_l) + G(t_l, X_l) * int_{t_l}^{t_{l+1}} (W - W(t_l)) dt.
// The realized span integrals come from the oracle (oracle-assisted, zero
// charge) and satisfy the endpoint decomposition
//   X_aux(1) = X_wpt(1) + sum_r Y(t_r) * J_r  exactly.
struct AuxState {
  WeightPath weights;
  std::vector<double> q;         // Q(t_l), size k+1
  std::vector<double> aux;       // X_aux(t_l), size k+1
  std::vector<double> span_int;  // J_l = int (W - W(t_l)) dt over span l, size k
};

inline AuxState build_aux_scheme(const SdeSpec& spec, PathState& path, int k) {
  AuxState st;
  st.weights = build_weight_path(spec, path, k);
  const WeightPath& wp = st.weights;
  st.q.assign(static_cast<std::size_t>(k) + 1, 0.0);
  st.aux.resize(static_cast<std::size_t>(k) + 1);
  st.span_int.resize(static_cast<std::size_t>(k));
  st.aux[0] = wp.x[0];
  const double h = 1.0 / k;
  for (int l = 0; l < k; ++l) {
    const double t0 = wp.times[static_cast<std::size_t>(l)];
    const double t1 = wp.times[static_cast<std::size_t>(l) + 1];
    const double w0 = l == 0 ? 0.0 : path.value_at(t0);
    const double w1 = path.value_at(t1);
    // int (W - W(t_l)) dt = int (W - chord) dt + h * (W(t1) - W(t0)) / 2
    const double j = path.window_time_integral(t0, t1) + h * (w1 - w0) * 0.5;
    st.span_int[static_cast<std::size_t>(l)] = j;
    st.q[static_cast<std::size_t>(l) + 1] =
        wp.m[static_cast<std::size_t>(l)] * st.q[static_cast<std::size_t>(l)] +
        lie_gap(spec, t0, wp.x[static_cast<std::size_t>(l)]) * j;
    st.aux[static_cast<std::size_t>(l) + 1] =
        wp.x[static_cast<std::size_t>(l) + 1] + st.q[static_cast<std::size_t>(l) + 1];
  }
  return st;
}

// Both sides of the endpoint decomposition, for identity testing.
struct AuxIdentity {
  double lhs = 0.0;  // X_aux(1) as produced by the recursion
  double rhs = 0.0;  // X_wpt(1) + sum_r Y(t_r) J_r
};

inline AuxIdentity aux_identity(const AuxState& st) {
  AuxIdentity id;
  id.lhs = st.aux.back();
  double s = 0.0;
  for (std::size_t r = 0; r < st.span_int.size(); ++r)
    s += st.weights.y[r] * st.span_int[r];
  id.rhs = st.weights.x.back() + s;
  return id;
}

// Continuous weight Y(t) = M(t) G(t, X(t)) with
//   M(t) = exp( int_t^1 (a^(0,1) - (1/2)(b^(0,1))^2)(u, X(u)) du
//             + int_t^1 b^(0,1)(u, X(u)) dW(u) ),
// both integrals by left-point quadrature on the fine grid u_j = j/fine_k and
// X replaced by the best available reference (the aux scheme at fine_k).
inline double weight_continuous(const SdeSpec& spec, PathState& path, double t, int fine_k) {
  detail::require_unit_horizon(spec);
  if (!(t >= 0.0 && t < 1.0)) throw std::invalid_argument("weight_continuous: t in [0,1)");
  const AuxState ref = build_aux_scheme(spec, path, fine_k);
  const int j0 = static_cast<int>(std::lround(t * fine_k));
  if (std::abs(j0 / static_cast<double>(fine_k) - t) > 1e-12)
    throw std::invalid_argument("weight_continuous: t must lie on the fine grid");
  const double h = 1.0 / fine_k;
  const auto& c = spec.coeffs;
  double expo = 0.0;
  for (int j = j0; j < fine_k; ++j) {
    const double u = ref.weights.times[static_cast<std::size_t>(j)];
    const double xv = ref.aux[static_cast<std::size_t>(j)];
    const double w0 = j == 0 ? 0.0 : path.value_at(u);
    const double w1 = path.value_at(ref.weights.times[static_cast<std::size_t>(j) + 1]);
    const double b01 = c.b(0, 1, u, xv);
    expo += (c.a(0, 1, u, xv) - 0.5 * b01 * b01) * h + b01 * (w1 - w0);
  }
  return std::exp(expo) * lie_gap(spec, t, ref.aux[static_cast<std::size_t>(j0)]);
}

// Milstein-based auxiliary process: within span l,
//   U(t) = X_m(t) - (1/2)(b b^(0,1))(t_l, X_m(t_l)) ((W(t)-W(t_l))^2 - (t-t_l)),
// i.e. the continuous Milstein interpolant with its correction stripped.  At
// grid nodes this equals the Euler-style update from the Milstein iterate.
inline TrajectoryOutput milstein_aux(const SdeSpec& spec, PathState& path, int k) {
  SchemeConfig cfg;
  cfg.id = SchemeId::milstein;
  cfg.steps = k;
  TrajectoryOutput mil = run_scheme(spec, cfg, path);
  const double T = spec.horizon;
  const double h = T / k;
  const auto& c = spec.coeffs;

  TrajectoryOutput out;
  out.times = mil.times;
  out.values.resize(mil.values.size());
  out.values[0] = mil.values[0];
  std::vector<double> a_l(static_cast<std::size_t>(k)), b_l(static_cast<std::size_t>(k));
  for (int l = 0; l < k; ++l) {
    const double t = mil.times[static_cast<std::size_t>(l)];
    const double x = mil.values[static_cast<std::size_t>(l)];
    const double w0 = l == 0 ? 0.0 : path.value_at(t);
    const double w1 = path.value_at(mil.times[static_cast<std::size_t>(l) + 1]);
    a_l[static_cast<std::size_t>(l)] = c.a(0, 0, t, x);
    b_l[static_cast<std::size_t>(l)] = c.b(0, 0, t, x);
    out.values[static_cast<std::size_t>(l) + 1] =
        x + a_l[static_cast<std::size_t>(l)] * h + b_l[static_cast<std::size_t>(l)] * (w1 - w0);
  }
  out.evaluator = [T, k, times = out.times, base = mil.values, a_l = std::move(a_l),
                   b_l = std::move(b_l), vals = out.values, p = &path](double t) -> double {
    if (t <= 0.0) return vals.front();
    if (t >= T) return vals.back();
    const int l = std::min(static_cast<int>(t * k / T), k - 1);
    const std::size_t sl = static_cast<std::size_t>(l);
    if (t == times[sl]) return vals[sl];
    if (t == times[sl + 1]) return vals[sl + 1];
    const double w0 = l == 0 ? 0.0 : p->value_at(times[sl]);
    return base[sl] + a_l[sl] * (t - times[sl]) + b_l[sl] * (p->evaluate_free(t) - w0);
  };
  return out;
}

}  // namespace sdelab
