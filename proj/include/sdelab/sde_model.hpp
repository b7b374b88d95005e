#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdelab {

// Thrown when a derivative order beyond the declared maximum is requested.
class capability_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when an iteration leaves the representable/finite range.
class divergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x > lo && x < hi; }
  bool contains_closed(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

// Smoothness region: a time interval times a union of open space intervals
// (a union so that e.g. a sign-discontinuous drift can declare R \ {0}).
struct SmoothDomain {
  Interval time{0.0, std::numeric_limits<double>::infinity()};
  std::vector<Interval> space{Interval{}};

  bool contains_space(double x) const {
    for (const auto& iv : space)
      if (iv.contains(x)) return true;
    return false;
  }
  // whole closed interval inside one smooth piece
  bool covers(const Interval& iv) const {
    for (const auto& piece : space)
      if (iv.lo >= piece.lo && iv.hi <= piece.hi) return true;
    return false;
  }
};

// Drift/diffusion pair with mixed partial derivatives d^{i+j} f / dt^i dx^j,
// exposed through eval(which, i, j, t, x).
class CoefficientField {
 public:
  using Fn = std::function<double(int i, int j, double t, double x)>;

  CoefficientField() = default;
  CoefficientField(Fn drift, Fn diffusion, std::pair<int, int> max_order,
                   SmoothDomain domain, bool autonomous)
      : drift_(std::move(drift)),
        diffusion_(std::move(diffusion)),
        max_order_(max_order),
        domain_(std::move(domain)),
        autonomous_(autonomous) {}

  enum Which { kDrift = 0, kDiffusion = 1 };

  double eval(Which which, int i, int j, double t, double x) const {
    if (i < 0 || j < 0) throw std::invalid_argument("derivative order must be nonnegative");
    if (i > max_order_.first || j > max_order_.second)
      throw capability_error("derivative order (" + std::to_string(i) + "," +
                             std::to_string(j) + ") beyond declared maximum");
    if (autonomous_ && i > 0) return 0.0;
    return which == kDrift ? drift_(i, j, t, x) : diffusion_(i, j, t, x);
  }

  double a(int i, int j, double t, double x) const { return eval(kDrift, i, j, t, x); }
  double b(int i, int j, double t, double x) const { return eval(kDiffusion, i, j, t, x); }

  std::pair<int, int> max_order() const { return max_order_; }
  const SmoothDomain& domain() const { return domain_; }
  bool autonomous() const { return autonomous_; }

 private:
  Fn drift_, diffusion_;
  std::pair<int, int> max_order_{0, 0};
  SmoothDomain domain_;
  bool autonomous_ = true;
};

// Exact strong solution as a function of (x0, t, W(t)), when available.
using ExactSolution = std::function<double(double x0, double t, double w_t)>;

struct SdeSpec {
  std::string name;
  CoefficientField coeffs;
  double horizon = 1.0;
  double x0 = 1.0;
  std::optional<ExactSolution> exact;

  double a(int i, int j, double t, double x) const { return coeffs.a(i, j, t, x); }
  double b(int i, int j, double t, double x) const { return coeffs.b(i, j, t, x); }
};

// ---------------------------------------------------------------------------
// Commutator-style gap between drift and diffusion flows:
//   G = a^(0,1) b - b^(1,0) - a b^(0,1) - (1/2) b^2 b^(0,2)
// Wherever G is nonzero no method can beat the 1/n pointwise rate, so this is
// the quantity the classification and the weight diagnostics are built on.
// ---------------------------------------------------------------------------
inline double lie_gap(const SdeSpec& spec, double t, double x) {
  const auto& c = spec.coeffs;
  const double a = c.a(0, 0, t, x);
  const double a01 = c.a(0, 1, t, x);
  const double b = c.b(0, 0, t, x);
  const double b10 = c.b(1, 0, t, x);
  const double b01 = c.b(0, 1, t, x);
  const double b02 = c.b(0, 2, t, x);
  return a01 * b - b10 - a * b01 - 0.5 * b * b * b02;
}

// ---------------------------------------------------------------------------
// Assumption checking for the three lower-bound regimes.
// ---------------------------------------------------------------------------
enum class TheoremId { pointwise, sup, lp };

inline const char* to_string(TheoremId id) {
  switch (id) {
    case TheoremId::pointwise: return "pointwise";
    case TheoremId::sup: return "sup";
    case TheoremId::lp: return "Lp";
  }
  return "?";
}

enum class Verdict { satisfied, violated, undeclared };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::violated: return "violated";
    case Verdict::undeclared: return "undeclared";
  }
  return "?";
}

struct ConditionReport {
  TheoremId theorem = TheoremId::pointwise;
  Verdict verdict = Verdict::undeclared;
  Interval interval;
  double t0 = 0.0;
  int grid_size = 1024;
  double min_abs_diffusion = 0.0;   // min |b| over the probed grid
  double min_abs_gap = 0.0;         // min |G(t0,.)| over the probed grid (pointwise only)
  bool smoothness_declared = false;
  std::string detail;
};

// Grid check of the hypotheses behind the selected lower bound on
// [t0,T] x I.  `grid_size` points are probed in each direction.
inline ConditionReport check_conditions(const SdeSpec& spec, TheoremId theorem,
                                        const Interval& interval, double t0 = 0.0,
                                        int grid_size = 1024) {
  if (!(interval.lo < interval.hi)) throw std::invalid_argument("empty interval");
  if (!(t0 >= 0.0 && t0 < spec.horizon)) throw std::invalid_argument("t0 outside [0,T)");
  if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");

  constexpr double kZeroTol = 1e-12;

  ConditionReport rep;
  rep.theorem = theorem;
  rep.interval = interval;
  rep.t0 = t0;
  rep.grid_size = grid_size;

  // smoothness requirement per regime: (time, space) derivative orders
  std::pair<int, int> need{2, 3};
  if (theorem == TheoremId::sup) need = {1, 1};
  if (theorem == TheoremId::lp) need = {1, 2};

  const auto& c = spec.coeffs;
  rep.smoothness_declared = c.max_order().first >= need.first &&
                            c.max_order().second >= need.second &&
                            c.domain().covers(interval) &&
                            c.domain().time.contains_closed(t0) &&
                            c.domain().time.contains_closed(spec.horizon);
  if (!rep.smoothness_declared) {
    rep.verdict = Verdict::undeclared;
    rep.detail = "declared smoothness does not cover the requested region";
    return rep;
  }

  const int nt = c.autonomous() ? 1 : grid_size;
  double min_b = std::numeric_limits<double>::infinity();
  for (int it = 0; it < nt; ++it) {
    const double t = nt == 1 ? t0 : t0 + (spec.horizon - t0) * it / (nt - 1);
    for (int ix = 0; ix < grid_size; ++ix) {
      const double x = interval.lo +
                       interval.width() * (ix + 1) / (grid_size + 1);
      min_b = std::min(min_b, std::abs(c.b(0, 0, t, x)));
    }
  }
  rep.min_abs_diffusion = min_b;
  if (min_b <= kZeroTol) {
    rep.verdict = Verdict::violated;
    rep.detail = "diffusion vanishes on the probed grid";
    return rep;
  }

  if (theorem == TheoremId::pointwise) {
    double min_g = std::numeric_limits<double>::infinity();
    for (int ix = 0; ix < grid_size; ++ix) {
      const double x = interval.lo + interval.width() * (ix + 1) / (grid_size + 1);
      min_g = std::min(min_g, std::abs(lie_gap(spec, t0, x)));
    }
    rep.min_abs_gap = min_g;
    if (min_g <= kZeroTol) {
      rep.verdict = Verdict::violated;
      rep.detail = "commutator gap vanishes on the probed grid";
      return rep;
    }
  }

  rep.verdict = Verdict::satisfied;
  rep.detail = "all probed hypotheses hold";
  return rep;
}

// ---------------------------------------------------------------------------
// Localization: smooth cutoffs eta1 (=1 on I2, =0 off I1) and eta2 (=0 on I3,
// =1 off I2) built from the exp(-1/t) mollifier.  The localized equation
//   a~ = eta1 * a,   b~ = eta1 * b + eta2
// matches the original on I3 and is globally bounded with diffusion bounded
// away from zero.
// ---------------------------------------------------------------------------
namespace detail {

// C^infty step: 0 for u<=0, 1 for u>=1.  Returns value and first two
// derivatives.
struct SmoothStep {
  double s = 0.0, s1 = 0.0, s2 = 0.0;
};

inline SmoothStep smooth_step(double u) {
  SmoothStep out;
  if (u <= 0.0) return out;
  if (u >= 1.0) {
    out.s = 1.0;
    return out;
  }
  // f(t) = exp(-1/t), S = f(u) / (f(u) + f(1-u))
  const auto f = [](double t) { return std::exp(-1.0 / t); };
  const auto f1 = [&](double t) { return f(t) / (t * t); };
  const auto f2 = [&](double t) { return f(t) * (1.0 / (t * t * t * t) - 2.0 / (t * t * t)); };
  const double g = f(u), g1 = f1(u), g2 = f2(u);
  const double h = f(1.0 - u), h1 = -f1(1.0 - u), h2 = f2(1.0 - u);
  const double d = g + h, d1 = g1 + h1, d2 = g2 + h2;
  out.s = g / d;
  out.s1 = (g1 * d - g * d1) / (d * d);
  out.s2 = (g2 * d - g * d2) / (d * d) - 2.0 * d1 * out.s1 / d;
  return out;
}

// Plateau function: 0 below lo_out, rises on [lo_out, lo_in], 1 on
// [lo_in, hi_in], falls on [hi_in, hi_out], 0 above.  Value + 2 derivatives.
struct Bump {
  double lo_out, lo_in, hi_in, hi_out;

  SmoothStep operator()(double x) const {
    if (x >= lo_in && x <= hi_in) {
      SmoothStep s;
      s.s = 1.0;
      return s;
    }
    if (x <= lo_out || x >= hi_out) return SmoothStep{};
    if (x < lo_in) {
      const double w = lo_in - lo_out;
      SmoothStep s = smooth_step((x - lo_out) / w);
      s.s1 /= w;
      s.s2 /= w * w;
      return s;
    }
    const double w = hi_out - hi_in;
    SmoothStep s = smooth_step((hi_out - x) / w);
    s.s1 /= -w;
    s.s2 /= w * w;
    return s;
  }
};

}  // namespace detail

// Localized copy of `spec` for nested open intervals I3 c I2 c I1.
// Inside I3 the coefficient evaluation routes through the original field so
// the agreement there is exact (same arithmetic), not just approximate.
inline SdeSpec localize(const SdeSpec& spec, const Interval& i1, const Interval& i2,
                        const Interval& i3, int probe_grid = 1024) {
  if (!(i1.lo < i2.lo && i2.lo < i3.lo && i3.lo < i3.hi && i3.hi < i2.hi && i2.hi < i1.hi))
    throw std::invalid_argument("localize: intervals must be strictly nested I3 c I2 c I1");
  if (!spec.coeffs.domain().covers(i1))
    throw std::invalid_argument("localize: closure of I1 must lie in the smooth domain");

  // |b| must be bounded away from zero (sign-definite) on I1
  {
    double sign = 0.0;
    for (int i = 0; i <= probe_grid; ++i) {
      const double x = i1.lo + i1.width() * i / probe_grid;
      const double bv = spec.b(0, 0, 0.0, x);
      if (std::abs(bv) <= 1e-12 || (sign != 0.0 && bv * sign < 0.0))
        throw std::invalid_argument("localize: diffusion must be sign-definite on I1");
      sign = bv > 0 ? 1.0 : -1.0;
    }
  }

  const detail::Bump eta1{i1.lo, i2.lo, i2.hi, i1.hi};
  const detail::Bump eta2_inner{i2.lo, i3.lo, i3.hi, i2.hi};  // eta2 = 1 - this

  CoefficientField base = spec.coeffs;
  const Interval inner = i3;

  auto drift = [base, eta1, inner](int i, int j, double t, double x) -> double {
    if (inner.contains(x)) return base.a(i, j, t, x);
    const auto e = eta1(x);
    if (e.s == 0.0 && e.s1 == 0.0 && e.s2 == 0.0) return 0.0;
    // (eta1 * a)^(i,j) by the product rule in x
    double out = e.s * base.a(i, j, t, x);
    if (j >= 1) out += j * e.s1 * base.a(i, j - 1, t, x);
    if (j >= 2) out += (j * (j - 1) / 2) * e.s2 * base.a(i, j - 2, t, x);
    return out;
  };
  auto diffusion = [base, eta1, eta2_inner, inner](int i, int j, double t, double x) -> double {
    if (inner.contains(x)) return base.b(i, j, t, x);
    const auto e1 = eta1(x);
    double out = 0.0;
    if (!(e1.s == 0.0 && e1.s1 == 0.0 && e1.s2 == 0.0)) {
      out = e1.s * base.b(i, j, t, x);
      if (j >= 1) out += j * e1.s1 * base.b(i, j - 1, t, x);
      if (j >= 2) out += (j * (j - 1) / 2) * e1.s2 * base.b(i, j - 2, t, x);
    }
    if (i == 0) {
      const auto e2 = eta2_inner(x);  // eta2 = 1 - e2
      if (j == 0) out += 1.0 - e2.s;
      if (j == 1) out += -e2.s1;
      if (j == 2) out += -e2.s2;
    }
    return out;
  };

  SdeSpec out;
  out.name = spec.name + "_localized";
  const int max_i = spec.coeffs.max_order().first;
  SmoothDomain dom;
  dom.time = spec.coeffs.domain().time;
  dom.space = {Interval{}};  // globally smooth now
  out.coeffs = CoefficientField(std::move(drift), std::move(diffusion),
                                {max_i, std::min(spec.coeffs.max_order().second, 2)},
                                dom, spec.coeffs.autonomous());
  out.horizon = spec.horizon;
  out.x0 = spec.x0;
  return out;
}

// ---------------------------------------------------------------------------
// Equation catalog.
// ---------------------------------------------------------------------------
namespace detail {
inline double clamp_abs(double x) { return std::max(std::abs(x), 1e-10); }
}  // namespace detail

// dX = (delta - beta X) dt + sigma sqrt(|X|) dW.  The classification
// identities below are stated for the sigma = 2 normalization.
inline SdeSpec make_cir(double delta, double beta, double sigma = 2.0, double x0 = 1.0) {
  if (delta <= 0.0 || sigma <= 0.0) throw std::invalid_argument("cir: need delta > 0, sigma > 0");
  auto drift = [delta, beta](int /*i*/, int j, double, double x) -> double {
    switch (j) {
      case 0: return delta - beta * x;
      case 1: return -beta;
      default: return 0.0;
    }
  };
  auto diffusion = [sigma](int /*i*/, int j, double, double x) -> double {
    const double ax = std::abs(x);
    const double sgn = x < 0.0 ? -1.0 : 1.0;
    switch (j) {
      case 0: return sigma * std::sqrt(ax);
      case 1: return sgn * sigma / (2.0 * std::sqrt(detail::clamp_abs(x)));
      case 2: return -sigma / (4.0 * std::pow(detail::clamp_abs(x), 1.5));
      case 3: return sgn * 3.0 * sigma / (8.0 * std::pow(detail::clamp_abs(x), 2.5));
      default: return 0.0;
    }
  };
  SdeSpec s;
  s.name = "cir";
  SmoothDomain dom;
  dom.space = {Interval{0.0, std::numeric_limits<double>::infinity()}};
  s.coeffs = CoefficientField(std::move(drift), std::move(diffusion), {2, 3}, dom, true);
  s.x0 = x0;
  return s;
}

inline SdeSpec make_squared_bessel(double x0 = 1.0) { return make_cir(1.0, 0.0, 2.0, x0); }

// dX = -X^5 dt + X dW
inline SdeSpec make_quintic(double x0 = 1.0) {
  auto drift = [](int, int j, double, double x) -> double {
    switch (j) {
      case 0: return -x * x * x * x * x;
      case 1: return -5.0 * x * x * x * x;
      case 2: return -20.0 * x * x * x;
      case 3: return -60.0 * x * x;
      default: return 0.0;
    }
  };
  auto diffusion = [](int, int j, double, double x) -> double {
    switch (j) {
      case 0: return x;
      case 1: return 1.0;
      default: return 0.0;
    }
  };
  SdeSpec s;
  s.name = "quintic";
  s.coeffs = CoefficientField(std::move(drift), std::move(diffusion), {2, 3}, SmoothDomain{}, true);
  s.x0 = x0;
  return s;
}

// dX = alpha X dt + beta X dW, exactly solvable
inline SdeSpec make_gbm(double alpha, double beta, double x0 = 1.0) {
  auto drift = [alpha](int, int j, double, double x) -> double {
    switch (j) {
      case 0: return alpha * x;
      case 1: return alpha;
      default: return 0.0;
    }
  };
  auto diffusion = [beta](int, int j, double, double x) -> double {
    switch (j) {
      case 0: return beta * x;
      case 1: return beta;
      default: return 0.0;
    }
  };
  SdeSpec s;
  s.name = "gbm";
  s.coeffs = CoefficientField(std::move(drift), std::move(diffusion), {2, 3}, SmoothDomain{}, true);
  s.x0 = x0;
  s.exact = [alpha, beta](double x0v, double t, double w) {
    return x0v * std::exp((alpha - 0.5 * beta * beta) * t + beta * w);
  };
  return s;
}

// dX = sgn(X)(1 + X) dt + dW  (smooth off {0})
inline SdeSpec make_sgn_drift(double x0 = 1.0) {
  auto drift = [](int, int j, double, double x) -> double {
    const double sgn = x < 0.0 ? -1.0 : 1.0;
    switch (j) {
      case 0: return sgn * (1.0 + x);
      case 1: return sgn;
      default: return 0.0;
    }
  };
  auto diffusion = [](int, int j, double, double) -> double { return j == 0 ? 1.0 : 0.0; };
  SdeSpec s;
  s.name = "sgn_drift";
  SmoothDomain dom;
  dom.space = {Interval{-std::numeric_limits<double>::infinity(), 0.0},
               Interval{0.0, std::numeric_limits<double>::infinity()}};
  s.coeffs = CoefficientField(std::move(drift), std::move(diffusion), {2, 3}, dom, true);
  s.x0 = x0;
  return s;
}

// dX = sgn(X) dt + dW: same roughness but zero commutator gap
inline SdeSpec make_sgn_drift_plain(double x0 = 1.0) {
  auto drift = [](int, int j, double, double x) -> double {
    return j == 0 ? (x < 0.0 ? -1.0 : 1.0) : 0.0;
  };
  auto diffusion = [](int, int j, double, double) -> double { return j == 0 ? 1.0 : 0.0; };
  SdeSpec s;
  s.name = "sgn_drift_plain";
  SmoothDomain dom;
  dom.space = {Interval{-std::numeric_limits<double>::infinity(), 0.0},
               Interval{0.0, std::numeric_limits<double>::infinity()}};
  s.coeffs = CoefficientField(std::move(drift), std::move(diffusion), {2, 3}, dom, true);
  s.x0 = x0;
  return s;
}

}  // namespace sdelab
