#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sdelab/rng.hpp"

namespace sdelab {

// Diagnostic record of the last conditional draw the oracle made.
struct BridgeDraw {
  double t = 0.0;
  double mean = 0.0;      // conditional mean actually used
  double variance = 0.0;  // conditional variance actually used
  double value = 0.0;
  bool was_extension = false;  // past the last knot vs. interior bridge
};

// One Brownian path, revealed lazily.  evaluate(t) is the only chargeable
// observation (cost counter nu); span time-integrals are auxiliary data and
// cost nothing.  All randomness comes from a counter-based stream keyed by
// (seed, replication), so an identical query sequence reproduces the path
// bit for bit.
class PathState {
 public:
  PathState(std::uint64_t seed, std::uint64_t replication)
      : rng_(seed, replication) {
    times_.push_back(0.0);
    values_.push_back(0.0);
  }

  // W(t); increments the cost counter even on repeated queries.
  double evaluate(double t) {
    ++nu_;
    return evaluate_free(t);
  }

  // Same sampling logic without touching nu (internal/diagnostic use).
  double evaluate_free(double t) {
    if (!(t >= 0.0) || !std::isfinite(t))
      throw std::invalid_argument("evaluate: time must be finite and >= 0");
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - times_.begin());
    if (it != times_.end() && *it == t) return values_[idx];

    double value;
    if (it == times_.end()) {  // extension past the frontier
      const double s = times_.back(), ws = values_.back();
      last_draw_ = {t, ws, t - s, 0.0, true};
      value = ws + std::sqrt(t - s) * rng_.gaussian();
    } else {  // interior: Brownian bridge between the bracketing knots
      const double s1 = times_[idx - 1], s2 = times_[idx];
      const double w1 = values_[idx - 1], w2 = values_[idx];
      const double mean = w1 + (w2 - w1) * (t - s1) / (s2 - s1);
      const double var = (t - s1) * (s2 - t) / (s2 - s1);
      last_draw_ = {t, mean, var, 0.0, false};
      value = mean + std::sqrt(var) * rng_.gaussian();
      // A cached integral over the split span is no longer attached to an
      // adjacent-knot span; drop it and let the sub-spans be redrawn on
      // demand (their conditional law given the knots is unchanged).
      integrals_.erase({s1, s2});
    }
    last_draw_.value = value;
    times_.insert(times_.begin() + static_cast<std::ptrdiff_t>(idx), t);
    values_.insert(values_.begin() + static_cast<std::ptrdiff_t>(idx), value);
    return value;
  }

  // I(s1,s2) = int_{s1}^{s2} (W(t) - chord(t)) dt over an adjacent-knot span.
  // Distributed N(0, h^3/12) independently of the knot values; cached, and
  // never charged to nu.
  double span_time_integral(double s1, double s2) {
    const std::size_t i1 = knot_index(s1), i2 = knot_index(s2);
    if (i2 != i1 + 1)
      throw std::invalid_argument("span_time_integral: knots must be adjacent");
    const auto key = std::make_pair(s1, s2);
    const auto it = integrals_.find(key);
    if (it != integrals_.end()) return it->second;
    const double h = s2 - s1;
    const double value = std::sqrt(h * h * h / 12.0) * rng_.gaussian();
    integrals_.emplace(key, value);
    return value;
  }

  // int_{s}^{e} (W - chord_{s,e}) dt where s,e are knots, possibly with other
  // knots in between: composed from the sub-span integrals plus the exact
  // piecewise-linear chord correction.
  double window_time_integral(double s, double e) {
    const std::size_t is = knot_index(s), ie = knot_index(e);
    if (ie <= is) throw std::invalid_argument("window_time_integral: need s < e knots");
    const double ws = values_[is], we = values_[ie];
    const auto chord = [&](double t) { return ws + (we - ws) * (t - s) / (e - s); };
    double total = 0.0;
    for (std::size_t i = is; i < ie; ++i) {
      const double t1 = times_[i], t2 = times_[i + 1];
      total += span_time_integral(t1, t2);
      // trapezoid of (local chord - global chord) over [t1,t2]
      total += (t2 - t1) * 0.5 *
               ((values_[i] - chord(t1)) + (values_[i + 1] - chord(t2)));
    }
    return total;
  }

  std::uint64_t cost() const { return nu_; }
  const std::vector<double>& knot_times() const { return times_; }
  const std::vector<double>& knot_values() const { return values_; }
  const BridgeDraw& last_draw() const { return last_draw_; }

  bool has_knot(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    return it != times_.end() && *it == t;
  }

  // Stored value at an existing knot; free of charge, throws if absent.
  double value_at(double t) const {
    return values_[knot_index(t)];
  }

  // Little-endian (time, value) f64 pairs, knots in increasing time order.
  void dump_binary(std::ostream& os) const {
    for (std::size_t i = 0; i < times_.size(); ++i) {
      write_le(os, times_[i]);
      write_le(os, values_[i]);
    }
  }

 private:
  std::size_t knot_index(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end() || *it != t)
      throw std::invalid_argument("time is not a stored knot");
    return static_cast<std::size_t>(it - times_.begin());
  }

  static void write_le(std::ostream& os, double x) {
    unsigned char buf[8];
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(x));
    __builtin_memcpy(&bits, &x, 8);
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
  }

  std::vector<double> times_, values_;
  std::map<std::pair<double, double>, double> integrals_;
  RngStream rng_;
  std::uint64_t nu_ = 0;
  BridgeDraw last_draw_;
};

// Frozen lookup table of (time, value) pairs, e.g. a method transcript.
// Used when an output rule reprocesses already-observed data: queries are
// exact knot lookups and nothing is charged anywhere.
class RecordedPath {
 public:
  RecordedPath() = default;
  RecordedPath(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size())
      throw std::invalid_argument("RecordedPath: size mismatch");
  }

  double operator()(double t) const {
    if (t == 0.0) return 0.0;
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end() || *it != t)
      throw std::invalid_argument("RecordedPath: time was never observed");
    return values_[static_cast<std::size_t>(it - times_.begin())];
  }

 private:
  std::vector<double> times_, values_;
};

}  // namespace sdelab
