#pragma once

// Current-density relation in the thermodynamic limit and boundary-driven
// phases from the extremal-current principle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "kls/error.hpp"
#include "kls/ising.hpp"
#include "kls/model.hpp"

namespace kls {

struct CurveSample {
  double x = 0.0;
  double rho = 0.0;
  double j = 0.0;
};

/// j(rho) sampled parametrically in the fugacity; exact values between
/// samples come from inverting rho(x) against the closed form.
class CurrentDensityCurve {
 public:
  CurrentDensityCurve(const BulkKinetics& kin, std::vector<CurveSample> samples)
      : kin_(kin), y_(kin.interaction_y()), samples_(std::move(samples)) {
    if (samples_.size() < 2) throw ValidationError("curve needs at least two samples");
    for (std::size_t i = 1; i < samples_.size(); ++i) {
      if (!(samples_[i].rho > samples_[i - 1].rho)) {
        throw InvariantViolation("rho(x) not strictly increasing between x = " +
                                 std::to_string(samples_[i - 1].x) + " and x = " + std::to_string(samples_[i].x));
      }
    }
    detect_plateaus();
  }

  const BulkKinetics& kinetics() const { return kin_; }
  const std::vector<CurveSample>& samples() const { return samples_; }
  double y() const { return y_; }

  double rho_at_x(double x) const { return spectrum({x, y_}).rho(); }
  double current_at_x(double x) const { return current_limit(kin_, spectrum({x, y_})); }

  /// The fugacity parameter x with rho(x) = rho, rho in (0,1).
  double x_at(double rho) const {
    if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("density must lie in (0,1)");
    double lo = std::log(samples_.front().x), hi = std::log(samples_.back().x);
    // extend beyond the sampled range if needed
    while (rho_at_x(std::exp(lo)) > rho) lo -= 4.0;
    while (rho_at_x(std::exp(hi)) < rho) hi += 4.0;
    auto it = std::lower_bound(samples_.begin(), samples_.end(), rho,
                               [](const CurveSample& s, double r) { return s.rho < r; });
    if (it != samples_.end() && it->rho == rho) return it->x;
    if (it != samples_.end() && it != samples_.begin()) {
      lo = std::log(std::prev(it)->x);
      hi = std::log(it->x);
    }
    auto f = [&](double u) { return rho_at_x(std::exp(u)) - rho; };
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return std::exp(lo);
    if (fhi == 0.0) return std::exp(hi);
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                    boost::math::tools::eps_tolerance<double>(52), iters);
    return std::exp(0.5 * (a + b));
  }

  double current_at(double rho) const { return current_at_x(x_at(rho)); }

  /// Density intervals on which j is constant within tolerance.
  const std::vector<std::pair<double, double>>& plateaus() const { return plateaus_; }
  bool degenerate() const { return !plateaus_.empty(); }

  double max_abs_current() const {
    double m = 0.0;
    for (const auto& s : samples_) m = std::max(m, std::abs(s.j));
    return m;
  }

 private:
  void detect_plateaus() {
    const double tol = 1e-12 * std::max(1.0, max_abs_current());
    std::size_t i = 0;
    while (i < samples_.size()) {
      std::size_t k = i;
      while (k + 1 < samples_.size() && std::abs(samples_[k + 1].j - samples_[i].j) <= tol) ++k;
      if (k >= i + 2 && samples_[k].rho - samples_[i].rho >= 1e-3) plateaus_.emplace_back(samples_[i].rho, samples_[k].rho);
      i = k + 1;
    }
  }

  BulkKinetics kin_;
  double y_;
  std::vector<CurveSample> samples_;
  std::vector<std::pair<double, double>> plateaus_;
};

/// Samples n_points values of x log-uniformly over [x_min, x_max].
inline CurrentDensityCurve build_curve(const BulkKinetics& kin, int n_points, double x_min = 1e-4,
                                       double x_max = 1e4) {
  kin.validate();
  if (n_points < 100) throw ValidationError("curve needs n_points >= 100");
  if (!(x_min > 0.0 && x_max > x_min)) throw ValidationError("need 0 < x_min < x_max");
  std::vector<CurveSample> samples(static_cast<std::size_t>(n_points));
  const double lmin = std::log(x_min), lmax = std::log(x_max);
  const MeasureParams base = MeasureParams::from_epsilon(1.0, kin.epsilon);
  for (int i = 0; i < n_points; ++i) {
    const double x = std::exp(lmin + (lmax - lmin) * i / (n_points - 1));
    const auto s = spectrum({x, base.y});
    samples[i] = {x, s.rho(), current_limit(kin, s)};
  }
  return {kin, std::move(samples)};
}

struct ZeroCrossings {
  std::vector<double> rho;
  /// More than one crossing.
  bool non_generic = false;
};

/// Interior densities where j changes sign.
inline ZeroCrossings zero_crossing(const CurrentDensityCurve& curve) {
  ZeroCrossings out;
  const auto& s = curve.samples();
  auto f = [&](double u) { return curve.current_at_x(std::exp(u)); };
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double a = s[i].j, b = s[i + 1].j;
    if (a == 0.0 && i > 0 && i + 1 < s.size() && (s[i - 1].j < 0.0) != (b < 0.0) && s[i - 1].j != 0.0 && b != 0.0) {
      out.rho.push_back(s[i].rho);
      continue;
    }
    if (a == 0.0 || b == 0.0 || (a < 0.0) == (b < 0.0)) continue;
    std::uintmax_t iters = 200;
    auto [lo, hi] = boost::math::tools::toms748_solve(f, std::log(s[i].x), std::log(s[i + 1].x), a, b,
                                                      boost::math::tools::eps_tolerance<double>(52), iters);
    out.rho.push_back(curve.rho_at_x(std::exp(0.5 * (lo + hi))));
  }
  out.non_generic = out.rho.size() > 1;
  return out;
}

enum class ExtremumKind { Max, Min };

inline std::string to_string(ExtremumKind k) { return k == ExtremumKind::Max ? "max" : "min"; }

struct Extremum {
  double rho = 0.0;
  double j = 0.0;
  ExtremumKind kind = ExtremumKind::Max;
};

/// Interior local extrema of j(rho), ordered by density. Each is bracketed
/// on the samples and refined as a root of dj/d(ln x). Throws
/// DegenerateError when the curve has a plateau.
inline std::vector<Extremum> extrema(const CurrentDensityCurve& curve) {
  if (curve.degenerate()) {
    const auto& p = curve.plateaus().front();
    throw DegenerateError("j(rho) is constant on [" + std::to_string(p.first) + ", " + std::to_string(p.second) +
                          "]");
  }
  const auto& s = curve.samples();
  auto slope = [&](double u) {
    const double h = 1e-5;
    return (curve.current_at_x(std::exp(u + h)) - curve.current_at_x(std::exp(u - h))) / (2.0 * h);
  };
  std::vector<Extremum> out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double d0 = s[i].j - s[i - 1].j, d1 = s[i + 1].j - s[i].j;
    const bool is_max = d0 > 0.0 && d1 <= 0.0;
    const bool is_min = d0 < 0.0 && d1 >= 0.0;
    if (!is_max && !is_min) continue;
    double lo = std::log(s[i - 1].x), hi = std::log(s[i + 1].x);
    double glo = slope(lo), ghi = slope(hi);
    double u;
    if ((glo > 0.0) != (ghi > 0.0) && glo != 0.0 && ghi != 0.0) {
      std::uintmax_t iters = 200;
      auto [a, b] = boost::math::tools::toms748_solve(slope, lo, hi, glo, ghi,
                                                      boost::math::tools::eps_tolerance<double>(50), iters);
      u = 0.5 * (a + b);
    } else {
      u = std::log(s[i].x);
    }
    const double x = std::exp(u);
    out.push_back({curve.rho_at_x(x), curve.current_at_x(x), is_max ? ExtremumKind::Max : ExtremumKind::Min});
  }
  return out;
}

enum class Phase { LowDensity, HighDensity, MaximalCurrent, MinimalCurrent, Coexistence };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::LowDensity: return "LD";
    case Phase::HighDensity: return "HD";
    case Phase::MaximalCurrent: return "MC";
    case Phase::MinimalCurrent: return "MinC";
    case Phase::Coexistence: return "COEX";
  }
  return "?";
}

struct PhaseLabel {
  Phase phase = Phase::LowDensity;
  double bulk_density = 0.0;
  double bulk_current = 0.0;
  /// An endpoint and an interior extremum gave the same current within 1e-10.
  bool tie = false;
};

inline constexpr double kPhaseTieTolerance = 1e-10;

/// Extremal-current principle: the bulk current is the minimum of j over
/// [rho_-, rho_+] when rho_- < rho_+ and the maximum over [rho_+, rho_-]
/// otherwise. Pass the curve's extrema to avoid recomputing them.
inline PhaseLabel classify(double rho_minus, double rho_plus, const CurrentDensityCurve& curve,
                           const std::vector<Extremum>& ext) {
  if (!(rho_minus > 0.0 && rho_minus < 1.0 && rho_plus > 0.0 && rho_plus < 1.0))
    throw ValidationError("boundary densities must lie in (0,1)");
  const double lo = std::min(rho_minus, rho_plus), hi = std::max(rho_minus, rho_plus);
  for (const auto& p : curve.plateaus()) {
    if (p.second >= lo && p.first <= hi) {
      throw DegenerateError("j(rho) is constant on [" + std::to_string(p.first) + ", " + std::to_string(p.second) +
                            "]; bulk density not unique");
    }
  }
  const bool minimize = rho_minus <= rho_plus;
  // sign flips the max problem into a min problem
  const double sg = minimize ? 1.0 : -1.0;
  const double jm = curve.current_at(rho_minus);
  const double jp = rho_plus == rho_minus ? jm : curve.current_at(rho_plus);

  PhaseLabel endpoint;
  if (sg * jm <= sg * jp) {
    endpoint = {Phase::LowDensity, rho_minus, jm};
  } else {
    endpoint = {Phase::HighDensity, rho_plus, jp};
  }
  const bool both_ends = rho_minus != rho_plus && std::abs(jm - jp) <= kPhaseTieTolerance;

  std::optional<Extremum> best;
  const ExtremumKind wanted = minimize ? ExtremumKind::Min : ExtremumKind::Max;
  for (const auto& e : ext) {
    if (e.kind != wanted || !(e.rho > lo && e.rho < hi)) continue;
    if (!best || sg * e.j < sg * best->j) best = e;
  }

  if (best) {
    const double gap = sg * endpoint.bulk_current - sg * best->j;
    if (gap >= -kPhaseTieTolerance) {
      PhaseLabel out{minimize ? Phase::MinimalCurrent : Phase::MaximalCurrent, best->rho, best->j};
      out.tie = gap <= kPhaseTieTolerance;
      return out;
    }
  }
  if (both_ends) {
    PhaseLabel out{Phase::Coexistence, rho_minus, jm};
    return out;
  }
  return endpoint;
}

inline PhaseLabel classify(double rho_minus, double rho_plus, const CurrentDensityCurve& curve) {
  return classify(rho_minus, rho_plus, curve, extrema(curve));
}

struct PhaseCell {
  double rho_minus = 0.0;
  double rho_plus = 0.0;
  PhaseLabel label;
  /// Bulk current flows against the boundary density gradient.
  bool uphill = false;
};

struct PhaseGrid {
  int n = 0;
  /// Grid densities (i+1)/(n+1), i = 0..n-1, used for both axes.
  std::vector<double> rho;
  /// Row-major: cells[i * n + k] has rho_minus = rho[i], rho_plus = rho[k].
  std::vector<PhaseCell> cells;
  const PhaseCell& at(int i, int k) const { return cells[static_cast<std::size_t>(i) * n + k]; }
};

inline bool is_uphill(double rho_minus, double rho_plus, double bulk_current) {
  return bulk_current * (rho_minus - rho_plus) < 0.0;
}

inline std::vector<double> grid_densities(int n) {
  if (n < 2) throw ValidationError("phase grid needs n >= 2");
  std::vector<double> rho(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rho[i] = static_cast<double>(i + 1) / (n + 1);
  return rho;
}

/// Classifies row i of the grid (rho_minus = rho[i]).
inline void classify_row(PhaseGrid& g, int i, const CurrentDensityCurve& curve, const std::vector<Extremum>& ext) {
  for (int k = 0; k < g.n; ++k) {
    PhaseCell c;
    c.rho_minus = g.rho[i];
    c.rho_plus = g.rho[k];
    c.label = classify(c.rho_minus, c.rho_plus, curve, ext);
    c.uphill = is_uphill(c.rho_minus, c.rho_plus, c.label.bulk_current);
    g.cells[static_cast<std::size_t>(i) * g.n + k] = c;
  }
}

inline PhaseGrid phase_grid(const CurrentDensityCurve& curve, int n) {
  PhaseGrid g;
  g.rho = grid_densities(n);
  g.n = n;
  g.cells.resize(static_cast<std::size_t>(n) * n);
  const auto ext = extrema(curve);
  for (int i = 0; i < n; ++i) classify_row(g, i, curve, ext);
  return g;
}

/// Points (rho_-, rho_+) on first-order lines: along each row, wherever the
/// label switches between LD and HD, the root of j(rho_-) - j(rho_+) is
/// bisected. Coexistence cells are reported as they are.
inline std::vector<std::pair<double, double>> coexistence_line(const PhaseGrid& g, const CurrentDensityCurve& curve) {
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < g.n; ++i) {
    const double rm = g.rho[i];
    const double jm = curve.current_at(rm);
    for (int k = 0; k < g.n; ++k) {
      const auto& a = g.at(i, k);
      if (a.label.phase == Phase::Coexistence) {
        out.emplace_back(rm, a.rho_plus);
        continue;
      }
      if (k + 1 >= g.n) continue;
      const auto& b = g.at(i, k + 1);
      const auto pa = a.label.phase, pb = b.label.phase;
      const bool switch_ld_hd = (pa == Phase::LowDensity && pb == Phase::HighDensity) ||
                                (pa == Phase::HighDensity && pb == Phase::LowDensity);
      if (!switch_ld_hd) continue;
      double lo = a.rho_plus, hi = b.rho_plus;
      auto f = [&](double rp) { return jm - curve.current_at(rp); };
      double flo = f(lo), fhi = f(hi);
      if (flo == 0.0 || fhi == 0.0 || (flo < 0.0) == (fhi < 0.0)) continue;
      for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      const double root = 0.5 * (lo + hi);
      // the diagonal rho_+ = rho_- is a trivial root
      if (std::abs(root - rm) < 1e-9) continue;
      out.emplace_back(rm, root);
    }
  }
  return out;
}

}  // namespace kls
