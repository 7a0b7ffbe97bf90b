#pragma once

// Model parameters, lattice configurations and the exact jump, boundary and
// reservoir rates of the generalized Katz-Lebowitz-Spohn exclusion process.
//
// Sites are numbered 1..L at every public entry point; storage is 0-based.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kls/error.hpp"

namespace kls {

enum class Topology { Periodic, Open };
enum class Side { Left, Right };

/// Coefficient of eta_{L-2} in the right boundary left-jump rate.
/// VacuumExtended uses (1-eps), the bulk rate with an empty site L+1; this is
/// the variant for which the open Ising measure is invariant. AsWritten uses
/// (1+eps) and is kept for comparison.
enum class BoundaryVariant { AsWritten, VacuumExtended };

inline std::string to_string(Topology t) { return t == Topology::Periodic ? "periodic" : "open"; }
inline std::string to_string(BoundaryVariant v) {
  return v == BoundaryVariant::AsWritten ? "as-written" : "vacuum-extended";
}

/// Bulk jump parameters: hopping rates r (right), ell (left), kinetic
/// interactions kappa (right), lambda (left) and the static interaction eps.
struct BulkKinetics {
  double r = 1.0;
  double ell = 0.0;
  double kappa = 0.0;
  double lambda = 0.0;
  double epsilon = 0.0;

  void validate() const {
    auto open_unit = [](double v) { return std::isfinite(v) && v > -1.0 && v < 1.0; };
    if (!(std::isfinite(r) && r >= 0.0)) throw ValidationError("r must be finite and >= 0");
    if (!(std::isfinite(ell) && ell >= 0.0)) throw ValidationError("ell must be finite and >= 0");
    if (!open_unit(kappa)) throw ValidationError("kappa must lie in (-1, 1)");
    if (!open_unit(lambda)) throw ValidationError("lambda must lie in (-1, 1)");
    if (!open_unit(epsilon)) throw ValidationError("epsilon must lie in (-1, 1)");
  }

  /// Interaction parameter y = e^{-J} of the invariant Ising measure.
  double interaction_y() const { return (1.0 - epsilon) / (1.0 + epsilon); }

  double right_base() const { return r * (1.0 + kappa); }
  double left_base() const { return ell * (1.0 + lambda); }
};

/// Fugacity x = e^{phi/2} and interaction y = e^{-J} of the Ising weight.
struct MeasureParams {
  double x = 1.0;
  double y = 1.0;

  static MeasureParams from_epsilon(double x, double epsilon) {
    return MeasureParams{x, (1.0 - epsilon) / (1.0 + epsilon)};
  }
  static MeasureParams from_potentials(double phi, double J) {
    return MeasureParams{std::exp(phi / 2.0), std::exp(-J)};
  }

  double phi() const { return 2.0 * std::log(x); }
  /// Weight e^{phi} = x^2 carried by each particle.
  double fugacity() const { return x * x; }
  double J() const { return -std::log(y); }

  void validate() const {
    if (!(std::isfinite(x) && x > 0.0)) throw ValidationError("x must be finite and > 0");
    if (!(std::isfinite(y) && y > 0.0)) throw ValidationError("y must be finite and > 0");
  }

  /// Throws unless y = (1-eps)/(1+eps) up to rounding.
  void check_bound_to(const BulkKinetics& kin) const {
    const double expected = kin.interaction_y();
    if (std::abs(y - expected) > 1e-12 * std::max(1.0, expected)) {
      throw ValidationError("measure y = " + std::to_string(y) +
                            " inconsistent with epsilon (expected " + std::to_string(expected) + ")");
    }
  }
};

/// Reservoir rates: insertion alpha_i and removal gamma_i at site 1,
/// removal beta_i and insertion delta_i at site L. Index i = 1 (2) applies
/// when the neighbouring site is empty (occupied).
struct BoundaryRates {
  double alpha1 = 0.0, alpha2 = 0.0;
  double gamma1 = 0.0, gamma2 = 0.0;
  double beta1 = 0.0, beta2 = 0.0;
  double delta1 = 0.0, delta2 = 0.0;

  std::array<double, 8> as_array() const {
    return {alpha1, alpha2, gamma1, gamma2, beta1, beta2, delta1, delta2};
  }

  bool all_zero() const {
    const auto a = as_array();
    return std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
  }

  void validate() const {
    for (double v : as_array()) {
      if (!(std::isfinite(v) && v >= 0.0)) throw ValidationError("boundary rates must be finite and >= 0");
    }
  }
};

/// Bulk constants c0, c1, c2 and boundary constants c1-, c2-, c1+, c2+.
/// The boundary constants are built with the per-particle fugacity z = x^2.
struct DerivedConstants {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double c1m = 0.0, c2m = 0.0, c1p = 0.0, c2p = 0.0;
};

/// Occupation vector eta in {0,1}^L with its lattice topology.
class Configuration {
 public:
  static constexpr int kMinLength = 4;
  static constexpr int kMaxIndexedLength = 62;

  Configuration(std::vector<std::uint8_t> occ, Topology topology)
      : occ_(std::move(occ)), topology_(topology) {
    if (static_cast<int>(occ_.size()) < kMinLength) {
      throw ValidationError("lattice length must be >= " + std::to_string(kMinLength));
    }
    for (auto v : occ_) {
      if (v > 1) throw ValidationError("occupation numbers must be 0 or 1");
    }
  }

  static Configuration empty(int L, Topology t) { return {std::vector<std::uint8_t>(checked_length(L), 0), t}; }
  static Configuration full(int L, Topology t) { return {std::vector<std::uint8_t>(checked_length(L), 1), t}; }

  /// Parses "0110": the first character is site 1.
  static Configuration from_string(std::string_view bits, Topology t) {
    std::vector<std::uint8_t> occ;
    occ.reserve(bits.size());
    for (char c : bits) {
      if (c != '0' && c != '1') throw ValidationError("configuration string must contain only 0 and 1");
      occ.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return {std::move(occ), t};
  }

  /// Inverse of index(): site 1 is the most significant bit.
  static Configuration from_index(std::uint64_t index, int L, Topology t) {
    std::vector<std::uint8_t> occ(checked_length(L));
    for (int i = 0; i < L; ++i) occ[i] = static_cast<std::uint8_t>((index >> (L - 1 - i)) & 1u);
    return {std::move(occ), t};
  }

  int size() const { return static_cast<int>(occ_.size()); }
  Topology topology() const { return topology_; }
  std::span<const std::uint8_t> bits() const { return occ_; }

  /// eta_site for site in 1..L; periodic lattices accept any integer (mod L).
  int operator()(int site) const { return occ_[to_storage(site)]; }

  std::uint64_t index() const {
    if (size() > kMaxIndexedLength) throw ResourceError("configuration too long to index");
    std::uint64_t idx = 0;
    for (auto v : occ_) idx = (idx << 1) | v;
    return idx;
  }

  int particle_count() const { return static_cast<int>(std::count(occ_.begin(), occ_.end(), 1)); }

  std::string to_string() const {
    std::string s;
    s.reserve(occ_.size());
    for (auto v : occ_) s.push_back(static_cast<char>('0' + v));
    return s;
  }

  bool operator==(const Configuration&) const = default;

  /// Maps a 1-based site to its storage slot, wrapping for periodic lattices.
  std::size_t to_storage(int site) const {
    const int L = size();
    if (topology_ == Topology::Periodic) {
      int m = (site - 1) % L;
      if (m < 0) m += L;
      return static_cast<std::size_t>(m);
    }
    if (site < 1 || site > L) throw IndexError("site " + std::to_string(site) + " outside 1.." + std::to_string(L));
    return static_cast<std::size_t>(site - 1);
  }

 private:
  static std::size_t checked_length(int L) {
    if (L < kMinLength) throw ValidationError("lattice length must be >= " + std::to_string(kMinLength));
    return static_cast<std::size_t>(L);
  }

  std::vector<std::uint8_t> occ_;
  Topology topology_;
};

/// Configuration with site l inverted.
inline Configuration flip(const Configuration& cfg, int l) {
  if (l < 1 || l > cfg.size()) throw IndexError("flip site " + std::to_string(l) + " outside lattice");
  std::vector<std::uint8_t> occ(cfg.bits().begin(), cfg.bits().end());
  occ[l - 1] ^= 1u;
  return {std::move(occ), cfg.topology()};
}

/// Configuration with occupations of l and l+1 exchanged.
inline Configuration swap(const Configuration& cfg, int l) {
  const int L = cfg.size();
  const bool valid = cfg.topology() == Topology::Periodic ? (l >= 1 && l <= L) : (l >= 1 && l <= L - 1);
  if (!valid) throw IndexError("bond (" + std::to_string(l) + "," + std::to_string(l + 1) + ") not in lattice");
  std::vector<std::uint8_t> occ(cfg.bits().begin(), cfg.bits().end());
  std::swap(occ[cfg.to_storage(l)], occ[cfg.to_storage(l + 1)]);
  return {std::move(occ), cfg.topology()};
}

namespace detail {

// Local pattern (eta_{k-1}, eta_k, eta_{k+1}, eta_{k+2}) around bond (k,k+1).
inline double right_rate_local(int prev, int here, int next, int next2, const BulkKinetics& kin) {
  if (here == 0 || next == 1) return 0.0;
  return kin.r * (1.0 + kin.kappa) + kin.r * (kin.epsilon - kin.kappa) * prev -
         kin.r * (kin.epsilon + kin.kappa) * next2;
}

inline double left_rate_local(int prev, int here, int next, int next2, const BulkKinetics& kin) {
  if (here == 1 || next == 0) return 0.0;
  return kin.ell * (1.0 + kin.lambda) - kin.ell * (kin.epsilon + kin.lambda) * prev +
         kin.ell * (kin.epsilon - kin.lambda) * next2;
}

// Left boundary bond (1,2); n1, n2, n3 are eta_1..eta_3.
inline std::pair<double, double> left_boundary_local(int n1, int n2, int n3, const BulkKinetics& kin) {
  const double rm = kin.r * n1 * (1 - n2) * ((1.0 + kin.kappa) * (1 - n3) + (1.0 - kin.epsilon) * n3);
  const double lm = kin.ell * (1 - n1) * n2 * ((1.0 + kin.lambda) * (1 - n3) + (1.0 + kin.epsilon) * n3);
  return {rm, lm};
}

// Right boundary bond (L-1,L); a, b, c are eta_{L-2}, eta_{L-1}, eta_L.
inline std::pair<double, double> right_boundary_local(int a, int b, int c, const BulkKinetics& kin,
                                                      BoundaryVariant variant) {
  const double rp = kin.r * b * (1 - c) * ((1.0 + kin.kappa) * (1 - a) + (1.0 + kin.epsilon) * a);
  const double eps_coef = variant == BoundaryVariant::AsWritten ? 1.0 + kin.epsilon : 1.0 - kin.epsilon;
  const double lp = kin.ell * (1 - b) * c * ((1.0 + kin.lambda) * (1 - a) + eps_coef * a);
  return {rp, lp};
}

// Reservoir rates at site 1: (insert, remove) given eta_1, eta_2.
inline std::pair<double, double> left_reservoir_local(int n1, int n2, const BoundaryRates& b) {
  const double insert = (1 - n1) * (n2 ? b.alpha2 : b.alpha1);
  const double remove = n1 * (n2 ? b.gamma2 : b.gamma1);
  return {insert, remove};
}

// Reservoir rates at site L: (insert, remove) given eta_{L-1}, eta_L.
inline std::pair<double, double> right_reservoir_local(int nLm1, int nL, const BoundaryRates& b) {
  const double insert = (1 - nL) * (nLm1 ? b.delta2 : b.delta1);
  const double remove = nL * (nLm1 ? b.beta2 : b.beta1);
  return {insert, remove};
}

// (right, left) rates across bond (k, k+1), 0-based k, on raw storage. For
// open lattices k = 0 and k = L-2 are the boundary bonds.
inline std::pair<double, double> bond_rates_raw(std::span<const std::uint8_t> occ, Topology topo, int k,
                                                const BulkKinetics& kin, BoundaryVariant variant) {
  const int L = static_cast<int>(occ.size());
  if (topo == Topology::Periodic) {
    auto at = [&](int i) { return static_cast<int>(occ[static_cast<std::size_t>(((i % L) + L) % L)]); };
    const int a = at(k - 1), b = at(k), c = at(k + 1), d = at(k + 2);
    return {right_rate_local(a, b, c, d, kin), left_rate_local(a, b, c, d, kin)};
  }
  if (k == 0) return left_boundary_local(occ[0], occ[1], occ[2], kin);
  if (k == L - 2) return right_boundary_local(occ[L - 3], occ[L - 2], occ[L - 1], kin, variant);
  const int a = occ[k - 1], b = occ[k], c = occ[k + 1], d = occ[k + 2];
  return {right_rate_local(a, b, c, d, kin), left_rate_local(a, b, c, d, kin)};
}

inline void require_bulk_bond(const Configuration& cfg, int k) {
  if (cfg.topology() == Topology::Open && (k < 2 || k > cfg.size() - 2)) {
    throw DomainError("bond " + std::to_string(k) + " is not a bulk bond of the open lattice (2.." +
                      std::to_string(cfg.size() - 2) + ")");
  }
}

}  // namespace detail

/// Rate r_k for a particle at k to jump to k+1 (bulk bond).
inline double bulk_right_rate(const Configuration& cfg, int k, const BulkKinetics& kin) {
  detail::require_bulk_bond(cfg, k);
  return detail::right_rate_local(cfg(k - 1), cfg(k), cfg(k + 1), cfg(k + 2), kin);
}

/// Rate ell_{k+1} for a particle at k+1 to jump to k (bulk bond).
inline double bulk_left_rate(const Configuration& cfg, int k, const BulkKinetics& kin) {
  detail::require_bulk_bond(cfg, k);
  return detail::left_rate_local(cfg(k - 1), cfg(k), cfg(k + 1), cfg(k + 2), kin);
}

/// (right, left) jump rates across the boundary bond (1,2) or (L-1,L).
inline std::pair<double, double> boundary_jump_rates(const Configuration& cfg, Side side, const BulkKinetics& kin,
                                                     BoundaryVariant variant = BoundaryVariant::VacuumExtended) {
  if (cfg.topology() != Topology::Open) throw DomainError("boundary jump rates require an open lattice");
  const int L = cfg.size();
  if (side == Side::Left) return detail::left_boundary_local(cfg(1), cfg(2), cfg(3), kin);
  return detail::right_boundary_local(cfg(L - 2), cfg(L - 1), cfg(L), kin, variant);
}

/// (insert, remove) reservoir rates at site 1 or L.
inline std::pair<double, double> reservoir_rates(const Configuration& cfg, Side side, const BoundaryRates& b) {
  if (cfg.topology() != Topology::Open) throw DomainError("reservoir rates require an open lattice");
  const int L = cfg.size();
  if (side == Side::Left) return detail::left_reservoir_local(cfg(1), cfg(2), b);
  return detail::right_reservoir_local(cfg(L - 1), cfg(L), b);
}

/// (right, left) rates across any bond (k,k+1) of the lattice, boundary
/// bonds included.
inline std::pair<double, double> bond_rates(const Configuration& cfg, int k, const BulkKinetics& kin,
                                            BoundaryVariant variant = BoundaryVariant::VacuumExtended) {
  const int L = cfg.size();
  const bool valid = cfg.topology() == Topology::Periodic ? (k >= 1 && k <= L) : (k >= 1 && k <= L - 1);
  if (!valid) throw IndexError("bond " + std::to_string(k) + " not in lattice");
  return detail::bond_rates_raw(cfg.bits(), cfg.topology(), k - 1, kin, variant);
}

/// Instantaneous current j_k = r_k - ell_{k+1} across bond (k, k+1).
inline double instantaneous_current(const Configuration& cfg, int k, const BulkKinetics& kin,
                                    BoundaryVariant variant = BoundaryVariant::VacuumExtended) {
  const auto [right, left] = bond_rates(cfg, k, kin, variant);
  return right - left;
}

inline DerivedConstants derived_constants(const BulkKinetics& kin, const BoundaryRates& b, const MeasureParams& m) {
  DerivedConstants dc;
  dc.c0 = kin.r * (1.0 + kin.kappa) - kin.ell * (1.0 + kin.lambda);
  dc.c1 = kin.r * (kin.epsilon + kin.kappa) - kin.ell * (kin.epsilon + kin.lambda);
  dc.c2 = kin.r * (kin.epsilon - kin.kappa) - kin.ell * (kin.epsilon - kin.lambda);
  const double z = m.fugacity();
  dc.c1m = b.alpha1 / z - b.gamma1;
  dc.c2m = b.alpha2 / z - b.gamma2 * m.y;
  dc.c1p = b.beta1 - b.delta1 / z;
  dc.c2p = b.beta2 * m.y - b.delta2 / z;
  return dc;
}

struct InvarianceReport {
  bool satisfied = false;
  /// |c1- - c0/(1+z)|, |c2- - c0/(1+z)|, |c1+ - c0/(1+z)|, |c2+ - c0/(1+z)|, |c1 - z y c2|
  std::array<double, 5> residuals{};
  double tolerance = 0.0;
};

/// Checks the boundary and bulk conditions under which the open Ising
/// measure is invariant (z = x^2 is the per-particle fugacity). Tolerance is
/// 1e-12 times the largest constant magnitude (at least 1).
inline InvarianceReport invariance_conditions_check(const DerivedConstants& dc, const MeasureParams& m) {
  InvarianceReport rep;
  const double z = m.fugacity();
  const double target = dc.c0 / (1.0 + z);
  rep.residuals = {std::abs(dc.c1m - target), std::abs(dc.c2m - target), std::abs(dc.c1p - target),
                   std::abs(dc.c2p - target), std::abs(dc.c1 - z * m.y * dc.c2)};
  double scale = 1.0;
  for (double v : {dc.c0, dc.c1, dc.c2, dc.c1m, dc.c2m, dc.c1p, dc.c2p}) scale = std::max(scale, std::abs(v));
  rep.tolerance = 1e-12 * scale;
  rep.satisfied = std::all_of(rep.residuals.begin(), rep.residuals.end(),
                              [&](double r) { return r <= rep.tolerance; });
  return rep;
}

/// Free constants of the boundary parametrization; omega_i^- acts at the
/// left reservoir and omega_i^+ at the right one.
struct BoundaryOmegas {
  double minus1 = 0.0, minus2 = 0.0, plus1 = 0.0, plus2 = 0.0;
};

/// Reservoir rates that satisfy the four boundary conditions of invariance
/// identically for any admissible omegas.
inline BoundaryRates boundary_rates_from_omegas(const BulkKinetics& kin, const MeasureParams& m,
                                                const BoundaryOmegas& w) {
  const double R = kin.right_base();
  const double Lb = kin.left_base();
  const double bound = -std::min(R, Lb);
  for (double om : {w.minus1, w.minus2, w.plus1, w.plus2}) {
    if (!(std::isfinite(om) && om >= bound)) {
      throw ValidationError("omega " + std::to_string(om) + " below lower bound " + std::to_string(bound));
    }
  }
  const double z = m.fugacity();
  const double in = 1.0 + 1.0 / z;
  const double out = 1.0 + z;
  BoundaryRates b;
  b.alpha1 = (R + w.minus1) / in;
  b.alpha2 = (R + w.minus2) / in;
  b.gamma1 = (Lb + w.minus1) / out;
  b.gamma2 = (Lb + w.minus2) / (out * m.y);
  b.beta1 = (R + w.plus1) / out;
  b.beta2 = (R + w.plus2) / (out * m.y);
  b.delta1 = (Lb + w.plus1) / in;
  b.delta2 = (Lb + w.plus2) / in;
  return b;
}

/// The x (= sqrt of the per-particle fugacity) fixed by the bulk condition
/// c1 = x^2 y c2, if it has a positive solution. Returns nothing when c2 = 0
/// or the ratio is not positive.
inline std::optional<double> fugacity_from_bulk(const BulkKinetics& kin) {
  const double y = kin.interaction_y();
  const double c1 = kin.r * (kin.epsilon + kin.kappa) - kin.ell * (kin.epsilon + kin.lambda);
  const double c2 = kin.r * (kin.epsilon - kin.kappa) - kin.ell * (kin.epsilon - kin.lambda);
  if (c2 == 0.0) return std::nullopt;
  const double z = c1 / (y * c2);
  if (!(z > 0.0) || !std::isfinite(z)) return std::nullopt;
  return std::sqrt(z);
}

}  // namespace kls
