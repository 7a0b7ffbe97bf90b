#pragma once

// Closed-form transfer-matrix evaluation of the one-dimensional Ising
// measure: spectrum, partition functions, density, correlations, and the
// stationary current of the generalized KLS model.
//
// The transfer matrix is T = [[1, x], [x, x^2 y]]. Everything is written in
// terms of the ratio c = lambda_min / lambda_max (|c| < 1) so that powers of
// T never overflow; only partition functions themselves carry lambda_max^L.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "kls/error.hpp"
#include "kls/model.hpp"

namespace kls {

using Matrix2 = std::array<std::array<double, 2>, 2>;

struct TransferSpectrum {
  double x = 1.0;
  double y = 1.0;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  /// Unit eigenvectors (v_0, v_1) for lambda_max and lambda_min.
  std::array<double, 2> v_max{};
  std::array<double, 2> v_min{};

  /// b = v_1^{(min)} / v_1^{(max)}
  double b() const { return v_min[1] / v_max[1]; }
  /// c = lambda_min / lambda_max
  double c() const { return lambda_min / lambda_max; }
  /// Bulk density of the infinite system.
  double rho() const { return v_max[1] * v_max[1]; }
};

inline TransferSpectrum spectrum(const MeasureParams& m) {
  m.validate();
  const double x = m.x;
  const double x2y = x * x * m.y;
  TransferSpectrum s;
  s.x = x;
  s.y = m.y;
  const double disc = std::sqrt((1.0 - x2y) * (1.0 - x2y) + 4.0 * x * x);
  s.lambda_max = 0.5 * (1.0 + x2y + disc);
  // product of the roots is det T; avoids cancellation in the minus root
  s.lambda_min = x * x * (m.y - 1.0) / s.lambda_max;
  // eigenvector (lambda - x^2 y, x); the differences are taken in whichever
  // form does not cancel
  const double a = 1.0 - x2y;
  const double d_max = a >= 0.0 ? 0.5 * (a + disc) : 2.0 * x * x / (disc - a);
  const double d_min = a <= 0.0 ? 0.5 * (a - disc) : -2.0 * x * x / (a + disc);
  auto eigvec = [&](double d) {
    const double norm = std::hypot(d, x);
    return std::array<double, 2>{d / norm, x / norm};
  };
  s.v_max = eigvec(d_max);
  s.v_min = eigvec(d_min);
  return s;
}

namespace detail {

inline double ipow(double base, long n) { return n == 0 ? 1.0 : std::pow(base, static_cast<double>(n)); }

// T^n / lambda_max^n from the spectral decomposition.
inline Matrix2 scaled_power(const TransferSpectrum& s, long n) {
  const double cn = ipow(s.c(), n);
  Matrix2 out{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out[i][j] = s.v_max[i] * s.v_max[j] + cn * s.v_min[i] * s.v_min[j];
  return out;
}

inline Matrix2 mul(const Matrix2& a, const Matrix2& b) {
  Matrix2 out{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return out;
}

// Y_n / lambda_max^n
inline double scaled_y(const TransferSpectrum& s, long n) {
  const double b = s.b();
  return s.rho() * (1.0 + b * b * ipow(s.c(), n));
}

inline void require_length(long L, long min_L) {
  if (L < min_L) throw ValidationError("lattice length must be >= " + std::to_string(min_L));
}

}  // namespace detail

/// T^n assembled from the eigen-decomposition.
inline Matrix2 transfer_power(long n, const TransferSpectrum& s) {
  Matrix2 p = detail::scaled_power(s, n);
  const double scale = detail::ipow(s.lambda_max, n);
  for (auto& row : p)
    for (auto& v : row) v *= scale;
  return p;
}

/// Y_n = <1|T^n|1>.
inline double transfer_y(long n, const TransferSpectrum& s) {
  if (n < 0) throw ValidationError("Y_n requires n >= 0");
  return detail::ipow(s.lambda_max, n) * detail::scaled_y(s, n);
}

/// ln Z_L for the ring of L sites.
inline double log_partition_periodic(long L, const TransferSpectrum& s) {
  detail::require_length(L, 1);
  return static_cast<double>(L) * std::log(s.lambda_max) + std::log1p(detail::ipow(s.c(), L));
}

/// Z_L = Tr T^L = lambda_max^L + lambda_min^L.
inline double partition_periodic(long L, const TransferSpectrum& s) {
  detail::require_length(L, 1);
  if (L > 512) return std::exp(log_partition_periodic(L, s));
  return detail::ipow(s.lambda_max, L) * (1.0 + detail::ipow(s.c(), L));
}

/// rho_L = Y_L / Z_L.
inline double density_periodic(long L, const TransferSpectrum& s) {
  detail::require_length(L, 1);
  const double b = s.b();
  const double cL = detail::ipow(s.c(), L);
  return s.rho() * (1.0 + b * b * cL) / (1.0 + cL);
}

/// Constraint eta_site = value used by the string-correlation evaluators.
struct SiteState {
  long site;
  int value;
};

/// Joint probability that each listed site has the listed occupation on the
/// ring of L sites (normalized trace). Sites must be strictly increasing
/// within 1..L.
inline double periodic_correlation(long L, std::span<const SiteState> sites, const TransferSpectrum& s) {
  detail::require_length(L, 1);
  if (sites.empty()) return 1.0;
  Matrix2 acc{{{1.0, 0.0}, {0.0, 1.0}}};
  long prev = sites.front().site;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& st = sites[i];
    if (st.site < prev || st.site > L || st.site < 1) throw IndexError("sites must be increasing and inside 1..L");
    acc = detail::mul(acc, detail::scaled_power(s, st.site - prev));
    Matrix2 proj{};
    proj[st.value][st.value] = 1.0;
    acc = detail::mul(acc, proj);
    prev = st.site;
  }
  // the trace closes the ring from the last site back to the first
  acc = detail::mul(acc, detail::scaled_power(s, L - prev + sites.front().site));
  const double trace = acc[0][0] + acc[1][1];
  return trace / (1.0 + detail::ipow(s.c(), L));
}

struct PeriodicCorrelations {
  double density = 0.0;
  /// <eta_k (1-eta_{k+1})>
  double occupied_empty = 0.0;
  /// <eta_k (1-eta_{k+1}) eta_{k+2}>
  double occupied_empty_occupied = 0.0;
  /// <eta_k eta_{k+1} (1-eta_{k+2})>
  double occupied_occupied_empty = 0.0;
  /// <eta_k eta_{k+r}> for r = 0..L
  std::vector<double> pair;
};

inline PeriodicCorrelations correlations_periodic(long L, const TransferSpectrum& s) {
  detail::require_length(L, 2);
  PeriodicCorrelations out;
  out.density = density_periodic(L, s);
  // projector products, which avoid the cancellation in 1 - x^2 y Y_{L-1}/Y_L
  const SiteState e10[] = {{1, 1}, {2, 0}};
  out.occupied_empty = periodic_correlation(L, e10, s);
  if (L >= 3) {
    const SiteState e101[] = {{1, 1}, {2, 0}, {3, 1}};
    const SiteState e110[] = {{1, 1}, {2, 1}, {3, 0}};
    out.occupied_empty_occupied = periodic_correlation(L, e101, s);
    out.occupied_occupied_empty = periodic_correlation(L, e110, s);
  } else {
    // the three-site window wraps onto itself: eta_{k+2} = eta_k
    out.occupied_empty_occupied = out.occupied_empty;
    out.occupied_occupied_empty = 0.0;
  }
  out.pair.resize(static_cast<std::size_t>(L) + 1);
  const double denom = 1.0 + detail::ipow(s.c(), L);
  for (long r = 0; r <= L; ++r) {
    out.pair[static_cast<std::size_t>(r)] = detail::scaled_y(s, r) * detail::scaled_y(s, L - r) / denom;
  }
  return out;
}

namespace detail {

inline double current_from_ratios(const DerivedConstants& dc, const TransferSpectrum& s, double r1, double r2,
                                  double rho) {
  const double x2 = s.x * s.x;
  const double x2y = x2 * s.y;
  return (dc.c0 + (dc.c2 - dc.c0) * x2y * r1 - (dc.c1 + dc.c2 * x2y * s.y) * x2 * r2) * rho;
}

}  // namespace detail

/// Stationary current of the periodic model on L sites under its invariant
/// Ising measure. The measure's y must equal (1-eps)/(1+eps).
inline double current_periodic(long L, const BulkKinetics& kin, const TransferSpectrum& s) {
  detail::require_length(L, 4);
  MeasureParams{s.x, s.y}.check_bound_to(kin);
  const auto dc = derived_constants(kin, BoundaryRates{}, MeasureParams{s.x, s.y});
  const double yL = detail::scaled_y(s, L);
  const double r1 = detail::scaled_y(s, L - 1) / (s.lambda_max * yL);
  const double r2 = detail::scaled_y(s, L - 2) / (s.lambda_max * s.lambda_max * yL);
  return detail::current_from_ratios(dc, s, r1, r2, density_periodic(L, s));
}

/// Current in the thermodynamic limit; Y_{L-1}/Y_L -> 1/lambda_max.
inline double current_limit(const BulkKinetics& kin, const TransferSpectrum& s) {
  MeasureParams{s.x, s.y}.check_bound_to(kin);
  const auto dc = derived_constants(kin, BoundaryRates{}, MeasureParams{s.x, s.y});
  const double inv = 1.0 / s.lambda_max;
  return detail::current_from_ratios(dc, s, inv, inv * inv, s.rho());
}

/// Limiting nearest-neighbour correlations (same fields as the finite case,
/// pair left empty).
inline PeriodicCorrelations correlations_limit(const TransferSpectrum& s) {
  const double x2 = s.x * s.x;
  const double x2y = x2 * s.y;
  const double inv = 1.0 / s.lambda_max;
  PeriodicCorrelations out;
  out.density = s.rho();
  out.occupied_empty = (1.0 - x2y * inv) * out.density;
  out.occupied_empty_occupied = x2 * inv * inv * out.density;
  out.occupied_occupied_empty = x2y * inv * (1.0 - x2y * inv) * out.density;
  return out;
}

/// Single-site chemical potentials at the chain ends.
struct BoundaryFields {
  double phi_minus = 0.0;
  double phi_plus = 0.0;

  /// Fields phi/2 obtained by dropping the bond (L,1) from the ring.
  static BoundaryFields free_chain(const MeasureParams& m) {
    const double half = m.phi() / 2.0;
    return {half, half};
  }

  /// Fields phi, so end sites carry the same fugacity x^2 as bulk sites.
  /// This is the measure left invariant by the open dynamics.
  static BoundaryFields uniform(const MeasureParams& m) { return {m.phi(), m.phi()}; }
};

namespace detail {

// e^{phi_pm - phi/2}: weight of an occupied end site in the boundary vector.
inline std::array<double, 2> end_weights(const TransferSpectrum& s, const BoundaryFields& bf) {
  return {std::exp(bf.phi_minus) / s.x, std::exp(bf.phi_plus) / s.x};
}

struct OpenCoefficients {
  double am0, am1, ap0, ap1;  // a_-^{(0)}, a_-^{(1)}, a_+^{(0)}, a_+^{(1)}
  double a_minus() const { return am1 / am0; }
  double a_plus() const { return ap1 / ap0; }
};

inline OpenCoefficients open_coefficients(const TransferSpectrum& s, const BoundaryFields& bf) {
  const auto [em, ep] = end_weights(s, bf);
  return {s.v_max[0] + em * s.v_max[1], s.v_min[0] + em * s.v_min[1], s.v_max[0] + ep * s.v_max[1],
          s.v_min[0] + ep * s.v_min[1]};
}

}  // namespace detail

/// ln Z_L of the open chain with boundary fields.
inline double log_partition_open(long L, const TransferSpectrum& s, const BoundaryFields& bf) {
  detail::require_length(L, 1);
  const auto a = detail::open_coefficients(s, bf);
  const double tail = 1.0 + a.a_plus() * a.a_minus() * detail::ipow(s.c(), L - 1);
  return std::log(a.ap0 * a.am0 * tail) + static_cast<double>(L - 1) * std::log(s.lambda_max);
}

/// Z_L = <s_-| T^{L-1} |s_+>.
inline double partition_open(long L, const TransferSpectrum& s, const BoundaryFields& bf) {
  detail::require_length(L, 1);
  if (L > 512) return std::exp(log_partition_open(L, s, bf));
  const auto a = detail::open_coefficients(s, bf);
  return a.ap0 * a.am0 * detail::ipow(s.lambda_max, L - 1) *
         (1.0 + a.a_plus() * a.a_minus() * detail::ipow(s.c(), L - 1));
}

/// rho_k(L) = <eta_k> on the open chain, site k in 1..L.
inline double density_profile_open(long k, long L, const TransferSpectrum& s, const BoundaryFields& bf) {
  detail::require_length(L, 1);
  if (k < 1 || k > L) throw IndexError("site outside 1..L");
  const auto a = detail::open_coefficients(s, bf);
  const double b = s.b();
  const double c = s.c();
  return s.rho() * (1.0 + a.a_plus() * b * detail::ipow(c, L - k)) *
         (1.0 + a.a_minus() * b * detail::ipow(c, k - 1)) /
         (1.0 + a.a_plus() * a.a_minus() * detail::ipow(c, L - 1));
}


/// Joint probability that each listed site has the listed occupation, on the
/// open chain with boundary fields. Sites must be strictly increasing.
inline double open_correlation(long L, std::span<const SiteState> sites, const TransferSpectrum& s,
                               const BoundaryFields& bf) {
  detail::require_length(L, 1);
  const auto [em, ep] = detail::end_weights(s, bf);
  // <s_-| T^{k1-1} P1 T^{k2-k1} P2 ... T^{L-kn} |s_+>, every power scaled by lambda_max
  Matrix2 acc{{{1.0, 0.0}, {0.0, 1.0}}};
  long prev = 1;
  for (const auto& st : sites) {
    if (st.site < prev || st.site > L) throw IndexError("sites must be increasing and inside 1..L");
    acc = detail::mul(acc, detail::scaled_power(s, st.site - prev));
    Matrix2 proj{};
    proj[st.value][st.value] = 1.0;
    acc = detail::mul(acc, proj);
    prev = st.site;
  }
  acc = detail::mul(acc, detail::scaled_power(s, L - prev));
  const std::array<double, 2> left{1.0, em}, right{1.0, ep};
  double num = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) num += left[i] * acc[i][j] * right[j];
  const auto a = detail::open_coefficients(s, bf);
  const double z = a.ap0 * a.am0 * (1.0 + a.a_plus() * a.a_minus() * detail::ipow(s.c(), L - 1));
  return num / z;
}

namespace detail {

// product over bonds of y^{eta eta'} x^{eta + eta'}
inline double bond_product(std::span<const std::uint8_t> occ, Topology topo, const MeasureParams& m) {
  const std::size_t L = occ.size();
  const std::size_t bonds = topo == Topology::Periodic ? L : L - 1;
  int pairs = 0, ends = 0;
  for (std::size_t k = 0; k < bonds; ++k) {
    const int a = occ[k], b = occ[(k + 1) % L];
    pairs += a * b;
    ends += a + b;
  }
  return std::pow(m.y, pairs) * std::pow(m.x, ends);
}

}  // namespace detail

/// Unnormalized Boltzmann weight y^{pairs} x^{2N}. Periodic chains count ring
/// pairs; open chains count the L-1 chain pairs and give every site,
/// end sites included, fugacity x^2 (boundary fields phi).
inline double boltzmann_weight(std::span<const std::uint8_t> occ, Topology topo, const MeasureParams& m) {
  double w = detail::bond_product(occ, topo, m);
  if (topo == Topology::Open) w *= std::pow(m.x, occ.front() + occ.back());
  return w;
}

inline double boltzmann_weight(const Configuration& cfg, const MeasureParams& m) {
  return boltzmann_weight(cfg.bits(), cfg.topology(), m);
}

/// Open-chain weight with explicit boundary fields.
inline double boltzmann_weight(const Configuration& cfg, const MeasureParams& m, const BoundaryFields& bf) {
  if (cfg.topology() != Topology::Open) throw DomainError("boundary fields apply to open chains only");
  const double half = m.phi() / 2.0;
  const int L = cfg.size();
  return detail::bond_product(cfg.bits(), Topology::Open, m) *
         std::exp((bf.phi_minus - half) * cfg(1) + (bf.phi_plus - half) * cfg(L));
}

}  // namespace kls
