#pragma once

// Brute-force references used only by the tests. Nothing here calls the
// library's weight, rate or transfer-matrix code; quantities are rebuilt
// from their defining sums over all 2^L configurations.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Oracle indexing: bit i of s is site i+1. The library puts site 1 in the
// most significant bit, so comparisons go through library_index().
inline int bit(std::uint64_t s, int site0) { return static_cast<int>((s >> site0) & 1u); }

inline std::uint64_t library_index(std::uint64_t s, int L) {
  std::uint64_t out = 0;
  for (int i = 0; i < L; ++i) out = (out << 1) | ((s >> i) & 1u);
  return out;
}

inline std::string sites(std::uint64_t s, int L) {
  std::string out;
  for (int i = 0; i < L; ++i) out += bit(s, i) ? '1' : '0';
  return out;
}

/// exp(sum_k [phi eta_k - J eta_k eta_{k+1}]) on a ring of L sites.
inline double ring_weight(std::uint64_t s, int L, double phi, double J) {
  double e = 0.0;
  for (int k = 0; k < L; ++k) e += phi * bit(s, k) - J * bit(s, k) * bit(s, (k + 1) % L);
  return std::exp(e);
}

/// Open chain: bulk sites carry phi, the two end sites carry phi_minus and
/// phi_plus, and the L-1 chain bonds carry -J.
inline double chain_weight(std::uint64_t s, int L, double phi, double J, double phi_minus, double phi_plus) {
  double e = phi_minus * bit(s, 0) + phi_plus * bit(s, L - 1);
  for (int k = 1; k < L - 1; ++k) e += phi * bit(s, k);
  for (int k = 0; k + 1 < L; ++k) e -= J * bit(s, k) * bit(s, k + 1);
  return std::exp(e);
}

struct Ensemble {
  int L = 0;
  std::vector<double> w;  // unnormalized weights, index = configuration bits
  double Z = 0.0;

  /// <f> over the normalized weights.
  double mean(const std::function<double(std::uint64_t)>& f) const {
    double acc = 0.0;
    for (std::uint64_t s = 0; s < w.size(); ++s) acc += w[s] * f(s);
    return acc / Z;
  }
};

inline Ensemble ring(int L, double phi, double J) {
  Ensemble e;
  e.L = L;
  e.w.resize(std::size_t{1} << L);
  for (std::uint64_t s = 0; s < e.w.size(); ++s) e.Z += (e.w[s] = ring_weight(s, L, phi, J));
  return e;
}

inline Ensemble chain(int L, double phi, double J, double phi_minus, double phi_plus) {
  Ensemble e;
  e.L = L;
  e.w.resize(std::size_t{1} << L);
  for (std::uint64_t s = 0; s < e.w.size(); ++s) e.Z += (e.w[s] = chain_weight(s, L, phi, J, phi_minus, phi_plus));
  return e;
}

/// The eight bulk jump rates read off the pictorial table, for a window
/// (a, b, c, d) = (eta_{k-1}, eta_k, eta_{k+1}, eta_{k+2}).
struct Kin {
  double r, ell, kappa, lambda, eps;
};

inline double right_rate(int a, int b, int c, int d, const Kin& k) {
  if (!(b == 1 && c == 0)) return 0.0;
  if (a == 0 && d == 0) return k.r * (1 + k.kappa);
  if (a == 1 && d == 0) return k.r * (1 + k.eps);
  if (a == 0 && d == 1) return k.r * (1 - k.eps);
  return k.r * (1 - k.kappa);
}

inline double left_rate(int a, int b, int c, int d, const Kin& k) {
  if (!(b == 0 && c == 1)) return 0.0;
  if (a == 0 && d == 0) return k.ell * (1 + k.lambda);
  if (a == 1 && d == 0) return k.ell * (1 - k.eps);
  if (a == 0 && d == 1) return k.ell * (1 + k.eps);
  return k.ell * (1 - k.lambda);
}

/// Net current across ring bond (k, k+1), k 0-based.
inline double ring_current(std::uint64_t s, int L, int k, const Kin& kin) {
  auto at = [&](int i) { return bit(s, ((i % L) + L) % L); };
  const int a = at(k - 1), b = at(k), c = at(k + 1), d = at(k + 2);
  return right_rate(a, b, c, d, kin) - left_rate(a, b, c, d, kin);
}

/// Log-uniform draw on [lo, hi].
inline double log_uniform(std::mt19937_64& g, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(g));
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace oracle
