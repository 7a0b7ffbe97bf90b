#pragma once

// Parameter families of the published current-density curves: shared
// (ell, lambda, eps) plus a list of (r, kappa) pairs, listed bottom to top.

#include <string>
#include <utility>
#include <vector>

#include "kls/error.hpp"
#include "kls/model.hpp"

namespace kls {

struct CurveFamily {
  std::string name;
  double ell = 0.0;
  double lambda = 0.0;
  double epsilon = 0.0;
  std::vector<std::pair<double, double>> r_kappa;

  BulkKinetics member(std::size_t i) const {
    return {r_kappa.at(i).first, ell, r_kappa.at(i).second, lambda, epsilon};
  }
};

/// Repulsive interaction, no reversal.
inline CurveFamily repulsive_family() {
  return {"fig1", 0.9, 1.0 / 9.0, 2.0 / 3.0, {{1.606, 0.650}, {1.720, 0.389}, {1.900, 1.0 / 9.0}, {2.140, -0.123}}};
}

/// Attractive interaction.
inline CurveFamily attractive_family() {
  return {"fig2", 4.5, -7.0 / 9.0, -2.0 / 3.0, {{4.3, -0.697}, {4.6, -0.722}, {5.5, -0.778}, {6.7, -0.825}}};
}

/// Strongly attractive interaction.
inline CurveFamily strongly_attractive_family() {
  return {"fig3",
          150.75,
          -0.987,
          -0.980,
          {{56.55, -0.982}, {66.65, -0.985}, {76.75, -0.987}, {81.8, -0.988}, {96.95, -0.989}}};
}

inline CurveFamily curve_family(const std::string& name) {
  if (name == "fig1") return repulsive_family();
  if (name == "fig2") return attractive_family();
  if (name == "fig3") return strongly_attractive_family();
  throw ValidationError("unknown preset '" + name + "' (expected fig1, fig2 or fig3)");
}

}  // namespace kls
