#pragma once

// Monte Carlo points on the current-density curve.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kls/ising.hpp"
#include "kls/model.hpp"
#include "kls/simulator.hpp"

namespace kls {

/// SplitMix64 step; used to derive independent replica seeds from one seed.
inline std::uint64_t splitmix64(std::uint64_t v) {
  v += 0x9e3779b97f4a7c15ull;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
  return v ^ (v >> 31);
}

/// Seed of replica i for base seed s.
inline std::uint64_t replica_seed(std::uint64_t base, std::uint64_t i) { return splitmix64(base ^ splitmix64(i)); }

enum class ScanMode { OpenInvariant, PeriodicFixedNumber };

inline std::string to_string(ScanMode m) { return m == ScanMode::OpenInvariant ? "open" : "periodic"; }

struct ScanSettings {
  int L_open = 64;
  int L_periodic = 256;
  double t_burnin = 200.0;
  double t_measure = 2000.0;
  int n_batches = 16;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> burnin_events;
  BoundaryOmegas omegas{};
};

struct ScanPoint {
  double x = 0.0;
  ScanMode mode = ScanMode::OpenInvariant;
  double rho_exact = 0.0;
  double j_exact = 0.0;
  Estimate rho;
  Estimate j;
};

/// True when the bulk condition c1 = x^2 y c2 holds at this x (to 1e-12
/// relative), so reservoirs can be tuned to keep the Ising measure invariant.
inline bool admits_open_invariant(const BulkKinetics& kin, double x) {
  const MeasureParams m{x, kin.interaction_y()};
  const auto dc = derived_constants(kin, BoundaryRates{}, m);
  const double z = m.fugacity();
  const double scale = std::max({1.0, std::abs(dc.c1), std::abs(z * m.y * dc.c2)});
  return std::abs(dc.c1 - z * m.y * dc.c2) <= 1e-12 * scale;
}

/// Simulation settings for point i of a scan.
inline SimConfig scan_config(const BulkKinetics& kin, double x, std::size_t i, const ScanSettings& st, ScanMode& mode) {
  if (!(x > 0.0 && std::isfinite(x))) throw ValidationError("scan fugacities must be > 0");
  const MeasureParams m{x, kin.interaction_y()};
  SimConfig c;
  c.kin = kin;
  c.t_burnin = st.t_burnin;
  c.t_measure = st.t_measure;
  c.n_batches = st.n_batches;
  c.burnin_events = st.burnin_events;
  c.seed = replica_seed(st.seed, i);
  if (admits_open_invariant(kin, x)) {
    mode = ScanMode::OpenInvariant;
    c.L = st.L_open;
    c.topology = Topology::Open;
    c.boundary = boundary_rates_from_omegas(kin, m, st.omegas);
    c.initial = InitialCondition::bernoulli(spectrum(m).rho());
  } else {
    // a ring at fixed particle number samples the Ising measure at every
    // density, open reservoirs only at the one x fixed by the bulk rates
    mode = ScanMode::PeriodicFixedNumber;
    c.L = st.L_periodic;
    c.topology = Topology::Periodic;
    const int n = static_cast<int>(std::lround(spectrum(m).rho() * c.L));
    c.initial = InitialCondition::fixed_number(n);
  }
  return c;
}

/// One simulated (rho, j) point per x, in order. Runs sequentially; the CLI
/// distributes points over workers using scan_config directly.
inline std::vector<ScanPoint> current_vs_density_scan(const BulkKinetics& kin, const std::vector<double>& x_grid,
                                                      const ScanSettings& st = {}) {
  kin.validate();
  std::vector<ScanPoint> out;
  out.reserve(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    ScanPoint p;
    p.x = x_grid[i];
    const auto cfg = scan_config(kin, p.x, i, st, p.mode);
    const auto s = spectrum({p.x, kin.interaction_y()});
    p.rho_exact = s.rho();
    p.j_exact = current_limit(kin, s);
    const auto obs = run(cfg);
    p.rho = obs.bulk_density;
    p.j = obs.bulk_current;
    out.push_back(p);
  }
  return out;
}

}  // namespace kls
