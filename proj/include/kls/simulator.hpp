#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kls/error.hpp"
#include "kls/model.hpp"

namespace kls {

/// Seeded 64-bit Mersenne Twister. Uniforms are the top 53 bits scaled to
/// [0,1), so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Exponential variate with the given rate.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

enum class EventKind { RightJump, LeftJump, Insert, Remove };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::RightJump: return "right-jump";
    case EventKind::LeftJump: return "left-jump";
    case EventKind::Insert: return "insert";
    case EventKind::Remove: return "remove";
  }
  return "?";
}

/// A jump across bond (site, site+1) or a reservoir flip at a boundary site.
/// Sites are 1-based.
struct Event {
  EventKind kind;
  int site;
  double rate;
  bool operator==(const Event&) const = default;
};

/// Every event with nonzero rate in configuration cfg.
inline std::vector<Event> enabled_events(const Configuration& cfg, const BulkKinetics& kin,
                                         const std::optional<BoundaryRates>& boundary,
                                         BoundaryVariant variant = BoundaryVariant::VacuumExtended) {
  const int L = cfg.size();
  const bool periodic = cfg.topology() == Topology::Periodic;
  if (!periodic && !boundary) throw ValidationError("open lattice needs boundary rates");
  std::vector<Event> out;
  const int bonds = periodic ? L : L - 1;
  for (int k = 0; k < bonds; ++k) {
    const auto [right, left] = detail::bond_rates_raw(cfg.bits(), cfg.topology(), k, kin, variant);
    if (right > 0.0) out.push_back({EventKind::RightJump, k + 1, right});
    if (left > 0.0) out.push_back({EventKind::LeftJump, k + 1, left});
  }
  if (!periodic) {
    const auto [li, lr] = reservoir_rates(cfg, Side::Left, *boundary);
    const auto [ri, rr] = reservoir_rates(cfg, Side::Right, *boundary);
    if (li > 0.0) out.push_back({EventKind::Insert, 1, li});
    if (lr > 0.0) out.push_back({EventKind::Remove, 1, lr});
    if (ri > 0.0) out.push_back({EventKind::Insert, L, ri});
    if (rr > 0.0) out.push_back({EventKind::Remove, L, rr});
  }
  return out;
}

struct InitialCondition {
  enum class Kind { Empty, Full, Bernoulli, Explicit, FixedNumber };
  Kind kind = Kind::Empty;
  double p = 0.5;
  std::vector<std::uint8_t> occupation;
  int count = 0;

  static InitialCondition empty() { return {}; }
  static InitialCondition full() { return {Kind::Full}; }
  static InitialCondition bernoulli(double p) { return {Kind::Bernoulli, p}; }
  static InitialCondition explicit_config(const Configuration& cfg) {
    return {Kind::Explicit, 0.0, {cfg.bits().begin(), cfg.bits().end()}};
  }
  static InitialCondition fixed_number(int n) { return {Kind::FixedNumber, 0.0, {}, n}; }
};

struct SimConfig {
  int L = 64;
  Topology topology = Topology::Open;
  BulkKinetics kin;
  std::optional<BoundaryRates> boundary;
  BoundaryVariant variant = BoundaryVariant::VacuumExtended;
  InitialCondition initial;
  double t_burnin = 1.0;
  double t_measure = 100.0;
  /// Minimum number of burn-in events; default max(10 L^2, 10^6).
  std::optional<std::uint64_t> burnin_events;
  int n_batches = 16;
  std::uint64_t seed = 1;
  /// Sites excluded at each end of an open lattice when averaging bulk
  /// quantities; default L/4. Ignored for periodic lattices.
  std::optional<int> bulk_margin;
  /// Record time spent in every configuration (L <= 16 only).
  bool record_histogram = false;

  bool closed() const { return topology == Topology::Open && boundary && boundary->all_zero(); }

  std::uint64_t resolved_burnin_events() const {
    if (burnin_events) return *burnin_events;
    return std::max<std::uint64_t>(10ull * static_cast<std::uint64_t>(L) * static_cast<std::uint64_t>(L), 1000000ull);
  }

  int resolved_margin() const {
    if (topology == Topology::Periodic) return 0;
    return bulk_margin ? *bulk_margin : L / 4;
  }

  void validate() const {
    if (L < Configuration::kMinLength) throw ValidationError("L must be >= 4");
    kin.validate();
    if (topology == Topology::Open && !boundary) throw ValidationError("open lattice needs boundary rates");
    if (topology == Topology::Periodic && boundary) throw ValidationError("periodic lattice takes no boundary rates");
    if (boundary) boundary->validate();
    if (!(std::isfinite(t_burnin) && t_burnin > 0.0)) throw ValidationError("t_burnin must be > 0");
    if (!(std::isfinite(t_measure) && t_measure > 0.0)) throw ValidationError("t_measure must be > 0");
    if (n_batches < 8) throw ValidationError("n_batches must be >= 8");
    const int margin = resolved_margin();
    if (margin < 0 || L - 2 * margin < 4) throw ValidationError("bulk margin leaves fewer than 4 sites");
    if (record_histogram && L > 16) throw ResourceError("state histogram needs L <= 16");
    using K = InitialCondition::Kind;
    if (initial.kind == K::Bernoulli && !(initial.p >= 0.0 && initial.p <= 1.0))
      throw ValidationError("Bernoulli density must lie in [0,1]");
    if (initial.kind == K::Explicit && static_cast<int>(initial.occupation.size()) != L)
      throw ValidationError("explicit configuration has wrong length");
    if (initial.kind == K::FixedNumber) {
      if (!(topology == Topology::Periodic || closed()))
        throw ValidationError("fixed particle number needs a periodic or closed lattice");
      if (initial.count < 0 || initial.count > L) throw ValidationError("particle number outside 0..L");
    }
  }
};

/// Batch-means estimate.
struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline Estimate batch_estimate(std::span<const double> batches) {
  const double n = static_cast<double>(batches.size());
  Estimate e;
  for (double v : batches) e.mean += v;
  e.mean /= n;
  double ss = 0.0;
  for (double v : batches) ss += (v - e.mean) * (v - e.mean);
  e.stderr_ = batches.size() > 1 ? std::sqrt(ss / (n * (n - 1.0))) : 0.0;
  return e;
}

struct Observables {
  std::vector<Estimate> density_profile;
  Estimate mean_density;
  /// Density averaged over the sites inside the bulk margin.
  Estimate bulk_density;
  /// Net rightward flux across bond (k, k+1), k = 1..bonds.
  std::vector<Estimate> bond_currents;
  /// Bond current averaged over bonds inside the bulk margin.
  Estimate bulk_current;
  /// Net flux into the lattice at site 1 and out of it at site L.
  std::array<Estimate, 2> reservoir_fluxes{};
  /// <eta_k (1-eta_{k+1})>, <eta_k (1-eta_{k+1}) eta_{k+2}>,
  /// <eta_k eta_{k+1} (1-eta_{k+2})>, averaged over bulk windows.
  Estimate occupied_empty;
  Estimate occupied_empty_occupied;
  Estimate occupied_occupied_empty;
  std::uint64_t burnin_events = 0;
  /// Events during measurement; burn-in events are counted separately.
  std::uint64_t total_events = 0;
  double t_start = 0.0;
  bool absorbed = false;
  double wall_time = 0.0;
  /// Fraction of measurement time spent in each configuration index.
  std::vector<double> histogram;
};

/// Gillespie direct-method trajectory. Per-bond and per-reservoir rates sit
/// in the leaves of a binary sum tree; after an event only leaves within
/// distance two of the changed sites are recomputed.
class Simulation {
 public:
  Simulation(const SimConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    L_ = cfg_.L;
    periodic_ = cfg_.topology == Topology::Periodic;
    bonds_ = periodic_ ? L_ : L_ - 1;
    leaves_ = bonds_ + (periodic_ ? 0 : 2);
    cap_ = 1;
    while (cap_ < leaves_) cap_ <<= 1;
    tree_.assign(2 * static_cast<std::size_t>(cap_), 0.0);
    right_.assign(static_cast<std::size_t>(bonds_), 0.0);
    left_.assign(static_cast<std::size_t>(bonds_), 0.0);
    occ_ = initial_occupation();
    rebuild();
  }

  int L() const { return L_; }
  double time() const { return time_; }
  double total_rate() const { return tree_[1]; }
  std::span<const std::uint8_t> occupation() const { return occ_; }
  Configuration configuration() const { return {occ_, cfg_.topology}; }

  /// Leaf rates as currently maintained: per bond right+left, then the
  /// left and right reservoir totals.
  std::vector<double> leaf_rates() const {
    return {tree_.begin() + cap_, tree_.begin() + cap_ + leaves_};
  }

  /// Leaf rates recomputed from scratch.
  std::vector<double> recomputed_leaf_rates() const {
    std::vector<double> out(static_cast<std::size_t>(leaves_));
    for (int k = 0; k < bonds_; ++k) {
      const auto [r, l] = detail::bond_rates_raw(occ_, cfg_.topology, k, cfg_.kin, cfg_.variant);
      out[k] = r + l;
    }
    if (!periodic_) {
      out[bonds_] = reservoir_total(Side::Left);
      out[bonds_ + 1] = reservoir_total(Side::Right);
    }
    return out;
  }

  struct StepResult {
    bool absorbed = false;
    Event event{EventKind::RightJump, 0, 0.0};
    double dt = 0.0;
  };

  /// Draws the waiting time and the event, applies it and advances time.
  StepResult step() {
    StepResult res = draw();
    if (res.absorbed) return res;
    apply(res.event);
    time_ += res.dt;
    return res;
  }

  /// Draws waiting time and event without applying them.
  StepResult draw() {
    StepResult res;
    const double total = tree_[1];
    if (!(total > 0.0)) {
      res.absorbed = true;
      return res;
    }
    res.dt = rng_.exponential(total);
    res.event = select(rng_.uniform() * total);
    return res;
  }

  void apply(const Event& e) {
#ifndef NDEBUG
    const int before = count_particles();
#endif
    int lo = 0, hi = 0;  // changed sites, 0-based
    switch (e.kind) {
      case EventKind::RightJump:
      case EventKind::LeftJump: {
        const int a = e.site - 1, b = wrap(e.site);
        std::swap(occ_[a], occ_[b]);
        lo = a;
        hi = a + 1;
        break;
      }
      case EventKind::Insert:
      case EventKind::Remove:
        occ_[e.site - 1] ^= 1u;
        lo = hi = e.site - 1;
        break;
    }
#ifndef NDEBUG
    if (e.kind == EventKind::RightJump || e.kind == EventKind::LeftJump) assert(count_particles() == before);
#endif
    refresh(lo, hi);
  }

  /// Bond windows (k-1..k+2) touching sites lo..hi (0-based) are bonds lo-2..hi+1.
  void refresh(int lo, int hi) {
    for (int j = lo - 2; j <= hi + 1; ++j) {
      if (periodic_) {
        update_bond(((j % L_) + L_) % L_);
      } else if (j >= 0 && j < bonds_) {
        update_bond(j);
      }
    }
    if (!periodic_) {
      if (lo <= 1) set_leaf(bonds_, reservoir_total(Side::Left));
      if (hi >= L_ - 2) set_leaf(bonds_ + 1, reservoir_total(Side::Right));
    }
  }

  Rng& rng() { return rng_; }

 private:
  int wrap(int site0) const { return site0 % L_; }

  int count_particles() const { return static_cast<int>(std::count(occ_.begin(), occ_.end(), 1)); }

  std::vector<std::uint8_t> initial_occupation() {
    using K = InitialCondition::Kind;
    std::vector<std::uint8_t> occ(static_cast<std::size_t>(L_), 0);
    switch (cfg_.initial.kind) {
      case K::Empty: break;
      case K::Full: std::fill(occ.begin(), occ.end(), 1); break;
      case K::Bernoulli:
        for (auto& v : occ) v = rng_.uniform() < cfg_.initial.p ? 1 : 0;
        break;
      case K::Explicit: occ = cfg_.initial.occupation; break;
      case K::FixedNumber: {
        std::vector<int> sites(static_cast<std::size_t>(L_));
        for (int i = 0; i < L_; ++i) sites[i] = i;
        for (int i = L_ - 1; i > 0; --i) std::swap(sites[i], sites[rng_.below(static_cast<std::uint64_t>(i) + 1)]);
        for (int i = 0; i < cfg_.initial.count; ++i) occ[sites[i]] = 1;
        break;
      }
    }
    return occ;
  }

  double reservoir_total(Side side) const {
    const auto& b = *cfg_.boundary;
    const auto [ins, rem] = side == Side::Left ? detail::left_reservoir_local(occ_[0], occ_[1], b)
                                               : detail::right_reservoir_local(occ_[L_ - 2], occ_[L_ - 1], b);
    return ins + rem;
  }

  void update_bond(int k) {
    const auto [r, l] = detail::bond_rates_raw(occ_, cfg_.topology, k, cfg_.kin, cfg_.variant);
    right_[k] = r;
    left_[k] = l;
    set_leaf(k, r + l);
  }

  void set_leaf(int i, double v) {
    std::size_t p = static_cast<std::size_t>(cap_ + i);
    tree_[p] = v;
    for (p >>= 1; p >= 1; p >>= 1) tree_[p] = tree_[2 * p] + tree_[2 * p + 1];
  }

  void rebuild() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (int k = 0; k < bonds_; ++k) {
      const auto [r, l] = detail::bond_rates_raw(occ_, cfg_.topology, k, cfg_.kin, cfg_.variant);
      right_[k] = r;
      left_[k] = l;
      tree_[cap_ + k] = r + l;
    }
    if (!periodic_) {
      tree_[cap_ + bonds_] = reservoir_total(Side::Left);
      tree_[cap_ + bonds_ + 1] = reservoir_total(Side::Right);
    }
    for (int p = cap_ - 1; p >= 1; --p) tree_[p] = tree_[2 * p] + tree_[2 * p + 1];
  }

  Event select(double u) const {
    std::size_t p = 1;
    while (p < static_cast<std::size_t>(cap_)) {
      const double left_sum = tree_[2 * p];
      if (u < left_sum || tree_[2 * p + 1] <= 0.0) {
        p = 2 * p;
      } else {
        u -= left_sum;
        p = 2 * p + 1;
      }
    }
    int leaf = static_cast<int>(p) - cap_;
    // rounding can land on an empty leaf; step back to the nearest live one
    while (leaf > 0 && !(tree_[cap_ + leaf] > 0.0)) --leaf;
    if (leaf < bonds_) {
      // at most one of the two directions is enabled on a bond
      if (right_[leaf] > 0.0) return {EventKind::RightJump, leaf + 1, right_[leaf]};
      return {EventKind::LeftJump, leaf + 1, left_[leaf]};
    }
    const bool left_side = leaf == bonds_;
    const int site = left_side ? 1 : L_;
    const auto& b = *cfg_.boundary;
    const auto [ins, rem] = left_side ? detail::left_reservoir_local(occ_[0], occ_[1], b)
                                      : detail::right_reservoir_local(occ_[L_ - 2], occ_[L_ - 1], b);
    if (ins > 0.0) return {EventKind::Insert, site, ins};
    return {EventKind::Remove, site, rem};
  }

  SimConfig cfg_;
  Rng rng_;
  int L_ = 0, bonds_ = 0, leaves_ = 0, cap_ = 1;
  bool periodic_ = false;
  std::vector<std::uint8_t> occ_;
  std::vector<double> tree_, right_, left_;
  double time_ = 0.0;
};

namespace detail {

// Time integrals of all observables over one measurement window.
class Recorder {
 public:
  Recorder(const SimConfig& cfg, std::span<const std::uint8_t> occ, double t0)
      : L_(cfg.L),
        periodic_(cfg.topology == Topology::Periodic),
        margin_(cfg.resolved_margin()),
        histogram_(cfg.record_histogram) {
    bonds_ = periodic_ ? L_ : L_ - 1;
    // windows k..k+2 fully inside the bulk region
    win_lo_ = margin_;
    win_hi_ = periodic_ ? L_ - 1 : L_ - 1 - margin_ - 2;
    site_int_.assign(static_cast<std::size_t>(L_), 0.0);
    last_.assign(static_cast<std::size_t>(L_), t0);
    jumps_.assign(static_cast<std::size_t>(bonds_), 0);
    if (histogram_) hist_.assign(std::size_t{1} << L_, 0.0);
    begin_batch(occ, t0);
  }

  void begin_batch(std::span<const std::uint8_t> occ, double t) {
    std::fill(site_int_.begin(), site_int_.end(), 0.0);
    std::fill(last_.begin(), last_.end(), t);
    std::fill(jumps_.begin(), jumps_.end(), 0);
    res_ = {0, 0};
    pattern_int_ = {0.0, 0.0, 0.0};
    patterns_ = {0, 0, 0};
    for (int k = win_lo_; k <= win_hi_; ++k) add_window(occ, k, +1);
    batch_start_ = t;
    t_last_ = t;
  }

  // Integrates the current (unchanged) state up to time t.
  void advance(std::span<const std::uint8_t> occ, double t) {
    const double dt = t - t_last_;
    for (int i = 0; i < 3; ++i) pattern_int_[i] += patterns_[i] * dt;
    if (histogram_) hist_[state_index(occ)] += dt;
    t_last_ = t;
  }

  // Call before the event with the old state, then after() with the new one.
  void before(std::span<const std::uint8_t> occ, const Event& e, double t) {
    lo_ = e.site - 1;
    hi_ = (e.kind == EventKind::RightJump || e.kind == EventKind::LeftJump) ? e.site : e.site - 1;
    for (int s = lo_; s <= hi_; ++s) {
      const int i = s % L_;
      site_int_[i] += occ[i] * (t - last_[i]);
      last_[i] = t;
    }
    touch_windows(occ, -1);
    switch (e.kind) {
      case EventKind::RightJump: ++jumps_[e.site - 1]; break;
      case EventKind::LeftJump: --jumps_[e.site - 1]; break;
      case EventKind::Insert: ++(e.site == 1 ? res_[0] : res_[1]); break;
      case EventKind::Remove: --(e.site == 1 ? res_[0] : res_[1]); break;
    }
  }

  void after(std::span<const std::uint8_t> occ) { touch_windows(occ, +1); }

  struct Batch {
    std::vector<double> density;
    std::vector<double> current;
    std::array<double, 2> reservoir{};
    std::array<double, 3> patterns{};
  };

  Batch close_batch(std::span<const std::uint8_t> occ, double t) {
    advance(occ, t);
    const double duration = t - batch_start_;
    Batch b;
    b.density.resize(static_cast<std::size_t>(L_));
    for (int i = 0; i < L_; ++i) {
      site_int_[i] += occ[i] * (t - last_[i]);
      b.density[i] = site_int_[i] / duration;
    }
    b.current.resize(static_cast<std::size_t>(bonds_));
    for (int k = 0; k < bonds_; ++k) b.current[k] = static_cast<double>(jumps_[k]) / duration;
    // reservoir_[1] counts insertions minus removals at site L; flux out is its negative
    b.reservoir = {static_cast<double>(res_[0]) / duration, -static_cast<double>(res_[1]) / duration};
    const double windows = static_cast<double>(win_hi_ - win_lo_ + 1);
    for (int i = 0; i < 3; ++i) b.patterns[i] = pattern_int_[i] / (duration * windows);
    begin_batch(occ, t);
    return b;
  }

  std::vector<double> histogram() const { return hist_; }

 private:
  static std::size_t state_index(std::span<const std::uint8_t> occ) {
    std::size_t idx = 0;
    for (auto v : occ) idx = (idx << 1) | v;
    return idx;
  }

  void touch_windows(std::span<const std::uint8_t> occ, int sign) {
    for (int k = lo_ - 2; k <= hi_; ++k) {
      int kk = k;
      if (periodic_) kk = ((k % L_) + L_) % L_;
      if (kk < win_lo_ || kk > win_hi_) continue;
      add_window(occ, kk, sign);
    }
  }

  void add_window(std::span<const std::uint8_t> occ, int k, int sign) {
    const int a = occ[k % L_], b = occ[(k + 1) % L_], c = occ[(k + 2) % L_];
    patterns_[0] += sign * a * (1 - b);
    patterns_[1] += sign * a * (1 - b) * c;
    patterns_[2] += sign * a * b * (1 - c);
  }

  int L_, bonds_ = 0;
  bool periodic_;
  int margin_;
  bool histogram_;
  int win_lo_ = 0, win_hi_ = 0;
  int lo_ = 0, hi_ = 0;
  std::vector<double> site_int_, last_;
  std::vector<std::int64_t> jumps_;
  std::array<std::int64_t, 2> res_{};
  std::array<std::int64_t, 3> patterns_{};
  std::array<double, 3> pattern_int_{};
  std::vector<double> hist_;
  double batch_start_ = 0.0, t_last_ = 0.0;
};

}  // namespace detail

/// Burn-in followed by a measurement window of length t_measure split into
/// n_batches equal batches. Deterministic given the config.
inline Observables run(const SimConfig& config) {
  const auto wall0 = std::chrono::steady_clock::now();
  Simulation sim(config);
  Observables obs;

  const std::uint64_t min_events = config.resolved_burnin_events();
  bool absorbed = false;
  while (sim.time() < config.t_burnin || obs.burnin_events < min_events) {
    if (sim.step().absorbed) {
      absorbed = true;
      break;
    }
    ++obs.burnin_events;
  }

  const double t0 = sim.time();
  obs.t_start = t0;
  const int nb = config.n_batches;
  const double batch_len = config.t_measure / nb;
  detail::Recorder rec(config, sim.occupation(), t0);
  std::vector<detail::Recorder::Batch> batches;
  batches.reserve(static_cast<std::size_t>(nb));
  std::vector<double> hist_time;

  double t = t0;
  for (int b = 0; b < nb; ++b) {
    const double t_end = t0 + batch_len * (b + 1);
    while (!absorbed) {
      const auto s = sim.draw();
      if (s.absorbed) {
        absorbed = true;
        break;
      }
      if (t + s.dt >= t_end) {
        // the pending event lies beyond this batch; memorylessness lets us
        // discard it and redraw from the boundary
        break;
      }
      t += s.dt;
      rec.advance(sim.occupation(), t);
      rec.before(sim.occupation(), s.event, t);
      sim.apply(s.event);
      rec.after(sim.occupation());
      ++obs.total_events;
    }
    batches.push_back(rec.close_batch(sim.occupation(), t_end));
    t = t_end;
  }
  obs.absorbed = absorbed;

  const int L = config.L;
  const bool periodic = config.topology == Topology::Periodic;
  const int bonds = periodic ? L : L - 1;
  const int margin = config.resolved_margin();
  std::vector<double> col(static_cast<std::size_t>(nb));
  auto estimate = [&](auto&& f) {
    for (int b = 0; b < nb; ++b) col[b] = f(batches[b]);
    return batch_estimate(col);
  };

  obs.density_profile.resize(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) obs.density_profile[i] = estimate([&](const auto& B) { return B.density[i]; });
  obs.mean_density = estimate([&](const auto& B) {
    double s = 0.0;
    for (double v : B.density) s += v;
    return s / L;
  });
  obs.bulk_density = estimate([&](const auto& B) {
    double s = 0.0;
    for (int i = margin; i < L - margin; ++i) s += B.density[i];
    return s / (L - 2 * margin);
  });
  obs.bond_currents.resize(static_cast<std::size_t>(bonds));
  for (int k = 0; k < bonds; ++k) obs.bond_currents[k] = estimate([&](const auto& B) { return B.current[k]; });
  obs.bulk_current = estimate([&](const auto& B) {
    const int hi = periodic ? bonds : bonds - margin;
    double s = 0.0;
    for (int k = margin; k < hi; ++k) s += B.current[k];
    return s / (hi - margin);
  });
  if (!periodic) {
    for (int side = 0; side < 2; ++side)
      obs.reservoir_fluxes[side] = estimate([&](const auto& B) { return B.reservoir[side]; });
  }
  obs.occupied_empty = estimate([](const auto& B) { return B.patterns[0]; });
  obs.occupied_empty_occupied = estimate([](const auto& B) { return B.patterns[1]; });
  obs.occupied_occupied_empty = estimate([](const auto& B) { return B.patterns[2]; });

  if (config.record_histogram) {
    obs.histogram = rec.histogram();
    for (auto& v : obs.histogram) v /= config.t_measure;
  }
  obs.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return obs;
}

}  // namespace kls
