#pragma once

// Subcommands of the kls tool. Everything here is callable in-process via
// run_cli(), which the tests use; tools/kls.cpp is a thin main().

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kls/error.hpp"
#include "kls/figures.hpp"
#include "kls/generator.hpp"
#include "kls/io.hpp"
#include "kls/ising.hpp"
#include "kls/model.hpp"
#include "kls/phase.hpp"
#include "kls/scan.hpp"
#include "kls/simulator.hpp"

namespace kls::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kCertificateFailure = 1, kUsage = 2, kResource = 3, kDegenerate = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using nlohmann::json;

/// Per-invocation state shared by the subcommands.
struct Context {
  std::filesystem::path out_dir;
  unsigned workers = 1;
  std::uint64_t seed = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  json params = json::object();
  std::vector<std::uint64_t> seeds;
  json outputs = json::object();

  void emit(const std::string& name, const std::string& content) {
    io::write_file(out_dir / name, content);
    outputs[name] = io::sha256_hex(content);
  }
};

/// Values shared across subcommands. Optional-ness is tracked through the
/// CLI11 option handles.
struct Options {
  // dynamics
  double r = 1.0, ell = 0.0, kappa = 0.0, lambda = 0.0, eps = 0.0;
  // measure
  double x = 1.0, phi = 0.0, y = 1.0, J = 0.0;
  // reservoirs
  double alpha1 = 0, alpha2 = 0, gamma1 = 0, gamma2 = 0, beta1 = 0, beta2 = 0, delta1 = 0, delta2 = 0;
  double om_m1 = 0, om_m2 = 0, om_p1 = 0, om_p2 = 0;
  std::string variant = "vacuum-extended";
  std::string topology = "periodic";
  // common
  std::uint64_t seed = 1;
  std::string out_dir;
  unsigned workers = 0;
  std::string config;

  // one handle per subcommand that declares the option; only one
  // subcommand is parsed per run so counts can simply be summed
  std::multimap<std::string, CLI::Option*> opt;

  void track(const std::string& name, CLI::Option* o) { opt.emplace(name, o); }

  bool given(const std::string& name) const {
    auto [a, b] = opt.equal_range(name);
    for (; a != b; ++a)
      if (a->second->count() > 0) return true;
    return false;
  }
};

inline void add_common(CLI::App* sub, Options& o) {
  o.track("seed", sub->add_option("--seed", o.seed, "Base seed (64-bit)"));
  o.track("out-dir", sub->add_option("--out-dir", o.out_dir, "Output directory (env KLS_OUT_DIR)"));
  o.track("workers", sub->add_option("--workers", o.workers, "Worker threads (env KLS_WORKERS)"));
  o.track("config", sub->add_option("--config", o.config, "key=value parameter file; flags win on conflict"));
}

inline void add_kinetics(CLI::App* sub, Options& o) {
  o.track("r", sub->add_option("--r", o.r, "Right hopping rate"));
  o.track("ell", sub->add_option("--ell", o.ell, "Left hopping rate"));
  o.track("kappa", sub->add_option("--kappa", o.kappa, "Right kinetic interaction"));
  o.track("lambda", sub->add_option("--lambda", o.lambda, "Left kinetic interaction"));
  o.track("eps", sub->add_option("--eps,--epsilon", o.eps, "Static interaction"));
}

inline void add_fugacity(CLI::App* sub, Options& o) {
  o.track("x", sub->add_option("--x", o.x, "Fugacity parameter x = e^{phi/2}"));
  o.track("phi", sub->add_option("--phi", o.phi, "Chemical potential phi"));
}

inline void add_reservoirs(CLI::App* sub, Options& o) {
  o.track("alpha1", sub->add_option("--alpha1", o.alpha1));
  o.track("alpha2", sub->add_option("--alpha2", o.alpha2));
  o.track("gamma1", sub->add_option("--gamma1", o.gamma1));
  o.track("gamma2", sub->add_option("--gamma2", o.gamma2));
  o.track("beta1", sub->add_option("--beta1", o.beta1));
  o.track("beta2", sub->add_option("--beta2", o.beta2));
  o.track("delta1", sub->add_option("--delta1", o.delta1));
  o.track("delta2", sub->add_option("--delta2", o.delta2));
  o.track("omega-minus1", sub->add_option("--omega-minus1", o.om_m1));
  o.track("omega-minus2", sub->add_option("--omega-minus2", o.om_m2));
  o.track("omega-plus1", sub->add_option("--omega-plus1", o.om_p1));
  o.track("omega-plus2", sub->add_option("--omega-plus2", o.om_p2));
  o.track("boundary-variant", sub->add_option("--boundary-variant", o.variant)
                                  ->check(CLI::IsMember({"vacuum-extended", "as-written"})));
  o.track("topology", sub->add_option("--topology", o.topology)->check(CLI::IsMember({"periodic", "open"})));
}

inline BulkKinetics resolve_kinetics(const Options& o, bool require_r = true) {
  if (require_r && !o.given("r")) throw UsageError("missing --r");
  BulkKinetics k{o.r, o.ell, o.kappa, o.lambda, o.eps};
  k.validate();
  return k;
}

inline std::optional<double> resolve_x(const Options& o) {
  if (o.given("x") && o.given("phi")) throw UsageError("give --x or --phi, not both");
  if (o.given("x")) return o.x;
  if (o.given("phi")) return std::exp(o.phi / 2.0);
  return std::nullopt;
}

inline BoundaryVariant resolve_variant(const Options& o) {
  return o.variant == "as-written" ? BoundaryVariant::AsWritten : BoundaryVariant::VacuumExtended;
}

inline bool explicit_reservoirs(const Options& o) {
  for (auto n : {"alpha1", "alpha2", "gamma1", "gamma2", "beta1", "beta2", "delta1", "delta2"})
    if (o.given(n)) return true;
  return false;
}

inline bool omega_given(const Options& o) {
  for (auto n : {"omega-minus1", "omega-minus2", "omega-plus1", "omega-plus2"})
    if (o.given(n)) return true;
  return false;
}

/// x for an open lattice: explicit, else fixed by the bulk rates, else 1
/// when the bulk condition holds for every x.
inline double open_x(const Options& o, const BulkKinetics& k) {
  if (auto x = resolve_x(o)) return *x;
  if (auto x = fugacity_from_bulk(k)) return *x;
  const auto dc = derived_constants(k, BoundaryRates{}, MeasureParams{1.0, k.interaction_y()});
  if (dc.c1 == 0.0 && dc.c2 == 0.0) return 1.0;
  throw UsageError("bulk rates fix no positive x; pass --x");
}

inline BoundaryRates resolve_reservoirs(const Options& o, const BulkKinetics& k, const MeasureParams& m) {
  if (explicit_reservoirs(o)) {
    if (omega_given(o)) throw UsageError("give reservoir rates or omegas, not both");
    BoundaryRates b{o.alpha1, o.alpha2, o.gamma1, o.gamma2, o.beta1, o.beta2, o.delta1, o.delta2};
    b.validate();
    return b;
  }
  return boundary_rates_from_omegas(k, m, {o.om_m1, o.om_m2, o.om_p1, o.om_p2});
}

inline json to_json(const BulkKinetics& k) {
  return {{"r", k.r}, {"ell", k.ell}, {"kappa", k.kappa}, {"lambda", k.lambda}, {"epsilon", k.epsilon}};
}

inline json to_json(const BoundaryRates& b) {
  return {{"alpha1", b.alpha1}, {"alpha2", b.alpha2}, {"gamma1", b.gamma1}, {"gamma2", b.gamma2},
          {"beta1", b.beta1},   {"beta2", b.beta2},   {"delta1", b.delta1}, {"delta2", b.delta2}};
}

inline Topology resolve_topology(const Options& o) {
  return o.topology == "open" ? Topology::Open : Topology::Periodic;
}

// ---------------------------------------------------------------- exact

struct ExactArgs {
  std::vector<std::string> L{"inf"};
};

inline int cmd_exact(Context& ctx, const Options& o, const ExactArgs& a) {
  const bool ising_mode = o.given("y") || o.given("J");
  if (o.given("y") && o.given("J")) throw UsageError("give --y or --J, not both");
  const auto x = resolve_x(o);
  if (!x) throw UsageError("missing --x (or --phi)");
  std::optional<BulkKinetics> kin;
  double y;
  if (ising_mode) {
    for (auto n : {"r", "ell", "kappa", "lambda", "eps"})
      if (o.given(n)) throw UsageError(std::string("--") + n + " not allowed with --y/--J (pure Ising mode)");
    y = o.given("y") ? o.y : std::exp(-o.J);
  } else {
    kin = resolve_kinetics(o);
    y = kin->interaction_y();
  }
  const MeasureParams m{*x, y};
  m.validate();
  const auto s = spectrum(m);
  ctx.params = {{"mode", ising_mode ? "ising" : "dynamics"}, {"x", m.x}, {"y", m.y}, {"L", a.L}};
  if (kin) ctx.params["kinetics"] = to_json(*kin);

  io::CsvTable t({"L", "rho", "j", "corr_nn", "corr_110", "corr_101", "lambda_max", "lambda_min"});
  std::ostringstream log;
  for (const auto& Ls : a.L) {
    auto& row = t.row();
    if (Ls == "inf") {
      const auto c = correlations_limit(s);
      row << "inf" << c.density;
      if (kin) row << current_limit(*kin, s); else row.empty();
      row << c.occupied_empty << c.occupied_occupied_empty << c.occupied_empty_occupied;
      log << "L=inf rho=" << io::fmt(c.density) << "\n";
    } else {
      long L = 0;
      try {
        std::size_t pos = 0;
        L = std::stol(Ls, &pos);
        if (pos != Ls.size()) throw std::invalid_argument(Ls);
      } catch (const std::exception&) {
        throw UsageError("--L expects integers or 'inf', got '" + Ls + "'");
      }
      if (L < 2) throw UsageError("--L must be >= 2");
      const auto c = correlations_periodic(L, s);
      row << static_cast<long long>(L) << c.density;
      if (kin && L >= 4) row << current_periodic(L, *kin, s); else row.empty();
      row << c.occupied_empty << c.occupied_occupied_empty << c.occupied_empty_occupied;
      log << "L=" << L << " Z=" << io::fmt(partition_periodic(L, s)) << " lnZ=" << io::fmt(log_partition_periodic(L, s))
          << " rho=" << io::fmt(c.density) << "\n";
    }
    row << s.lambda_max << s.lambda_min;
  }
  ctx.emit("exact.csv", t.str());
  ctx.emit("exact.log", log.str());
  *ctx.out << log.str();
  return kOk;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  int L = 6;
};

inline int cmd_verify(Context& ctx, const Options& o, const VerifyArgs& a) {
  if (a.L < 4 || a.L > kMaxGeneratorLength)
    throw ResourceError("verify supports 4 <= L <= " + std::to_string(kMaxGeneratorLength) + ", got " +
                        std::to_string(a.L));
  const auto kin = resolve_kinetics(o);
  const auto topo = resolve_topology(o);
  const auto asserted = resolve_variant(o);
  const double y = kin.interaction_y();
  const double x = topo == Topology::Open ? open_x(o, kin) : resolve_x(o).value_or(1.0);
  const MeasureParams m{x, y};
  m.validate();

  json rep;
  rep["L"] = a.L;
  rep["topology"] = to_string(topo);
  rep["kinetics"] = to_json(kin);
  rep["measure"] = {{"x", x}, {"y", y}};
  json certs = json::array();
  bool all_pass = true;
  auto certify = [&](const std::string& name, double value, double threshold, bool below) {
    const bool pass = below ? value < threshold : value > threshold;
    certs.push_back({{"name", name}, {"value", value}, {"threshold", threshold},
                     {"relation", below ? "<" : ">"}, {"pass", pass}});
    all_pass = all_pass && pass;
  };
  auto max_exit = [](const SparseGenerator& q) {
    double s = 1.0;
    for (std::size_t i = 0; i < q.dimension(); ++i) s = std::max(s, q.exit_rate(i));
    return s;
  };

  if (topo == Topology::Periodic) {
    if (explicit_reservoirs(o) || omega_given(o)) throw UsageError("periodic lattices take no reservoir rates");
    const auto q = build_generator(a.L, topo, kin, std::nullopt);
    const auto mu = ising_measure_vector(a.L, topo, m, true);
    const double scale = max_exit(q);
    const double inv = invariance_residual(q, mu);
    const double db = detailed_balance_residual(q, mu);
    const bool reversible = kin.r == kin.ell && kin.kappa == kin.lambda;
    rep["periodic"] = {{"invariance_residual", inv}, {"detailed_balance_residual", db},
                       {"reversible_expected", reversible}, {"rate_scale", scale}};
    certify("invariance", inv, 1e-12 * scale, true);
    certify(reversible ? "detailed_balance_zero" : "detailed_balance_nonzero", db, 1e-14 * scale, reversible);
  } else {
    const auto b = resolve_reservoirs(o, kin, m);
    rep["reservoirs"] = to_json(b);
    const auto dc = derived_constants(kin, b, m);
    const auto cond = invariance_conditions_check(dc, m);
    rep["conditions"] = {{"satisfied", cond.satisfied}, {"residuals", cond.residuals}, {"tolerance", cond.tolerance},
                         {"constants",
                          {{"c0", dc.c0}, {"c1", dc.c1}, {"c2", dc.c2}, {"c1_minus", dc.c1m},
                           {"c2_minus", dc.c2m}, {"c1_plus", dc.c1p}, {"c2_plus", dc.c2p}}}};
    rep["asserted_variant"] = to_string(asserted);
    const auto mu = ising_measure_vector(a.L, topo, m, true);
    json variants = json::object();
    for (auto v : {BoundaryVariant::VacuumExtended, BoundaryVariant::AsWritten}) {
      const auto q = build_generator(a.L, topo, kin, b, v);
      const double scale = max_exit(q);
      json vr;
      vr["rate_scale"] = scale;
      const double inv = invariance_residual(q, mu);
      vr["invariance_residual"] = inv;
      std::optional<double> dist;
      try {
        const auto pi = stationary_distribution(q);
        double d = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i) d = std::max(d, std::abs(pi[i] - mu[i]));
        dist = d;
        vr["stationary_distance"] = d;
      } catch (const ReducibleChainError& e) {
        vr["stationary_distance"] = nullptr;
        vr["closed_classes"] = e.closed_classes.size();
      }
      const double db = detailed_balance_residual(q, mu);
      vr["detailed_balance_residual"] = db;
      std::optional<LemmaResiduals> lr;
      if (a.L >= 5 && a.L <= 12) {
        lr = lemma_identity_residuals(a.L, kin, b, m, v);
        vr["lemma"] = {{"bulk_sum", lr->bulk_sum}, {"h_minus", lr->h_minus}, {"h_plus", lr->h_plus},
                       {"b_minus", lr->b_minus}, {"b_plus", lr->b_plus}};
      } else {
        vr["lemma"] = nullptr;
      }
      variants[to_string(v)] = vr;
      if (v != asserted) continue;
      certify("invariance", inv, 1e-12 * scale, true);
      if (dist) certify("stationary_equals_ising", *dist, 1e-10, true);
      double cmax = 0.0;
      for (double c : {dc.c1m, dc.c2m, dc.c1p, dc.c2p}) cmax = std::max(cmax, std::abs(c));
      const bool reversible =
          cond.satisfied && kin.r == kin.ell && kin.kappa == kin.lambda && cmax <= cond.tolerance;
      rep["reversible_expected"] = reversible;
      certify(reversible ? "detailed_balance_zero" : "detailed_balance_nonzero", db, 1e-14 * scale, reversible);
      if (lr) {
        certify("lemma_bulk_sum", lr->bulk_sum, 1e-12 * scale, true);
        certify("lemma_h_minus", lr->h_minus, 1e-12 * scale, true);
        certify("lemma_h_plus", lr->h_plus, 1e-12 * scale, true);
        certify("lemma_b_minus", lr->b_minus, 1e-12 * scale, true);
        certify("lemma_b_plus", lr->b_plus, 1e-12 * scale, true);
      }
    }
    rep["variants"] = variants;
  }
  rep["certificates"] = certs;
  rep["pass"] = all_pass;
  ctx.params = {{"L", a.L}, {"topology", to_string(topo)}, {"kinetics", to_json(kin)}, {"x", x}};
  ctx.emit("verify.json", rep.dump(2) + "\n");
  for (const auto& c : certs)
    *ctx.out << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " "
             << io::fmt(c["value"].get<double>()) << " " << c["relation"].get<std::string>() << " "
             << io::fmt(c["threshold"].get<double>()) << "\n";
  return all_pass ? kOk : kCertificateFailure;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  int L = 64;
  std::string initial = "empty";
  double t_burnin = 100.0;
  double t_measure = 1000.0;
  std::uint64_t burnin_events = 0;
  int batches = 16;
  int margin = -1;
  int replicas = 1;
  bool histogram = false;
  CLI::Option* burnin_events_opt = nullptr;
};

inline InitialCondition parse_initial(const std::string& s, int L, Topology topo) {
  if (s == "empty") return InitialCondition::empty();
  if (s == "full") return InitialCondition::full();
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("unknown --initial '" + s + "'");
  const std::string kind = s.substr(0, colon), val = s.substr(colon + 1);
  try {
    if (kind == "bernoulli") return InitialCondition::bernoulli(std::stod(val));
    if (kind == "fixed") return InitialCondition::fixed_number(std::stoi(val));
    if (kind == "config") {
      const auto cfg = Configuration::from_string(val, topo);
      if (cfg.size() != L) throw UsageError("--initial config length differs from --L");
      return InitialCondition::explicit_config(cfg);
    }
  } catch (const std::invalid_argument&) {
    throw UsageError("cannot parse --initial '" + s + "'");
  }
  throw UsageError("unknown --initial kind '" + kind + "'");
}

inline Estimate combine(const std::vector<Estimate>& e) {
  Estimate out;
  double var = 0.0;
  for (const auto& v : e) {
    out.mean += v.mean;
    var += v.stderr_ * v.stderr_;
  }
  const double n = static_cast<double>(e.size());
  out.mean /= n;
  out.stderr_ = std::sqrt(var) / n;
  return out;
}

inline int cmd_simulate(Context& ctx, const Options& o, const SimulateArgs& a) {
  const auto kin = resolve_kinetics(o);
  const auto topo = resolve_topology(o);
  if (a.replicas < 1) throw UsageError("--replicas must be >= 1");
  SimConfig base;
  base.L = a.L;
  base.topology = topo;
  base.kin = kin;
  base.variant = resolve_variant(o);
  json extra;
  if (topo == Topology::Open) {
    const double x = explicit_reservoirs(o) ? resolve_x(o).value_or(1.0) : open_x(o, kin);
    const MeasureParams m{x, kin.interaction_y()};
    base.boundary = resolve_reservoirs(o, kin, m);
    extra["x"] = x;
    extra["reservoirs"] = to_json(*base.boundary);
  } else if (explicit_reservoirs(o) || omega_given(o)) {
    throw UsageError("periodic lattices take no reservoir rates");
  }
  if (a.L < Configuration::kMinLength) throw UsageError("--L must be >= 4");
  base.initial = parse_initial(a.initial, a.L, topo);
  base.t_burnin = a.t_burnin;
  base.t_measure = a.t_measure;
  if (a.burnin_events_opt && a.burnin_events_opt->count() > 0) base.burnin_events = a.burnin_events;
  base.n_batches = a.batches;
  if (a.margin >= 0) base.bulk_margin = a.margin;
  base.record_histogram = a.histogram;
  try {
    base.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }

  std::vector<SimConfig> cfgs(static_cast<std::size_t>(a.replicas), base);
  for (int i = 0; i < a.replicas; ++i) {
    cfgs[i].seed = a.replicas == 1 ? ctx.seed : replica_seed(ctx.seed, static_cast<std::uint64_t>(i));
    ctx.seeds.push_back(cfgs[i].seed);
  }
  std::vector<Observables> obs(cfgs.size());
  io::parallel_for(cfgs.size(), ctx.workers, [&](std::size_t i) { obs[i] = run(cfgs[i]); });

  auto gather = [&](auto&& f) {
    std::vector<Estimate> v;
    for (const auto& ob : obs) v.push_back(f(ob));
    return combine(v);
  };
  io::CsvTable prof({"site", "density", "stderr"});
  for (int i = 0; i < a.L; ++i) {
    const auto e = gather([&](const Observables& ob) { return ob.density_profile[i]; });
    prof.row() << i + 1 << e.mean << e.stderr_;
  }
  io::CsvTable cur({"bond", "j", "stderr"});
  const int bonds = static_cast<int>(obs[0].bond_currents.size());
  for (int k = 0; k < bonds; ++k) {
    const auto e = gather([&](const Observables& ob) { return ob.bond_currents[k]; });
    cur.row() << k + 1 << e.mean << e.stderr_;
  }
  io::CsvTable sum({"quantity", "value", "stderr"});
  auto put = [&](const char* name, const Estimate& e) { sum.row() << name << e.mean << e.stderr_; };
  put("mean_density", gather([](const Observables& ob) { return ob.mean_density; }));
  put("bulk_density", gather([](const Observables& ob) { return ob.bulk_density; }));
  put("bulk_current", gather([](const Observables& ob) { return ob.bulk_current; }));
  if (topo == Topology::Open) {
    put("flux_in_left", gather([](const Observables& ob) { return ob.reservoir_fluxes[0]; }));
    put("flux_out_right", gather([](const Observables& ob) { return ob.reservoir_fluxes[1]; }));
  }
  put("corr_nn", gather([](const Observables& ob) { return ob.occupied_empty; }));
  put("corr_101", gather([](const Observables& ob) { return ob.occupied_empty_occupied; }));
  put("corr_110", gather([](const Observables& ob) { return ob.occupied_occupied_empty; }));
  std::uint64_t events = 0;
  bool absorbed = false;
  for (const auto& ob : obs) {
    events += ob.total_events;
    absorbed = absorbed || ob.absorbed;
  }
  sum.row() << "events" << static_cast<double>(events) << 0.0;
  sum.row() << "absorbed" << (absorbed ? 1.0 : 0.0) << 0.0;

  ctx.params = {{"L", a.L},
                {"topology", to_string(topo)},
                {"kinetics", to_json(kin)},
                {"boundary_variant", to_string(base.variant)},
                {"initial", a.initial},
                {"t_burnin", a.t_burnin},
                {"t_measure", a.t_measure},
                {"burnin_events", base.resolved_burnin_events()},
                {"n_batches", a.batches},
                {"bulk_margin", base.resolved_margin()},
                {"replicas", a.replicas}};
  ctx.params.update(extra);
  ctx.emit("profile.csv", prof.str());
  ctx.emit("currents.csv", cur.str());
  ctx.emit("summary.csv", sum.str());
  if (a.histogram) {
    io::CsvTable h({"state", "configuration", "probability"});
    const auto n = obs[0].histogram.size();
    for (std::size_t s = 0; s < n; ++s) {
      double p = 0.0;
      for (const auto& ob : obs) p += ob.histogram[s];
      p /= static_cast<double>(obs.size());
      h.row() << static_cast<std::uint64_t>(s)
              << Configuration::from_index(s, a.L, topo).to_string() << p;
    }
    ctx.emit("histogram.csv", h.str());
  }
  const auto bc = gather([](const Observables& ob) { return ob.bulk_current; });
  const auto bd = gather([](const Observables& ob) { return ob.bulk_density; });
  *ctx.out << "events=" << events << " bulk_density=" << io::fmt(bd.mean) << " +- " << io::fmt(bd.stderr_)
           << " bulk_current=" << io::fmt(bc.mean) << " +- " << io::fmt(bc.stderr_) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- phases

struct PhasesArgs {
  int points = 400;
  int grid = 50;
  double x_min = 1e-4;
  double x_max = 1e4;
};

inline int cmd_phases(Context& ctx, const Options& o, const PhasesArgs& a) {
  if (a.grid < 2) throw UsageError("--grid must be >= 2");
  if (a.points < 100) throw UsageError("--points must be >= 100");
  const auto kin = resolve_kinetics(o);
  const auto curve = build_curve(kin, a.points, a.x_min, a.x_max);
  const auto ext = extrema(curve);
  const auto zeros = zero_crossing(curve);

  PhaseGrid g;
  g.n = a.grid;
  g.rho = grid_densities(a.grid);
  g.cells.resize(static_cast<std::size_t>(g.n) * g.n);
  io::parallel_for(static_cast<std::size_t>(g.n), ctx.workers,
                   [&](std::size_t i) { classify_row(g, static_cast<int>(i), curve, ext); });
  const auto line = coexistence_line(g, curve);

  io::CsvTable c({"x", "rho", "j"});
  for (const auto& s : curve.samples()) c.row() << s.x << s.rho << s.j;
  io::CsvTable gt({"rho_minus", "rho_plus", "phase", "bulk_rho", "bulk_j", "uphill"});
  for (const auto& cell : g.cells)
    gt.row() << cell.rho_minus << cell.rho_plus << to_string(cell.label.phase) << cell.label.bulk_density
             << cell.label.bulk_current << cell.uphill;
  io::CsvTable lt({"rho_minus", "rho_plus"});
  for (const auto& [rm, rp] : line) lt.row() << rm << rp;
  io::CsvTable ft({"kind", "rho", "j"});
  for (double r : zeros.rho) ft.row() << "zero" << r << 0.0;
  for (const auto& e : ext) ft.row() << to_string(e.kind) << e.rho << e.j;

  ctx.params = {{"kinetics", to_json(kin)}, {"points", a.points}, {"grid", a.grid},
                {"x_min", a.x_min},         {"x_max", a.x_max}};
  ctx.emit("curve.csv", c.str());
  ctx.emit("grid.csv", gt.str());
  ctx.emit("coexistence.csv", lt.str());
  ctx.emit("features.csv", ft.str());
  std::map<std::string, int> counts;
  for (const auto& cell : g.cells) ++counts[to_string(cell.label.phase)];
  for (const auto& [k, v] : counts) *ctx.out << k << "=" << v << " ";
  *ctx.out << "extrema=" << ext.size() << " zero_crossings=" << zeros.rho.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string preset;
  std::vector<std::string> pairs;
  int points = 400;
  bool simulate = false;
  int sim_points = 8;
  int L_open = 64;
  int L_periodic = 256;
  double t_burnin = 200.0;
  double t_measure = 2000.0;
  int batches = 16;
};

inline std::vector<std::pair<double, double>> parse_pairs(const std::vector<std::string>& items) {
  std::vector<std::pair<double, double>> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw UsageError("pair '" + tok + "' is not r:kappa");
      try {
        out.emplace_back(std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
      } catch (const std::exception&) {
        throw UsageError("cannot parse pair '" + tok + "'");
      }
    }
  }
  return out;
}

inline int cmd_sweep(Context& ctx, const Options& o, const SweepArgs& a) {
  CurveFamily fam;
  if (!a.preset.empty()) {
    try {
      fam = curve_family(a.preset);
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  } else {
    fam.name = "custom";
  }
  if (o.given("ell")) fam.ell = o.ell;
  if (o.given("lambda")) fam.lambda = o.lambda;
  if (o.given("eps")) fam.epsilon = o.eps;
  if (!a.pairs.empty()) fam.r_kappa = parse_pairs(a.pairs);
  if (fam.r_kappa.empty()) throw UsageError("no (r,kappa) pairs: pass --pairs r:kappa,... or --preset");
  if (a.points < 100) throw UsageError("--points must be >= 100");

  const std::size_t n = fam.r_kappa.size();
  std::vector<std::optional<CurrentDensityCurve>> curves(n);
  io::parallel_for(n, ctx.workers, [&](std::size_t i) {
    const auto k = fam.member(i);
    k.validate();
    curves[i] = build_curve(k, a.points);
  });

  io::CsvTable summary({"curve", "r", "kappa", "j_at_half", "zero_crossings", "maxima", "minima"});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = *curves[i];
    io::CsvTable t({"rho", "j"});
    for (const auto& s : c.samples()) t.row() << s.rho << s.j;
    ctx.emit("curve_" + std::to_string(i + 1) + ".csv", t.str());
    const auto ext = extrema(c);
    int nmax = 0, nmin = 0;
    for (const auto& e : ext) (e.kind == ExtremumKind::Max ? nmax : nmin)++;
    summary.row() << static_cast<int>(i + 1) << fam.r_kappa[i].first << fam.r_kappa[i].second << c.current_at(0.5)
                  << static_cast<int>(zero_crossing(c).rho.size()) << nmax << nmin;
  }
  ctx.emit("sweep.csv", summary.str());

  if (a.simulate) {
    if (a.sim_points < 1) throw UsageError("--sim-points must be >= 1");
    ScanSettings st;
    st.L_open = a.L_open;
    st.L_periodic = a.L_periodic;
    st.t_burnin = a.t_burnin;
    st.t_measure = a.t_measure;
    st.n_batches = a.batches;
    st.seed = ctx.seed;
    struct Job {
      std::size_t curve;
      double x;
      std::size_t index;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < n; ++i)
      for (int p = 0; p < a.sim_points; ++p) {
        const double target = (p + 0.5) / a.sim_points;
        jobs.push_back({i, curves[i]->x_at(target), jobs.size()});
      }
    std::vector<ScanPoint> pts(jobs.size());
    std::vector<double> j_at_rho(jobs.size());
    io::parallel_for(jobs.size(), ctx.workers, [&](std::size_t q) {
      const auto& jb = jobs[q];
      const auto kin = fam.member(jb.curve);
      ScanPoint p;
      p.x = jb.x;
      const auto cfg = scan_config(kin, jb.x, jb.index, st, p.mode);
      const auto s = spectrum({jb.x, kin.interaction_y()});
      p.rho_exact = s.rho();
      p.j_exact = current_limit(kin, s);
      const auto ob = run(cfg);
      p.rho = ob.bulk_density;
      p.j = ob.bulk_current;
      pts[q] = p;
      const double r = std::clamp(p.rho.mean, 1e-12, 1.0 - 1e-12);
      j_at_rho[q] = curves[jb.curve]->current_at(r);
    });
    for (const auto& jb : jobs) ctx.seeds.push_back(replica_seed(st.seed, jb.index));
    for (std::size_t i = 0; i < n; ++i) {
      io::CsvTable t({"x", "mode", "rho", "rho_stderr", "j", "j_stderr", "j_exact_at_rho"});
      for (std::size_t q = 0; q < jobs.size(); ++q) {
        if (jobs[q].curve != i) continue;
        const auto& p = pts[q];
        t.row() << p.x << to_string(p.mode) << p.rho.mean << p.rho.stderr_ << p.j.mean << p.j.stderr_ << j_at_rho[q];
      }
      ctx.emit("sim_" + std::to_string(i + 1) + ".csv", t.str());
    }
  }

  json pairs = json::array();
  for (const auto& [r, k] : fam.r_kappa) pairs.push_back({r, k});
  ctx.params = {{"family", fam.name}, {"ell", fam.ell},   {"lambda", fam.lambda},      {"epsilon", fam.epsilon},
                {"pairs", pairs},     {"points", a.points}, {"simulate", a.simulate}, {"sim_points", a.sim_points},
                {"L_open", a.L_open}, {"L_periodic", a.L_periodic}, {"t_burnin", a.t_burnin},
                {"t_measure", a.t_measure}, {"n_batches", a.batches}};
  *ctx.out << "curves=" << n << "\n";
  return kOk;
}

// ---------------------------------------------------------------- driver

/// Reads key=value lines ('#' starts a comment) into --key=value arguments.
inline std::vector<std::string> config_arguments(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw UsageError("cannot read config file " + p.string());
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(f, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(p.string() + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "epsilon") key = "eps";
    out.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  return out;
}

/// Inserts config-file arguments right after the subcommand so that later
/// command-line flags override them.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.size() < 2) return args;
  auto extra = config_arguments(*path);
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

inline unsigned resolve_workers(const Options& o) {
  if (o.given("workers")) return std::max(1u, o.workers);
  if (const char* env = std::getenv("KLS_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("KLS_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline std::filesystem::path resolve_out_dir(const Options& o) {
  if (o.given("out-dir")) return o.out_dir;
  if (const char* env = std::getenv("KLS_OUT_DIR")) return env;
  return ".";
}

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized KLS exclusion process: exact evaluation, certification, simulation, phases", "kls"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Options o;
  ExactArgs ea;
  VerifyArgs va;
  SimulateArgs sa;
  PhasesArgs pa;
  SweepArgs wa;

  auto* exact = app.add_subcommand("exact", "Transfer-matrix density, current and correlations");
  add_common(exact, o);
  add_kinetics(exact, o);
  add_fugacity(exact, o);
  o.track("y", exact->add_option("--y", o.y, "Interaction y = e^{-J} (pure Ising mode)"));
  o.track("J", exact->add_option("--J", o.J, "Coupling J (pure Ising mode)"));
  exact->add_option("--L", ea.L, "Ring lengths or 'inf'")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  auto* verify = app.add_subcommand("verify", "Certify invariance, reversibility and block identities");
  add_common(verify, o);
  add_kinetics(verify, o);
  add_fugacity(verify, o);
  add_reservoirs(verify, o);
  verify->add_option("--L", va.L, "Lattice length (4..14)");

  auto* simulate = app.add_subcommand("simulate", "Continuous-time Monte Carlo");
  add_common(simulate, o);
  add_kinetics(simulate, o);
  add_fugacity(simulate, o);
  add_reservoirs(simulate, o);
  simulate->add_option("--L", sa.L, "Lattice length");
  simulate->add_option("--initial", sa.initial, "empty | full | bernoulli:p | fixed:N | config:0101...");
  simulate->add_option("--t-burnin", sa.t_burnin, "Minimum burn-in time");
  simulate->add_option("--t-measure", sa.t_measure, "Measurement time");
  sa.burnin_events_opt = simulate->add_option("--burnin-events", sa.burnin_events,
                                              "Minimum burn-in events (default max(10 L^2, 1e6))");
  simulate->add_option("--batches", sa.batches, "Batches for error bars (>= 8)");
  simulate->add_option("--margin", sa.margin, "Sites excluded at each end for bulk averages");
  simulate->add_option("--replicas", sa.replicas, "Independent replicas");
  simulate->add_flag("--histogram", sa.histogram, "Record the configuration histogram (L <= 16)");

  auto* phases = app.add_subcommand("phases", "Current-density curve and boundary phase diagram");
  add_common(phases, o);
  add_kinetics(phases, o);
  phases->add_option("--points", pa.points, "Curve samples (>= 100)");
  phases->add_option("--grid", pa.grid, "Grid size n (n x n, >= 2)");
  phases->add_option("--x-min", pa.x_min);
  phases->add_option("--x-max", pa.x_max);

  auto* sweep = app.add_subcommand("sweep", "Families of current-density curves");
  add_common(sweep, o);
  add_kinetics(sweep, o);
  sweep->add_option("--preset", wa.preset, "fig1 | fig2 | fig3");
  sweep->add_option("--pairs", wa.pairs, "r:kappa,r:kappa,...")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  sweep->add_option("--points", wa.points, "Curve samples (>= 100)");
  sweep->add_flag("--simulate", wa.simulate, "Add Monte Carlo points");
  sweep->add_option("--sim-points", wa.sim_points, "Monte Carlo points per curve");
  sweep->add_option("--L-open", wa.L_open);
  sweep->add_option("--L-periodic", wa.L_periodic);
  sweep->add_option("--t-burnin", wa.t_burnin);
  sweep->add_option("--t-measure", wa.t_measure);
  sweep->add_option("--batches", wa.batches);

  const auto started = io::utc_timestamp();
  std::string command;
  try {
    args = expand_config(std::move(args));
    std::vector<std::string> rev(args.rbegin(), args.rend());
    rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  int code = kOk;
  try {
    ctx.seed = o.seed;
    ctx.workers = resolve_workers(o);
    ctx.out_dir = resolve_out_dir(o);
    std::filesystem::create_directories(ctx.out_dir);
    if (*exact) {
      command = "exact";
      code = cmd_exact(ctx, o, ea);
    } else if (*verify) {
      command = "verify";
      code = cmd_verify(ctx, o, va);
    } else if (*simulate) {
      command = "simulate";
      code = cmd_simulate(ctx, o, sa);
    } else if (*phases) {
      command = "phases";
      code = cmd_phases(ctx, o, pa);
    } else if (*sweep) {
      command = "sweep";
      code = cmd_sweep(ctx, o, wa);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "invalid parameters: " << e.what() << "\n";
    return kUsage;
  } catch (const ResourceError& e) {
    err << "resource limit: " << e.what() << "\n";
    return kResource;
  } catch (const DegenerateError& e) {
    err << "degenerate model: " << e.what() << "\n";
    return kDegenerate;
  } catch (const ReducibleChainError& e) {
    err << "degenerate model: " << e.what() << "\n";
    return kDegenerate;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kCertificateFailure;
  }

  json manifest = {{"command", command},
                   {"tool_version", kVersion},
                   {"seed", ctx.seed},
                   {"seeds", ctx.seeds},
                   {"workers", ctx.workers},
                   {"parameters", ctx.params},
                   {"arguments", std::vector<std::string>(args.begin() + 1, args.end())},
                   {"started", started},
                   {"finished", io::utc_timestamp()},
                   {"exit_code", code},
                   {"outputs", ctx.outputs}};
  io::write_file(ctx.out_dir / (command + "_manifest.json"), manifest.dump(2) + "\n");
  return code;
}

inline int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace kls::cli
