#include <gtest/gtest.h>

#include <random>

#include "kls/generator.hpp"
#include "kls/ising.hpp"
#include "oracles.hpp"

using namespace kls;

namespace {

BulkKinetics random_kinetics(std::mt19937_64& g) {
  return {oracle::uniform(g, 0.1, 3.0), oracle::uniform(g, 0.1, 3.0), oracle::uniform(g, -0.9, 0.9),
          oracle::uniform(g, -0.9, 0.9), oracle::uniform(g, -0.9, 0.9)};
}

// Dense rate matrix in oracle indexing, built from the pictorial table with
// empty virtual sites 0 and L+1 on open lattices.
std::vector<std::vector<double>> oracle_generator(int L, bool open, const BulkKinetics& k, const BoundaryRates& b) {
  const oracle::Kin ok{k.r, k.ell, k.kappa, k.lambda, k.epsilon};
  const std::size_t n = std::size_t{1} << L;
  std::vector<std::vector<double>> q(n, std::vector<double>(n, 0.0));
  for (std::uint64_t s = 0; s < n; ++s) {
    auto at = [&](int site0) {
      if (open) return site0 < 0 || site0 >= L ? 0 : oracle::bit(s, site0);
      return oracle::bit(s, ((site0 % L) + L) % L);
    };
    const int bonds = open ? L - 1 : L;
    for (int k0 = 0; k0 < bonds; ++k0) {
      const int a = at(k0 - 1), bb = at(k0), c = at(k0 + 1), d = at(k0 + 2);
      const double w = oracle::right_rate(a, bb, c, d, ok) + oracle::left_rate(a, bb, c, d, ok);
      const std::uint64_t t = s ^ (1ull << k0) ^ (1ull << ((k0 + 1) % L));
      if (w > 0) q[s][t] += w;
    }
    if (open) {
      const int n1 = at(0), n2 = at(1), nl = at(L - 1), nl1 = at(L - 2);
      const double left = n1 ? (n2 ? b.gamma2 : b.gamma1) : (n2 ? b.alpha2 : b.alpha1);
      const double right = nl ? (nl1 ? b.beta2 : b.beta1) : (nl1 ? b.delta2 : b.delta1);
      q[s][s ^ 1ull] += left;
      q[s][s ^ (1ull << (L - 1))] += right;
    }
  }
  return q;
}

double max_exit(const SparseGenerator& q) {
  double m = 1.0;
  for (std::size_t i = 0; i < q.dimension(); ++i) m = std::max(m, q.exit_rate(i));
  return m;
}

}  // namespace

TEST(Generator, MatchesIndependentAssembly) {
  std::mt19937_64 g(21);
  for (int t = 0; t < 10; ++t) {
    const auto kin = random_kinetics(g);
    BoundaryRates b;
    for (double* v : {&b.alpha1, &b.alpha2, &b.gamma1, &b.gamma2, &b.beta1, &b.beta2, &b.delta1, &b.delta2})
      *v = oracle::uniform(g, 0, 2);
    for (bool open : {false, true}) {
      const int L = 6;
      const auto q = open ? build_generator(L, Topology::Open, kin, b) : build_generator(L, Topology::Periodic, kin);
      const auto ref = oracle_generator(L, open, kin, b);
      for (std::uint64_t a = 0; a < ref.size(); ++a)
        for (std::uint64_t c = 0; c < ref.size(); ++c) {
          if (a == c) continue;
          EXPECT_NEAR(q.rate(oracle::library_index(a, L), oracle::library_index(c, L)), ref[a][c], 1e-14);
        }
    }
  }
}

TEST(Generator, RowsSumToZero) {
  std::mt19937_64 g(22);
  const auto kin = random_kinetics(g);
  const auto q = build_generator(8, Topology::Open, kin, BoundaryRates{0.3, 0.2, 0.4, 0.1, 0.7, 0.6, 0.5, 0.9});
  for (std::size_t i = 0; i < q.dimension(); ++i) {
    double s = q.rate(i, i);
    for (const auto& t : q.row(i)) {
      EXPECT_GE(t.rate, 0.0);
      s += t.rate;
    }
    EXPECT_NEAR(s, 0.0, 1e-14);
  }
}

TEST(Generator, TasepRingRow) {
  const auto q = build_generator(4, Topology::Periodic, {1, 0, 0, 0, 0});
  const auto idx = Configuration::from_string("1010", Topology::Periodic).index();
  ASSERT_EQ(q.row(idx).size(), 2u);
  for (const auto& t : q.row(idx)) EXPECT_DOUBLE_EQ(t.rate, 1.0);
}

TEST(Generator, ClosedBoundariesConserveParticles) {
  const auto q = build_generator(6, Topology::Open, {1, 0.5, 0.2, -0.3, 0.1}, BoundaryRates{});
  for (std::size_t i = 0; i < q.dimension(); ++i)
    for (const auto& t : q.row(i)) EXPECT_EQ(std::popcount(i), std::popcount(static_cast<std::size_t>(t.target)));
}

TEST(Generator, EmptyOpenRowHasTwoInsertions) {
  BoundaryRates b{0.3, 0.2, 0.4, 0.1, 0.7, 0.6, 0.5, 0.9};
  const auto q = build_generator(5, Topology::Open, {1, 0.5, 0.2, -0.3, 0.1}, b);
  const auto& row = q.row(0);
  ASSERT_EQ(row.size(), 2u);
  EXPECT_DOUBLE_EQ(q.rate(0, Configuration::from_string("10000", Topology::Open).index()), 0.3);
  EXPECT_DOUBLE_EQ(q.rate(0, Configuration::from_string("00001", Topology::Open).index()), 0.5);
}

TEST(Generator, LengthCap) {
  EXPECT_THROW(build_generator(15, Topology::Periodic, {}), ResourceError);
  EXPECT_THROW(build_generator(3, Topology::Periodic, {}), ResourceError);
  EXPECT_THROW(build_generator(6, Topology::Open, {}), ValidationError);
}

TEST(MeasureVector, Examples) {
  const auto u = ising_measure_vector(5, Topology::Periodic, {1.0, 1.0}, true);
  for (double v : u) EXPECT_NEAR(v, 1.0 / 32, 1e-16);
  const MeasureParams m{1.4, 0.3};
  const auto s = spectrum(m);
  for (int L : {4, 7, 10}) {
    const auto p = ising_measure_vector(L, Topology::Periodic, m);
    const auto o = ising_measure_vector(L, Topology::Open, m);
    double zp = 0, zo = 0;
    for (double v : p) zp += v;
    for (double v : o) zo += v;
    EXPECT_LE(oracle::rel_err(zp, partition_periodic(L, s)), 1e-12);
    EXPECT_LE(oracle::rel_err(zo, partition_open(L, s, BoundaryFields::uniform(m))), 1e-12);
  }
  const auto p4 = ising_measure_vector(4, Topology::Periodic, m);
  EXPECT_DOUBLE_EQ(p4[0b0000], 1.0);
  EXPECT_NEAR(p4[0b1111], std::pow(0.3, 4) * std::pow(1.4, 8), 1e-14);
  EXPECT_NEAR(p4[0b1010], std::pow(1.4, 4), 1e-14);
}

TEST(Stationary, PeriodicInvarianceForAllRates) {
  std::mt19937_64 g(23);
  for (int t = 0; t < 20; ++t) {
    const auto kin = random_kinetics(g);
    const auto m = MeasureParams::from_epsilon(oracle::log_uniform(g, 0.3, 3), kin.epsilon);
    for (int L : {4, 6, 8}) {
      const auto q = build_generator(L, Topology::Periodic, kin);
      EXPECT_LT(invariance_residual(q, ising_measure_vector(L, Topology::Periodic, m)), 1e-12 * max_exit(q));
    }
  }
}

TEST(Stationary, OpenTheoremConsistentRates) {
  std::mt19937_64 g(24);
  int checked = 0;
  while (checked < 20) {
    const auto kin = random_kinetics(g);
    const auto x = fugacity_from_bulk(kin);
    if (!x || *x < 0.2 || *x > 5) continue;
    const MeasureParams m{*x, kin.interaction_y()};
    const double lo = -std::min(kin.right_base(), kin.left_base());
    const BoundaryOmegas w{lo + oracle::uniform(g, 0.05, 1), lo + oracle::uniform(g, 0.05, 1),
                           lo + oracle::uniform(g, 0.05, 1), lo + oracle::uniform(g, 0.05, 1)};
    const auto b = boundary_rates_from_omegas(kin, m, w);
    for (int L : {5, 6, 8}) {
      const auto q = build_generator(L, Topology::Open, kin, b);
      const auto mu = ising_measure_vector(L, Topology::Open, m, true);
      EXPECT_LT(invariance_residual(q, mu), 1e-12 * max_exit(q));
      const auto pi = stationary_distribution(q);
      double d = 0;
      for (std::size_t i = 0; i < pi.size(); ++i) d = std::max(d, std::abs(pi[i] - mu[i]));
      EXPECT_LT(d, 1e-10);
    }
    ++checked;
  }
}

TEST(Stationary, AsWrittenRightBondBreaksInvariance) {
  const BulkKinetics kin{0.851444, 0.5, 0.3, 0.6, 0.4};
  const MeasureParams m{*fugacity_from_bulk(kin), kin.interaction_y()};
  const auto b = boundary_rates_from_omegas(kin, m, {});
  const auto q = build_generator(6, Topology::Open, kin, b, BoundaryVariant::AsWritten);
  EXPECT_GT(invariance_residual(q, ising_measure_vector(6, Topology::Open, m)), 1e-3);
}

TEST(Stationary, PerturbationGrowsLinearly) {
  const BulkKinetics kin{0.851444, 0.5, 0.3, 0.6, 0.4};
  const MeasureParams m{*fugacity_from_bulk(kin), kin.interaction_y()};
  const auto mu = ising_measure_vector(6, Topology::Open, m);
  std::vector<double> res;
  for (double h : {1e-3, 2e-3, 4e-3}) {
    auto b = boundary_rates_from_omegas(kin, m, {});
    b.alpha1 += h;
    res.push_back(invariance_residual(build_generator(6, Topology::Open, kin, b), mu));
  }
  EXPECT_GT(res[0], 1e-6);
  EXPECT_NEAR(res[1] / res[0], 2.0, 1e-6);
  EXPECT_NEAR(res[2] / res[0], 4.0, 1e-6);
}

TEST(Stationary, ReducibleChainNamesClasses) {
  const auto q = build_generator(5, Topology::Open, {1, 0.5, 0.2, 0.1, 0.3}, BoundaryRates{});
  try {
    stationary_distribution(q);
    FAIL() << "expected a reducible-chain error";
  } catch (const ReducibleChainError& e) {
    EXPECT_EQ(e.closed_classes.size(), 6u);
  }
}

TEST(Stationary, OpenTasepAgainstSimulationFreeCheck) {
  // open TASEP with unit reservoirs: pi Q = 0 and pi is a probability vector
  const auto q = build_generator(4, Topology::Open, {1, 0, 0, 0, 0}, BoundaryRates{1, 1, 0, 0, 1, 1, 0, 0});
  const auto pi = stationary_distribution(q);
  double total = 0;
  for (double v : pi) total += v;
  EXPECT_NEAR(total, 1.0, 1e-14);
  EXPECT_LT(invariance_residual(q, pi), 1e-12);
}

TEST(DetailedBalance, PeriodicIffSymmetric) {
  std::mt19937_64 g(25);
  for (int t = 0; t < 20; ++t) {
    const double r = oracle::uniform(g, 0.1, 2), kap = oracle::uniform(g, -0.9, 0.9), eps = oracle::uniform(g, -0.9, 0.9);
    const auto m = MeasureParams::from_epsilon(oracle::log_uniform(g, 0.3, 3), eps);
    const auto mu = ising_measure_vector(6, Topology::Periodic, m);
    const auto sym = build_generator(6, Topology::Periodic, {r, r, kap, kap, eps});
    EXPECT_LT(detailed_balance_residual(sym, mu), 1e-14 * max_exit(sym));
    const auto asym_k = build_generator(6, Topology::Periodic, {r, r, kap, kap * 0.5 + 0.1, eps});
    EXPECT_GT(detailed_balance_residual(asym_k, mu), 1e-6);
    const auto asym_r = build_generator(6, Topology::Periodic, {r, r * 1.1, kap, kap, eps});
    EXPECT_GT(detailed_balance_residual(asym_r, mu), 1e-6);
  }
}

TEST(DetailedBalance, OpenReversibleCase) {
  const BulkKinetics kin{1.2, 1.2, 0.3, 0.3, 0.4};
  const MeasureParams m{1.3, kin.interaction_y()};
  // c0 = 0, so the boundary conditions force all four reservoir constants to 0
  const auto b = boundary_rates_from_omegas(kin, m, {0.2, 0.5, 0.1, 0.3});
  const auto dc = derived_constants(kin, b, m);
  for (double c : {dc.c1m, dc.c2m, dc.c1p, dc.c2p}) EXPECT_NEAR(c, 0.0, 1e-14);
  const auto q = build_generator(6, Topology::Open, kin, b);
  const auto mu = ising_measure_vector(6, Topology::Open, m);
  EXPECT_LT(detailed_balance_residual(q, mu), 1e-14 * max_exit(q));
  EXPECT_THROW(detailed_balance_residual(q, std::vector<double>(64, 0.0)), DomainError);
}

TEST(Lemma, RandomRatesAllIdentitiesHold) {
  std::mt19937_64 g(26);
  for (int t = 0; t < 20; ++t) {
    const auto kin = random_kinetics(g);
    BoundaryRates b;
    for (double* v : {&b.alpha1, &b.alpha2, &b.gamma1, &b.gamma2, &b.beta1, &b.beta2, &b.delta1, &b.delta2})
      *v = oracle::uniform(g, 0, 2);
    const MeasureParams m{oracle::log_uniform(g, 0.3, 3), kin.interaction_y()};
    const auto r = lemma_identity_residuals(6, kin, b, m);
    EXPECT_LT(r.bulk_sum, 1e-12);
    EXPECT_LT(r.h_minus, 1e-12);
    EXPECT_LT(r.h_plus, 1e-12);
    EXPECT_LT(r.b_minus, 1e-12);
    EXPECT_LT(r.b_plus, 1e-12);
  }
}

TEST(Lemma, SymmetricClosedBulkSumVanishes) {
  const auto r = lemma_identity_residuals(7, {1, 1, 0.4, 0.4, 0.2}, {}, {1.2, 2.0 / 3.0});
  // both sides vanish; only rounding in the applied blocks remains
  EXPECT_LT(r.bulk_sum, 1e-14);
}

TEST(Lemma, LengthRange) {
  EXPECT_THROW(lemma_identity_residuals(4, {}, {}, {}), ResourceError);
  EXPECT_THROW(lemma_identity_residuals(13, {}, {}, {}), ResourceError);
}

TEST(CurrentExpectation, BondIndependentAndMatchesClosedForm) {
  std::mt19937_64 g(27);
  for (int t = 0; t < 20; ++t) {
    const auto kin = random_kinetics(g);
    const auto m = MeasureParams::from_epsilon(oracle::log_uniform(g, 0.3, 3), kin.epsilon);
    const int L = 8;
    const auto q = build_generator(L, Topology::Periodic, kin);
    const auto pi = ising_measure_vector(L, Topology::Periodic, m, true);
    const double ref = current_periodic(L, kin, spectrum(m));
    for (int k = 1; k <= L; ++k) {
      double j = 0;
      for (std::size_t s = 0; s < pi.size(); ++s)
        j += pi[s] * instantaneous_current(Configuration::from_index(s, L, Topology::Periodic), k, kin);
      EXPECT_NEAR(j, ref, 1e-12 * (1 + std::abs(ref)));
    }
  }
}
