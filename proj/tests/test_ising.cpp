#include <gtest/gtest.h>

#include <random>

#include "kls/ising.hpp"
#include "oracles.hpp"

using namespace kls;

TEST(Spectrum, FreeCase) {
  const auto s = spectrum({1.0, 1.0});
  EXPECT_DOUBLE_EQ(s.lambda_max, 2.0);
  EXPECT_NEAR(s.lambda_min, 0.0, 1e-16);
  EXPECT_NEAR(s.v_max[0], 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.v_max[1], 1 / std::sqrt(2.0), 1e-15);
}

TEST(Spectrum, HardRepulsionLimit) {
  EXPECT_NEAR(spectrum({1.0, 1e-15}).lambda_max, (1 + std::sqrt(5.0)) / 2, 1e-12);
}

TEST(Spectrum, TraceDeterminantOrthonormality) {
  std::mt19937_64 g(1);
  for (int t = 0; t < 500; ++t) {
    const double x = oracle::log_uniform(g, 1e-3, 1e3), y = oracle::log_uniform(g, 1e-3, 1e3);
    const auto s = spectrum({x, y});
    const double scale = 1 + x * x * y;
    EXPECT_GT(s.lambda_max, s.lambda_min);
    EXPECT_NEAR(s.lambda_max + s.lambda_min, 1 + x * x * y, 1e-13 * scale);
    EXPECT_NEAR(s.lambda_max * s.lambda_min, x * x * y - x * x, 1e-13 * scale * scale);
    EXPECT_NEAR(s.v_max[0] * s.v_max[0] + s.v_max[1] * s.v_max[1], 1.0, 1e-14);
    EXPECT_NEAR(s.v_min[0] * s.v_min[0] + s.v_min[1] * s.v_min[1], 1.0, 1e-14);
    EXPECT_NEAR(s.v_max[0] * s.v_min[0] + s.v_max[1] * s.v_min[1], 0.0, 1e-14);
  }
}

TEST(Spectrum, PowerMatchesDirectProduct) {
  std::mt19937_64 g(2);
  for (int t = 0; t < 100; ++t) {
    const double x = oracle::log_uniform(g, 0.2, 5), y = oracle::log_uniform(g, 0.1, 10);
    const auto s = spectrum({x, y});
    double T[2][2] = {{1, x}, {x, x * x * y}};
    double P[2][2] = {{1, 0}, {0, 1}};
    for (int n = 0; n <= 20; ++n) {
      const auto Q = transfer_power(n, s);
      const double norm = std::max({std::abs(P[0][0]), std::abs(P[0][1]), std::abs(P[1][1])});
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(Q[i][j] - P[i][j]), 1e-12 * norm) << n;
      double N[2][2];
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) N[i][j] = P[i][0] * T[0][j] + P[i][1] * T[1][j];
      std::copy(&N[0][0], &N[0][0] + 4, &P[0][0]);
    }
  }
}

TEST(TransferY, Examples) {
  const auto s = spectrum({1.3, 0.6});
  const double x2 = 1.69;
  EXPECT_NEAR(transfer_y(0, s), 1.0, 1e-15);
  EXPECT_NEAR(transfer_y(1, s), x2 * 0.6, 1e-14);
  EXPECT_NEAR(transfer_y(2, s), x2 * (1 + x2 * 0.36), 1e-14);
  const auto f = spectrum({1.0, 1.0});
  for (int n = 1; n < 12; ++n) EXPECT_NEAR(transfer_y(n, f), std::pow(2.0, n - 1), 1e-12 * std::pow(2.0, n));
}

TEST(PeriodicPartition, Examples) {
  EXPECT_NEAR(partition_periodic(4, spectrum({1.0, 1.0})), 16.0, 1e-12);
  EXPECT_NEAR(partition_periodic(4, spectrum({1.0, 1e-16})), 7.0, 1e-12);
  const auto s = spectrum({0.7, 2.5});
  for (int L = 2; L <= 12; L += 2) EXPECT_GE(partition_periodic(L, s), std::pow(s.lambda_max, L));
  for (int L = 1; L <= 11; L += 2) EXPECT_GT(partition_periodic(L, s), 0.0);
  // large L works in the log domain
  EXPECT_NEAR(log_partition_periodic(2000, s), 2000 * std::log(s.lambda_max), 1e-9);
}

TEST(PeriodicDensity, Examples) {
  const auto f = spectrum({1.0, 1.0});
  for (int L = 1; L < 20; ++L) EXPECT_NEAR(density_periodic(L, f), 0.5, 1e-15);
  EXPECT_NEAR(f.rho(), 0.5, 1e-15);
  const auto e = oracle::ring(8, 2 * std::log(2.0), -std::log(0.25));
  const double rho = e.mean([](std::uint64_t s) { return oracle::bit(s, 0); });
  EXPECT_LE(oracle::rel_err(density_periodic(8, spectrum({2.0, 0.25})), rho), 1e-12);
}

TEST(PeriodicDensity, EqualsDerivativeOfLogPartition) {
  std::mt19937_64 g(4);
  for (int t = 0; t < 50; ++t) {
    const double phi = oracle::uniform(g, -2, 2), J = oracle::uniform(g, -2, 2);
    const int L = 3 + static_cast<int>(g() % 20);
    const double h = 1e-6;
    auto lnZ = [&](double p) { return log_partition_periodic(L, spectrum(MeasureParams::from_potentials(p, J))); };
    const double fd = (lnZ(phi + h) - lnZ(phi - h)) / (2 * h) / L;
    EXPECT_NEAR(density_periodic(L, spectrum(MeasureParams::from_potentials(phi, J))), fd, 1e-6);
  }
}

TEST(PeriodicDensity, ExponentialConvergence) {
  const auto s = spectrum({1.4, 0.3});
  const double c = std::abs(s.c());
  const double K = std::abs(density_periodic(4, s) - s.rho()) / std::pow(c, 4);
  for (int L = 5; L < 60; ++L) EXPECT_LE(std::abs(density_periodic(L, s) - s.rho()), 1.01 * K * std::pow(c, L) + 1e-16);
}

TEST(PeriodicCorrelations, Independent) {
  const auto f = spectrum({1.0, 1.0});
  for (int L = 3; L < 15; ++L) {
    const auto c = correlations_periodic(L, f);
    EXPECT_NEAR(c.occupied_empty, 0.25, 1e-15);
    EXPECT_NEAR(c.occupied_empty_occupied, 0.125, 1e-15);
    EXPECT_NEAR(c.occupied_occupied_empty, 0.125, 1e-15);
  }
}

TEST(PeriodicCorrelations, MatchEnumeration) {
  std::mt19937_64 g(6);
  for (int t = 0; t < 30; ++t) {
    const double x = oracle::log_uniform(g, 0.3, 3), y = oracle::log_uniform(g, 0.1, 10);
    const int L = 8;
    const auto e = oracle::ring(L, 2 * std::log(x), -std::log(y));
    const auto c = correlations_periodic(L, spectrum({x, y}));
    using oracle::bit;
    EXPECT_LE(oracle::rel_err(c.occupied_empty, e.mean([](auto s) { return bit(s, 0) * (1 - bit(s, 1)); })), 1e-12);
    EXPECT_LE(oracle::rel_err(c.occupied_empty_occupied,
                              e.mean([](auto s) { return bit(s, 0) * (1 - bit(s, 1)) * bit(s, 2); })),
              1e-12);
    EXPECT_LE(oracle::rel_err(c.occupied_occupied_empty,
                              e.mean([](auto s) { return bit(s, 0) * bit(s, 1) * (1 - bit(s, 2)); })),
              1e-12);
    for (int r = 0; r <= L; ++r)
      EXPECT_LE(oracle::rel_err(c.pair[r], e.mean([&](auto s) { return bit(s, 0) * bit(s, r % L); })), 1e-12);
  }
}

TEST(Current, SymmetricIsZero) {
  const BulkKinetics kin{1.3, 1.3, 0.2, 0.2, 0.5};
  const auto s = spectrum(MeasureParams::from_epsilon(1.7, 0.5));
  for (int L = 4; L < 20; ++L) EXPECT_NEAR(current_periodic(L, kin, s), 0.0, 1e-15);
  EXPECT_NEAR(current_limit(kin, s), 0.0, 1e-15);
}

TEST(Current, TasepLimit) {
  EXPECT_NEAR(current_limit({1, 0, 0, 0, 0}, spectrum({1.0, 1.0})), 0.25, 1e-15);
}

TEST(Current, RejectsUnboundMeasure) {
  EXPECT_THROW(current_limit({1, 0, 0, 0, 0.5}, spectrum({1.0, 1.0})), ValidationError);
}

TEST(Current, ZeroStaticInteractionClosedForm) {
  std::mt19937_64 g(8);
  for (int t = 0; t < 50; ++t) {
    const BulkKinetics kin{oracle::uniform(g, 0, 2), oracle::uniform(g, 0, 2), oracle::uniform(g, -0.9, 0.9),
                           oracle::uniform(g, -0.9, 0.9), 0.0};
    for (double x : {0.1, 0.5, 1.0, 2.0, 7.0}) {
      const auto s = spectrum({x, 1.0});
      const double rho = s.rho();
      const double expect =
          rho * (1 - rho) * (kin.r - kin.ell + (kin.r * kin.kappa - kin.ell * kin.lambda) * (1 - 2 * rho));
      EXPECT_NEAR(current_limit(kin, s), expect, 1e-14);
    }
  }
}

TEST(Current, AssembledFromCorrelations) {
  std::mt19937_64 g(9);
  for (int t = 0; t < 50; ++t) {
    const BulkKinetics kin{oracle::uniform(g, 0, 2), oracle::uniform(g, 0, 2), oracle::uniform(g, -0.9, 0.9),
                           oracle::uniform(g, -0.9, 0.9), oracle::uniform(g, -0.9, 0.9)};
    const auto m = MeasureParams::from_epsilon(oracle::log_uniform(g, 0.3, 3), kin.epsilon);
    const auto s = spectrum(m);
    const auto dc = derived_constants(kin, {}, m);
    for (int L : {4, 7, 12, 30}) {
      const auto c = correlations_periodic(L, s);
      const double j = dc.c0 * c.occupied_empty + dc.c2 * c.occupied_occupied_empty - dc.c1 * c.occupied_empty_occupied;
      EXPECT_NEAR(current_periodic(L, kin, s), j, 1e-13 * (1 + std::abs(j)));
    }
  }
}

TEST(Current, EnumerationRing) {
  std::mt19937_64 g(10);
  for (int t = 0; t < 30; ++t) {
    const BulkKinetics kin{oracle::uniform(g, 0, 2), oracle::uniform(g, 0, 2), oracle::uniform(g, -0.9, 0.9),
                           oracle::uniform(g, -0.9, 0.9), oracle::uniform(g, -0.9, 0.9)};
    const auto m = MeasureParams::from_epsilon(oracle::log_uniform(g, 0.3, 3), kin.epsilon);
    const int L = 8;
    const auto e = oracle::ring(L, m.phi(), m.J());
    const oracle::Kin ok{kin.r, kin.ell, kin.kappa, kin.lambda, kin.epsilon};
    const double j = e.mean([&](auto s) { return oracle::ring_current(s, L, 3, ok); });
    EXPECT_NEAR(current_periodic(L, kin, spectrum(m)), j, 1e-12 * (1 + std::abs(j)));
  }
}

TEST(Current, LimitIsReachedExponentially) {
  const BulkKinetics kin{1.2, 0.4, 0.3, -0.2, 0.4};
  const auto s = spectrum(MeasureParams::from_epsilon(1.1, kin.epsilon));
  const double d = std::abs(current_periodic(64, kin, s) - current_periodic(128, kin, s));
  EXPECT_LE(d, std::pow(std::abs(s.c()), 60) + 1e-15);
  EXPECT_NEAR(current_periodic(128, kin, s), current_limit(kin, s), 1e-14);
}

TEST(OpenChain, FreeChainPartitionMatchesEnumeration) {
  const MeasureParams m{1.3, 0.7};
  const auto bf = BoundaryFields::free_chain(m);
  const auto e = oracle::chain(8, m.phi(), m.J(), m.phi() / 2, m.phi() / 2);
  EXPECT_LE(oracle::rel_err(partition_open(8, spectrum(m), bf), e.Z), 1e-12);
}

TEST(OpenChain, UniformProfileWhenFree) {
  const MeasureParams m{1.0, 1.0};
  const auto s = spectrum(m);
  for (int k = 1; k <= 10; ++k) EXPECT_NEAR(density_profile_open(k, 10, s, BoundaryFields::free_chain(m)), 0.5, 1e-15);
}

TEST(OpenChain, MidpointApproachesPeriodicDensity) {
  const MeasureParams m{1.6, 0.4};
  const auto s = spectrum(m);
  for (auto bf : {BoundaryFields::free_chain(m), BoundaryFields::uniform(m), BoundaryFields{-1.0, 2.0}}) {
    EXPECT_NEAR(density_profile_open(32, 64, s, bf), density_periodic(64, s), 1e-10);
  }
}

TEST(BoltzmannWeight, Examples) {
  const MeasureParams m{1.3, 0.6};
  const double x = m.x, y = m.y;
  EXPECT_DOUBLE_EQ(boltzmann_weight(Configuration::empty(4, Topology::Periodic), m), 1.0);
  EXPECT_DOUBLE_EQ(boltzmann_weight(Configuration::empty(4, Topology::Open), m), 1.0);
  EXPECT_NEAR(boltzmann_weight(Configuration::full(4, Topology::Periodic), m), std::pow(y, 4) * std::pow(x, 8), 1e-13);
  // open chains give every particle fugacity x^2, so 1111 weighs y^3 x^8
  EXPECT_NEAR(boltzmann_weight(Configuration::full(4, Topology::Open), m), std::pow(y, 3) * std::pow(x, 8), 1e-13);
  // with free-chain fields (phi/2 at the ends) the same configuration weighs y^3 x^6
  EXPECT_NEAR(boltzmann_weight(Configuration::full(4, Topology::Open), m, BoundaryFields::free_chain(m)),
              std::pow(y, 3) * std::pow(x, 6), 1e-13);
  EXPECT_NEAR(boltzmann_weight(Configuration::from_string("1010", Topology::Periodic), m), std::pow(x, 4), 1e-13);
}

TEST(BoltzmannWeight, MatchesEnumerationWeights) {
  std::mt19937_64 g(12);
  for (int t = 0; t < 20; ++t) {
    const MeasureParams m{oracle::log_uniform(g, 0.3, 3), oracle::log_uniform(g, 0.1, 10)};
    const BoundaryFields bf{oracle::uniform(g, -2, 2), oracle::uniform(g, -2, 2)};
    const int L = 7;
    for (std::uint64_t s = 0; s < 128; ++s) {
      const auto cp = Configuration::from_string(oracle::sites(s, L), Topology::Periodic);
      const auto co = Configuration::from_string(oracle::sites(s, L), Topology::Open);
      EXPECT_LE(oracle::rel_err(boltzmann_weight(cp, m), oracle::ring_weight(s, L, m.phi(), m.J())), 1e-13);
      EXPECT_LE(oracle::rel_err(boltzmann_weight(co, m), oracle::chain_weight(s, L, m.phi(), m.J(), m.phi(), m.phi())),
                1e-13);
      EXPECT_LE(oracle::rel_err(boltzmann_weight(co, m, bf),
                                oracle::chain_weight(s, L, m.phi(), m.J(), bf.phi_minus, bf.phi_plus)),
                1e-13);
    }
  }
}
