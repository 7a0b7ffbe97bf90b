#pragma once

// Exact intensity matrix on {0,1}^L for small lattices, stationary
// distributions, and numerical certificates of invariance and detailed
// balance for the Ising measure.
//
// Convention: Q(eta -> eta') is the rate matrix with rows indexed by the
// source state. Measures are row vectors, so invariance reads mu Q = 0. The
// quantum-Hamiltonian form acting on column vectors is H = -Q^T.
//
// State index: site 1 is the most significant bit (Configuration::index()).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/strong_components.hpp>

#include "kls/error.hpp"
#include "kls/ising.hpp"
#include "kls/model.hpp"

namespace kls {

inline constexpr int kMaxGeneratorLength = 14;

/// One off-diagonal transition.
struct Transition {
  std::uint32_t target;
  double rate;
};

class SparseGenerator {
 public:
  SparseGenerator(int L, Topology topology, std::vector<std::vector<Transition>> rows)
      : L_(L), topology_(topology), rows_(std::move(rows)) {
    exit_.resize(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double s = 0.0;
      for (const auto& t : rows_[i]) s += t.rate;
      exit_[i] = s;
    }
  }

  int length() const { return L_; }
  Topology topology() const { return topology_; }
  std::size_t dimension() const { return rows_.size(); }
  const std::vector<Transition>& row(std::size_t i) const { return rows_[i]; }
  /// -Q(eta, eta): total exit rate.
  double exit_rate(std::size_t i) const { return exit_[i]; }

  /// Q(from -> to); the diagonal returns minus the exit rate.
  double rate(std::size_t from, std::size_t to) const {
    if (from == to) return -exit_[from];
    double s = 0.0;
    for (const auto& t : rows_[from])
      if (t.target == to) s += t.rate;
    return s;
  }

  Eigen::SparseMatrix<double, Eigen::RowMajor> to_sparse() const {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -exit_[i]);
      for (const auto& t : rows_[i]) trip.emplace_back(static_cast<int>(i), static_cast<int>(t.target), t.rate);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> q(static_cast<int>(dimension()), static_cast<int>(dimension()));
    q.setFromTriplets(trip.begin(), trip.end());
    return q;
  }

  /// mu Q as a dense vector.
  std::vector<double> left_apply(std::span<const double> mu) const {
    std::vector<double> out(dimension(), 0.0);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      out[i] -= mu[i] * exit_[i];
      for (const auto& t : rows_[i]) out[t.target] += mu[i] * t.rate;
    }
    return out;
  }

 private:
  int L_;
  Topology topology_;
  std::vector<std::vector<Transition>> rows_;
  std::vector<double> exit_;
};

/// Which local blocks of the generator to include. The full generator uses
/// all of them; the lemma checks assemble single blocks.
struct GeneratorBlocks {
  bool bulk_bonds = true;       // periodic: all bonds; open: bonds 2..L-2
  bool left_bond = true;        // open bond (1,2)
  bool right_bond = true;       // open bond (L-1,L)
  bool left_reservoir = true;   // site 1
  bool right_reservoir = true;  // site L
};

namespace detail {

inline void check_generator_length(int L) {
  if (L < Configuration::kMinLength || L > kMaxGeneratorLength) {
    throw ResourceError("exact generator supports 4 <= L <= " + std::to_string(kMaxGeneratorLength) + ", got L = " +
                        std::to_string(L));
  }
}

inline SparseGenerator assemble(int L, Topology topology, const BulkKinetics& kin, const BoundaryRates& b,
                                BoundaryVariant variant, const GeneratorBlocks& blocks) {
  const std::uint32_t dim = 1u << L;
  std::vector<std::vector<Transition>> rows(dim);
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(L));
  auto bit = [L](int site0) { return 1u << (L - 1 - site0); };
  const int n_bonds = topology == Topology::Periodic ? L : L - 1;

  for (std::uint32_t s = 0; s < dim; ++s) {
    for (int i = 0; i < L; ++i) occ[i] = static_cast<std::uint8_t>((s >> (L - 1 - i)) & 1u);
    auto& row = rows[s];
    for (int k = 0; k < n_bonds; ++k) {
      bool include = blocks.bulk_bonds;
      if (topology == Topology::Open) {
        if (k == 0) include = blocks.left_bond;
        else if (k == L - 2) include = blocks.right_bond;
      }
      if (!include) continue;
      const auto [right, left] = bond_rates_raw(occ, topology, k, kin, variant);
      const double w = right + left;
      if (w > 0.0) {
        const int k1 = (k + 1) % L;
        row.push_back({s ^ bit(k) ^ bit(k1), w});
      }
    }
    if (topology == Topology::Open) {
      if (blocks.left_reservoir) {
        const auto [ins, rem] = left_reservoir_local(occ[0], occ[1], b);
        if (ins + rem > 0.0) row.push_back({s ^ bit(0), ins + rem});
      }
      if (blocks.right_reservoir) {
        const auto [ins, rem] = right_reservoir_local(occ[L - 2], occ[L - 1], b);
        if (ins + rem > 0.0) row.push_back({s ^ bit(L - 1), ins + rem});
      }
    }
  }
  return SparseGenerator(L, topology, std::move(rows));
}

}  // namespace detail

/// Full rate matrix of the process on L sites. Boundary rates are required
/// for open lattices and must be absent for periodic ones.
inline SparseGenerator build_generator(int L, Topology topology, const BulkKinetics& kin,
                                       const std::optional<BoundaryRates>& boundary = std::nullopt,
                                       BoundaryVariant variant = BoundaryVariant::VacuumExtended) {
  detail::check_generator_length(L);
  kin.validate();
  if (topology == Topology::Open && !boundary) throw ValidationError("open lattice requires boundary rates");
  if (topology == Topology::Periodic && boundary) throw ValidationError("periodic lattice takes no boundary rates");
  const BoundaryRates b = boundary.value_or(BoundaryRates{});
  b.validate();
  return detail::assemble(L, topology, kin, b, variant, GeneratorBlocks{});
}

/// Unnormalized (or normalized) Ising weight of every configuration.
inline std::vector<double> ising_measure_vector(int L, Topology topology, const MeasureParams& m,
                                                bool normalize = false) {
  if (L < 1 || L > 20) throw ResourceError("Ising measure vector supports L <= 20");
  m.validate();
  const std::uint32_t dim = 1u << L;
  std::vector<double> mu(dim);
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(L));
  double total = 0.0;
  for (std::uint32_t s = 0; s < dim; ++s) {
    for (int i = 0; i < L; ++i) occ[i] = static_cast<std::uint8_t>((s >> (L - 1 - i)) & 1u);
    mu[s] = boltzmann_weight(occ, topology, m);
    total += mu[s];
  }
  if (normalize)
    for (auto& v : mu) v /= total;
  return mu;
}

/// Closed communicating classes of the transition graph, each sorted.
inline std::vector<std::vector<std::size_t>> closed_classes(const SparseGenerator& q) {
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS>;
  const std::size_t n = q.dimension();
  Graph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& t : q.row(i))
      if (t.rate > 0.0) boost::add_edge(i, t.target, g);
  std::vector<int> component(n);
  const int n_comp = boost::strong_components(g, boost::make_iterator_property_map(
                                                     component.begin(), boost::get(boost::vertex_index, g)));
  std::vector<bool> leaks(static_cast<std::size_t>(n_comp), false);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& t : q.row(i))
      if (t.rate > 0.0 && component[t.target] != component[i]) leaks[component[i]] = true;
  std::vector<std::vector<std::size_t>> by_comp(static_cast<std::size_t>(n_comp));
  for (std::size_t i = 0; i < n; ++i) by_comp[component[i]].push_back(i);
  std::vector<std::vector<std::size_t>> closed;
  for (int c = 0; c < n_comp; ++c)
    if (!leaks[c]) closed.push_back(std::move(by_comp[c]));
  std::sort(closed.begin(), closed.end());
  return closed;
}

/// ||mu Q||_inf / ||mu||_inf; zero iff mu is invariant.
inline double invariance_residual(const SparseGenerator& q, std::span<const double> mu) {
  if (mu.size() != q.dimension()) throw ValidationError("measure dimension does not match generator");
  const auto v = q.left_apply(mu);
  double worst = 0.0, scale = 0.0;
  for (double e : v) worst = std::max(worst, std::abs(e));
  for (double e : mu) scale = std::max(scale, std::abs(e));
  return scale > 0.0 ? worst / scale : worst;
}

/// The unique stationary distribution of an irreducible generator, solved
/// from pi Q = 0 with one balance equation replaced by normalization.
inline std::vector<double> stationary_distribution(const SparseGenerator& q) {
  const auto classes = closed_classes(q);
  if (classes.size() != 1) {
    std::string msg = "generator has " + std::to_string(classes.size()) + " closed classes; sizes:";
    for (const auto& c : classes) msg += " " + std::to_string(c.size());
    throw ReducibleChainError(msg, classes);
  }
  const int n = static_cast<int>(q.dimension());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd pi;
  // Rows of A are the columns of Q (A = Q^T), last row replaced by ones.
  if (n <= 1024) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      a(i, i) -= q.exit_rate(static_cast<std::size_t>(i));
      for (const auto& t : q.row(static_cast<std::size_t>(i))) a(static_cast<int>(t.target), i) += t.rate;
    }
    a.row(n - 1).setOnes();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    pi = lu.solve(rhs);
    pi += lu.solve(rhs - a * pi);  // one step of iterative refinement
  } else {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) {
      if (i != n - 1) trip.emplace_back(i, i, -q.exit_rate(static_cast<std::size_t>(i)));
      for (const auto& t : q.row(static_cast<std::size_t>(i)))
        if (static_cast<int>(t.target) != n - 1) trip.emplace_back(static_cast<int>(t.target), i, t.rate);
    }
    for (int j = 0; j < n; ++j) trip.emplace_back(n - 1, j, 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw std::runtime_error("sparse LU factorization failed");
    pi = lu.solve(rhs);
    pi += lu.solve(rhs - a * pi);
  }
  std::vector<double> out(pi.data(), pi.data() + n);
  for (auto& v : out) v = std::max(v, 0.0);
  double total = 0.0;
  for (double v : out) total += v;
  for (auto& v : out) v /= total;
  return out;
}

/// max over pairs |mu(a) Q(a->b) - mu(b) Q(b->a)| / ||mu||_inf; zero iff
/// the chain is reversible with respect to mu.
inline double detailed_balance_residual(const SparseGenerator& q, std::span<const double> mu) {
  if (mu.size() != q.dimension()) throw ValidationError("measure dimension does not match generator");
  double scale = 0.0;
  for (double v : mu) {
    if (!(v > 0.0)) throw DomainError("detailed balance requires a strictly positive measure");
    scale = std::max(scale, v);
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < q.dimension(); ++a) {
    for (const auto& t : q.row(a)) {
      const double forward = mu[a] * q.rate(a, t.target);
      const double backward = mu[t.target] * q.rate(t.target, a);
      worst = std::max(worst, std::abs(forward - backward));
    }
  }
  return worst / scale;
}

struct LemmaResiduals {
  double bulk_sum = 0.0;
  double h_minus = 0.0;
  double h_plus = 0.0;
  double b_minus = 0.0;
  double b_plus = 0.0;
};

/// Compares the action of each local generator block on the open Ising
/// measure with the diagonal polynomial it is claimed to equal. Residuals
/// are infinity-norm differences relative to ||mu||_inf.
inline LemmaResiduals lemma_identity_residuals(int L, const BulkKinetics& kin, const BoundaryRates& b,
                                               const MeasureParams& m,
                                               BoundaryVariant variant = BoundaryVariant::VacuumExtended) {
  if (L < 5 || L > 12) throw ResourceError("lemma identities are checked for 5 <= L <= 12");
  kin.validate();
  b.validate();
  m.validate();
  const auto mu = ising_measure_vector(L, Topology::Open, m);
  const auto dc = derived_constants(kin, b, m);
  const double z = m.fugacity(), y = m.y;
  double scale = 0.0;
  for (double v : mu) scale = std::max(scale, v);

  // Each block h of H = -(b^- + h^- + sum h_k + h^+ + b^+) is the transpose
  // of the corresponding rate-matrix block, so h|mu> = mu Q_block.
  auto h_action = [&](GeneratorBlocks blocks) {
    return detail::assemble(L, Topology::Open, kin, b, variant, blocks).left_apply(mu);
  };
  auto compare = [&](const std::vector<double>& lhs, auto&& poly) {
    double worst = 0.0;
    for (std::uint32_t s = 0; s < lhs.size(); ++s) {
      auto n = [&](int site) { return static_cast<double>((s >> (L - site)) & 1u); };
      auto v = [&](int site) { return 1.0 - n(site); };
      worst = std::max(worst, std::abs(lhs[s] - poly(n, v) * mu[s]));
    }
    return worst / scale;
  };

  LemmaResiduals out;
  GeneratorBlocks none{false, false, false, false, false};

  {
    auto blocks = none;
    blocks.bulk_bonds = true;
    out.bulk_sum = compare(h_action(blocks), [&](auto n, auto v) {
      return -(dc.c0 * n(2) + dc.c1 * n(1) * v(2) * n(3) + dc.c2 * n(2) * (1.0 - v(1) * v(3))) +
             (dc.c0 * n(L - 1) + dc.c1 * n(L - 2) * v(L - 1) * n(L) + dc.c2 * n(L - 1) * (1.0 - v(L - 2) * v(L)));
    });
  }
  {
    auto blocks = none;
    blocks.left_bond = true;
    out.h_minus = compare(h_action(blocks), [&](auto n, auto v) {
      return dc.c0 * (n(2) - n(1)) + dc.c1 * n(1) * v(2) * n(3) + dc.c2 * v(1) * n(2) * n(3);
    });
  }
  {
    auto blocks = none;
    blocks.right_bond = true;
    out.h_plus = compare(h_action(blocks), [&](auto n, auto v) {
      return -(dc.c0 * (n(L - 1) - n(L)) + dc.c1 * n(L - 2) * v(L - 1) * n(L) +
               dc.c2 * n(L - 2) * n(L - 1) * v(L));
    });
  }
  {
    auto blocks = none;
    blocks.left_reservoir = true;
    out.b_minus = compare(h_action(blocks), [&](auto n, auto) {
      return -dc.c1m * z + dc.c1m * (1.0 + z) * n(1) + (dc.c1m - dc.c2m) * z * n(2) -
             (dc.c1m * (1.0 + z) - dc.c2m * (z + 1.0 / y)) * n(1) * n(2);
    });
  }
  {
    auto blocks = none;
    blocks.right_reservoir = true;
    out.b_plus = compare(h_action(blocks), [&](auto n, auto) {
      return dc.c1p * z - (dc.c1p - dc.c2p) * z * n(L - 1) - dc.c1p * (1.0 + z) * n(L) +
             (dc.c1p * (1.0 + z) - dc.c2p * (z + 1.0 / y)) * n(L - 1) * n(L);
    });
  }
  return out;
}

}  // namespace kls
