#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "conegeo/error.hpp"
#include "conegeo/psdgraph.hpp"

using namespace conegeo;

namespace {

SymMatrix random_psd_block(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = nd(rng);
  return SymMatrix(g * g.transpose() / d);
}

SymMatrix random_sym_block(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = nd(rng);
  return SymMatrix(g);
}

EdgeWeights random_weights(const OrientedGraph& g, int d, std::mt19937_64& rng) {
  std::vector<SymMatrix> blocks;
  for (int e = 0; e < g.num_edges(); ++e) blocks.push_back(random_psd_block(d, rng));
  return EdgeWeights(d, blocks);
}

PerturbationDirection random_direction(const OrientedGraph& g, int d, std::mt19937_64& rng, bool cone) {
  std::vector<SymMatrix> blocks;
  for (int e = 0; e < g.num_edges(); ++e) blocks.push_back(cone ? random_psd_block(d, rng) : random_sym_block(d, rng));
  return PerturbationDirection(d, blocks);
}

OrientedGraph random_connected_graph(int m, std::mt19937_64& rng) {
  // Random spanning path plus random extra edges.
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < m; ++i) edges.push_back({order[i], order[i + 1]});
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (coin(rng)) edges.push_back({i, j});
  return OrientedGraph(m, edges);
}

// Independent energy: -log det of the dense sum, with the lift built from the incidence matrix.
double phi_direct(const OrientedGraph& g, const EdgeWeights& w, const SpdMatrix& r,
                  const std::vector<std::pair<double, PerturbationDirection>>& shifts) {
  const int d = w.block_dim();
  const Eigen::MatrixXd b = g.incidence();
  Eigen::MatrixXd x = r.matrix();
  for (int e = 0; e < g.num_edges(); ++e) {
    Eigen::MatrixXd block = w.block(e).matrix();
    for (const auto& [t, u] : shifts) block += t * u.block(e).matrix();
    const Eigen::MatrixXd bb = b.col(e) * b.col(e).transpose();
    for (int i = 0; i < g.num_vertices(); ++i)
      for (int j = 0; j < g.num_vertices(); ++j)
        if (bb(i, j) != 0.0) x.block(i * d, j * d, d, d) += bb(i, j) * block;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(x);
  const Eigen::MatrixXd l = llt.matrixL();
  return -2.0 * l.diagonal().array().log().sum();
}

// Brute-force spanning-tree count: every (m-1)-edge subset that is acyclic.
long brute_force_spanning_trees(const OrientedGraph& g) {
  const int m = g.num_vertices();
  const int ne = g.num_edges();
  long count = 0;
  for (unsigned mask = 0; mask < (1u << ne); ++mask) {
    if (__builtin_popcount(mask) != m - 1) continue;
    std::vector<int> parent(static_cast<std::size_t>(m));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[v] != v) v = parent[v];
      return v;
    };
    bool acyclic = true;
    for (int e = 0; e < ne && acyclic; ++e) {
      if (!(mask & (1u << e))) continue;
      const int a = find(g.edge(e).tail);
      const int b = find(g.edge(e).head);
      if (a == b) acyclic = false;
      else parent[a] = b;
    }
    if (acyclic) ++count;
  }
  return count;
}

ModelContext single_edge_context() {
  OrientedGraph g(2, {{0, 1}});
  EdgeWeights w(1, {SymMatrix::identity(1)});
  return ModelContext(g, w, SpdMatrix::identity(2));
}

}  // namespace

TEST(OrientedGraph, ValidatesEdges) {
  EXPECT_THROW(OrientedGraph(2, {{0, 2}}), InvalidInput);
  EXPECT_THROW(OrientedGraph(2, {{1, 1}}), InvalidInput);
  EXPECT_THROW(OrientedGraph::cycle(2), InvalidInput);
  EXPECT_EQ(OrientedGraph::complete(4).num_edges(), 6);
  EXPECT_EQ(OrientedGraph::cycle(5).num_edges(), 5);
}

TEST(OrientedGraph, IncidenceColumnsSumToZero) {
  const auto g = OrientedGraph::complete(5);
  const Eigen::MatrixXd b = g.incidence();
  EXPECT_EQ(b.rows(), 5);
  EXPECT_EQ(b.cols(), 10);
  EXPECT_LE(b.colwise().sum().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(b(g.edge(0).tail, 0), 1.0);
  EXPECT_EQ(b(g.edge(0).head, 0), -1.0);
}

TEST(EdgeWeights, RejectsIndefiniteBlocks) {
  EXPECT_THROW(EdgeWeights(2, {SymMatrix::diagonal(Eigen::Vector2d(1.0, -1e-3))}), InvalidInput);
  EXPECT_THROW(EdgeWeights(2, {SymMatrix::identity(3)}), InvalidInput);
}

TEST(BlockLaplacian, HandCases) {
  const auto tri = OrientedGraph::cycle(3);
  EXPECT_EQ(block_laplacian(tri, EdgeWeights::zero(2, 3)).frobenius_norm(), 0.0);

  OrientedGraph g(2, {{0, 1}});
  const SymMatrix l = block_laplacian(g, EdgeWeights(1, {SymMatrix::identity(1)}));
  Eigen::Matrix2d expect;
  expect << 1, -1, -1, 1;
  EXPECT_EQ((l.matrix() - expect).norm(), 0.0);

  std::vector<SymMatrix> ones(3, SymMatrix::identity(1));
  const EigenDecomp e = eigh(block_laplacian(tri, EdgeWeights(1, ones)));
  EXPECT_NEAR(e.values(0), 0.0, 1e-14);
  EXPECT_NEAR(e.values(1), 3.0, 1e-14);
  EXPECT_NEAR(e.values(2), 3.0, 1e-14);
}

TEST(BlockLaplacian, PsdAndOrientationFree) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_connected_graph(5, rng);
    const auto w = random_weights(g, 3, rng);
    const SymMatrix l = block_laplacian(g, w);
    EXPECT_GE(min_eigenvalue(l), -1e-12 * (1.0 + l.frobenius_norm()));
    EXPECT_EQ((block_laplacian(g.reversed(), w).matrix() - l.matrix()).norm(), 0.0);
  }
}

TEST(DirichletForm, HandAndQuadraticForm) {
  OrientedGraph g(2, {{0, 1}});
  const EdgeWeights w1(1, {SymMatrix::identity(1)});
  EXPECT_DOUBLE_EQ(dirichlet_form(g, w1, Eigen::Vector2d(1.0, 0.0)), 1.0);

  std::mt19937_64 rng(12);
  const auto gr = random_connected_graph(4, rng);
  const auto w = random_weights(gr, 2, rng);
  Eigen::VectorXd constant(8);
  for (int v = 0; v < 4; ++v) constant.segment(2 * v, 2) = Eigen::Vector2d(0.3, -1.7);
  EXPECT_NEAR(dirichlet_form(gr, w, constant), 0.0, 1e-12);

  const Eigen::VectorXd x = Eigen::VectorXd::Random(8);
  const double quad = x.dot(block_laplacian(gr, w).matrix() * x);
  EXPECT_NEAR(dirichlet_form(gr, w, x), quad, 1e-10 * std::abs(quad));
}

TEST(ModelContext, XIsLaplacianPlusRegularizer) {
  std::mt19937_64 rng(13);
  const auto g = random_connected_graph(4, rng);
  const auto w = random_weights(g, 3, rng);
  const ModelContext ctx(g, w);
  const Eigen::MatrixXd expect = block_laplacian(g, w).matrix() + 0.1 * Eigen::MatrixXd::Identity(12, 12);
  EXPECT_LE((ctx.x().matrix() - expect).cwiseAbs().maxCoeff(), 1e-14 * (1.0 + ctx.regularizer().sym().frobenius_norm()));
}

TEST(EnergyPhi, HandCases) {
  const auto g = OrientedGraph::cycle(3);
  const SpdMatrix r(SymMatrix::identity(6) * 2.0);
  EXPECT_NEAR(energy_phi(ModelContext(g, EdgeWeights::zero(2, 3), r)), -6.0 * std::log(2.0), 1e-14);
  EXPECT_NEAR(energy_phi(ModelContext(g, EdgeWeights::zero(2, 3), SpdMatrix::identity(6))), 0.0, 1e-15);
  EXPECT_NEAR(energy_phi(single_edge_context()), -std::log(3.0), 1e-15);
}

TEST(DirDeriv, HandCaseAndZero) {
  const ModelContext ctx = single_edge_context();
  const PerturbationDirection u(1, {SymMatrix::identity(1)});
  EXPECT_NEAR(dir_deriv_phi(ctx, u), -2.0 / 3.0, 1e-15);
  EXPECT_EQ(dir_deriv_phi(ctx, PerturbationDirection::zero(1, 1)), 0.0);
}

TEST(PullbackMetric, HandCaseZeroAndSymmetry) {
  const ModelContext ctx = single_edge_context();
  const PerturbationDirection u(1, {SymMatrix::identity(1)});
  EXPECT_NEAR(pullback_metric(ctx, u, u), 4.0 / 9.0, 1e-15);
  EXPECT_EQ(pullback_metric(ctx, PerturbationDirection::zero(1, 1), u), 0.0);

  std::mt19937_64 rng(14);
  const auto g = random_connected_graph(5, rng);
  const ModelContext c(g, random_weights(g, 3, rng));
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_direction(g, 3, rng, false);
    const auto b = random_direction(g, 3, rng, false);
    EXPECT_NEAR(pullback_metric(c, a, b), pullback_metric(c, b, a), 1e-12);
  }
}

TEST(Derivatives, MatchFiniteDifferencesOfEnergy) {
  std::mt19937_64 rng(15);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 3 + trial % 3;
    const int d = 1 + trial % 3;
    const auto g = random_connected_graph(m, rng);
    const auto w = random_weights(g, d, rng);
    const ModelContext ctx(g, w, SpdMatrix(SymMatrix::identity(m * d) * 0.5));
    const auto u = random_direction(g, d, rng, trial % 2 == 0);
    const auto v = random_direction(g, d, rng, true);
    const SpdMatrix& r = ctx.regularizer();

    const double fd1 = (phi_direct(g, w, r, {{h, u}}) - phi_direct(g, w, r, {{-h, u}})) / (2 * h);
    EXPECT_NEAR(dir_deriv_phi(ctx, u), fd1, 1e-5 * std::abs(fd1) + 1e-9);

    // D_U D_V Phi = g(U, V) for the log-det energy.
    const double hh = 1e-4;
    const double fd2 = (phi_direct(g, w, r, {{hh, u}, {hh, v}}) - phi_direct(g, w, r, {{hh, u}, {-hh, v}}) -
                        phi_direct(g, w, r, {{-hh, u}, {hh, v}}) + phi_direct(g, w, r, {{-hh, u}, {-hh, v}})) /
                       (4 * hh * hh);
    EXPECT_NEAR(pullback_metric(ctx, u, v), fd2, 1e-5 * std::abs(fd2) + 1e-7);
  }
}

TEST(Derivatives, PullbackEqualsLiftedTrace) {
  std::mt19937_64 rng(16);
  const auto g = random_connected_graph(4, rng);
  const ModelContext ctx(g, random_weights(g, 2, rng));
  const auto u = random_direction(g, 2, rng, false);
  const auto v = random_direction(g, 2, rng, false);
  const Eigen::MatrixXd xi = ctx.x().inverse();
  const Eigen::MatrixXd du = block_laplacian(g, u).matrix();
  const Eigen::MatrixXd dv = block_laplacian(g, v).matrix();
  const double expect = (xi * du * xi * dv).trace();
  EXPECT_NEAR(pullback_metric(ctx, u, v), expect, 1e-12 * (1.0 + std::abs(expect)));
}

TEST(Rayleigh, ZeroDirections) {
  const ModelContext ctx = single_edge_context();
  EXPECT_EQ(rayleigh_residual(ctx, PerturbationDirection::zero(1, 1), PerturbationDirection::zero(1, 1)), 0.0);
}

TEST(Rayleigh, DeterminantDerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = OrientedGraph::cycle(3);
    const auto w = random_weights(g, 2, rng);
    const SpdMatrix r(SymMatrix::identity(6));
    const ModelContext ctx(g, w, r);
    const auto u = random_direction(g, 2, rng, true);
    const auto v = random_direction(g, 2, rng, false);
    auto f = [&](double s, double t) { return std::exp(-phi_direct(g, w, r, {{s, u}, {t, v}})); };
    const double h = 1e-4;
    const double f0 = f(0, 0);
    const double du = (f(h, 0) - f(-h, 0)) / (2 * h);
    const double dv = (f(0, h) - f(0, -h)) / (2 * h);
    const double duv = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h);

    const auto dd = determinant_derivatives(ctx, u, v);
    EXPECT_NEAR(dd.f, f0, 1e-12 * f0);
    EXPECT_NEAR(dd.d_u, du, 1e-6 * std::abs(f0 * 10) + 1e-6 * std::abs(du));
    EXPECT_NEAR(dd.d_v, dv, 1e-6 * std::abs(f0 * 10) + 1e-6 * std::abs(dv));
    EXPECT_NEAR(dd.d_uv, duv, 1e-5 * (std::abs(duv) + std::abs(f0)));

    // The identity itself, evaluated with finite-difference derivatives.
    const double fd_residual = du * dv - f0 * duv - f0 * f0 * dd.metric;
    EXPECT_LE(std::abs(fd_residual) / (f0 * f0), 1e-5);
  }
}

TEST(Rayleigh, IdentityOnRandomInstances) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + trial % 4;
    const int d = 1 + trial % 3;
    const auto g = random_connected_graph(m, rng);
    const ModelContext ctx(g, random_weights(g, d, rng));
    const auto u = random_direction(g, d, rng, trial % 2 == 0);
    const auto v = random_direction(g, d, rng, trial % 3 == 0);
    const auto dd = determinant_derivatives(ctx, u, v);
    EXPECT_LE(std::abs(rayleigh_residual(ctx, u, v)) / (dd.f * dd.f), 1e-8);
    if (u.is_cone_direction() && v.is_cone_direction()) {
      EXPECT_GE(dd.f * dd.f * dd.metric, -1e-12 * dd.f * dd.f);
    }
  }
}

TEST(RankOne, DirectionAndLift) {
  const Eigen::Vector3d e1(1, 0, 0);
  const auto dir = rank_one_direction(4, 2, e1);
  EXPECT_EQ((dir.block(2).matrix() - SymMatrix::diagonal(Eigen::Vector3d(1, 0, 0)).matrix()).norm(), 0.0);
  EXPECT_EQ(dir.block(0).frobenius_norm(), 0.0);
  EXPECT_TRUE(dir.is_cone_direction());
  EXPECT_THROW(rank_one_direction(4, 4, e1), InvalidInput);
  EXPECT_THROW(rank_one_direction(4, 0, Eigen::Vector3d::Zero()), InvalidInput);

  std::mt19937_64 rng(19);
  const auto g = OrientedGraph::complete(4);
  for (int e = 0; e < g.num_edges(); ++e) {
    const Eigen::Vector3d u = Eigen::Vector3d::Random();
    const SymMatrix lift = rank_one_lift(g, e, u);
    const SymMatrix oracle = block_laplacian(g, rank_one_direction(g.num_edges(), e, u));
    EXPECT_LE((lift.matrix() - oracle.matrix()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(lift.matrix());
    lu.setThreshold(1e-10);
    EXPECT_EQ(lu.rank(), 1);
  }
}

TEST(MatrixTree, AgreesWithBruteForce) {
  EXPECT_EQ(matrix_tree_check(OrientedGraph(2, {{0, 1}})), 1);
  EXPECT_EQ(matrix_tree_check(OrientedGraph::cycle(3)), 3);
  EXPECT_EQ(brute_force_spanning_trees(OrientedGraph::cycle(3)), 3);
  EXPECT_EQ(matrix_tree_check(OrientedGraph::complete(4)), 16);
  EXPECT_EQ(brute_force_spanning_trees(OrientedGraph::complete(4)), 16);

  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 15; ++trial) {
    const auto g = random_connected_graph(3 + trial % 4, rng);
    EXPECT_EQ(matrix_tree_check(g), brute_force_spanning_trees(g));
  }
  EXPECT_THROW(matrix_tree_check(OrientedGraph(4, {{0, 1}, {2, 3}})), InvalidInput);
}

TEST(EdgeList, RoundTrip) {
  std::mt19937_64 rng(21);
  const auto g = random_connected_graph(5, rng);
  const auto w = random_weights(g, 3, rng);
  std::stringstream ss;
  write_edge_list(ss, g, w);
  const auto [g2, w2] = read_edge_list(ss);
  ASSERT_EQ(g2.num_edges(), g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) {
    EXPECT_EQ(g2.edge(e).tail, g.edge(e).tail);
    EXPECT_EQ(g2.edge(e).head, g.edge(e).head);
    EXPECT_EQ((w2.block(e).matrix() - w.block(e).matrix()).norm(), 0.0);
  }
}

TEST(EdgeList, ParsesHandFileAndRejectsBadInput) {
  std::istringstream in("# triangle\n3 2\n0 1 1 0 1\n1 2 2 0.5 1\n2 0 1 0 1\n");
  const auto [g, w] = read_edge_list(in);
  EXPECT_EQ(g.num_vertices(), 3);
  EXPECT_EQ(w.block(1)(0, 1), 0.5);
  EXPECT_EQ(w.block(1)(1, 0), 0.5);

  std::istringstream missing("2 2\n0 1 1 0\n");
  EXPECT_THROW(read_edge_list(missing), InvalidInput);
  std::istringstream trailing("2 1\n0 1 1 7\n");
  EXPECT_THROW(read_edge_list(trailing), InvalidInput);
  std::istringstream indefinite("2 1\n0 1 -1\n");
  EXPECT_THROW(read_edge_list(indefinite), InvalidInput);
}
