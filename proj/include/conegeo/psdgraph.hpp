#pragma once

// Determinantal PSD-weighted graph model.
//
// Every edge e = (i, j) carries a PSD block W_e of size d. The block Laplacian
//   L(W) = sum_e (b_e b_e^T) (x) W_e
// is PSD, and with a fixed regularizer R > 0 the stabilized energy
//   Phi(W) = -log det(L(W) + R)
// is smooth and convex along every cone direction. Because W -> X(W) is affine,
// its first and second directional derivatives are closed-form traces.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conegeo/symcore.hpp"

namespace conegeo {

/// Numerical PSD tolerance on block eigenvalues.
inline constexpr double kPsdTolerance = 1e-12;
/// Regularizer scale used when none is supplied: R = kDefaultRegularizer * I.
inline constexpr double kDefaultRegularizer = 0.1;

struct Edge {
  int tail = 0;
  int head = 0;
};

/// Undirected graph with an orientation fixed at construction.
class OrientedGraph {
 public:
  OrientedGraph(int num_vertices, std::vector<Edge> edges);

  static OrientedGraph cycle(int m);
  static OrientedGraph complete(int m);
  static OrientedGraph path(int m);

  int num_vertices() const { return m_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_.at(static_cast<std::size_t>(e)); }

  /// Oriented incidence matrix B (m x |E|), +1 at the tail, -1 at the head.
  Eigen::MatrixXd incidence() const;
  bool connected() const;
  /// Same graph with every edge orientation flipped.
  OrientedGraph reversed() const;

 private:
  int m_;
  std::vector<Edge> edges_;
};

/// A point W of the weight cone: one PSD block per edge.
class EdgeWeights {
 public:
  /// Throws InvalidInput when a block has the wrong size or is not PSD.
  EdgeWeights(int d, std::vector<SymMatrix> blocks);

  static EdgeWeights zero(int d, int num_edges);

  int block_dim() const { return d_; }
  int size() const { return static_cast<int>(blocks_.size()); }
  const std::vector<SymMatrix>& blocks() const { return blocks_; }
  const SymMatrix& block(int e) const { return blocks_.at(static_cast<std::size_t>(e)); }

 private:
  int d_;
  std::vector<SymMatrix> blocks_;
};

/// Per-edge symmetric perturbation U. Blocks need not be PSD; when all are,
/// is_cone_direction() is true.
class PerturbationDirection {
 public:
  PerturbationDirection(int d, std::vector<SymMatrix> blocks);

  static PerturbationDirection zero(int d, int num_edges);

  int block_dim() const { return d_; }
  int size() const { return static_cast<int>(blocks_.size()); }
  const std::vector<SymMatrix>& blocks() const { return blocks_; }
  const SymMatrix& block(int e) const { return blocks_.at(static_cast<std::size_t>(e)); }
  bool is_cone_direction() const { return cone_; }

  PerturbationDirection operator*(double s) const;
  PerturbationDirection operator+(const PerturbationDirection& other) const;

 private:
  int d_;
  std::vector<SymMatrix> blocks_;
  bool cone_;
};

bool is_psd(const SymMatrix& a, double tol = kPsdTolerance);

SymMatrix block_laplacian(const OrientedGraph& graph, std::span<const SymMatrix> blocks, int d);
SymMatrix block_laplacian(const OrientedGraph& graph, const EdgeWeights& w);
SymMatrix block_laplacian(const OrientedGraph& graph, const PerturbationDirection& u);

/// sum_e (x_i - x_j)^T W_e (x_i - x_j), with x stacked vertex-major (length m*d).
double dirichlet_form(const OrientedGraph& graph, const EdgeWeights& w, const Eigen::VectorXd& x);

/// Graph, weights and regularizer with X = L(W) + R factored once.
/// Immutable; a weight update means building a new context.
class ModelContext {
 public:
  /// R defaults to kDefaultRegularizer * I of size m*d.
  ModelContext(OrientedGraph graph, EdgeWeights w, std::optional<SpdMatrix> r = std::nullopt);

  const OrientedGraph& graph() const { return graph_; }
  int block_dim() const { return w_.block_dim(); }
  const EdgeWeights& weights() const { return w_; }
  const SpdMatrix& regularizer() const { return r_; }
  const SpdMatrix& x() const { return x_; }
  const Eigen::MatrixXd& x_inverse() const { return x_inv_; }

  /// Context at W + eps U. U must keep every block PSD.
  ModelContext shifted(const PerturbationDirection& u, double eps) const;

 private:
  OrientedGraph graph_;
  EdgeWeights w_;
  SpdMatrix r_;
  SpdMatrix x_;
  Eigen::MatrixXd x_inv_;
};

/// Phi(W) = -log det X(W).
double energy_phi(const ModelContext& ctx);

/// D_U Phi = -tr(X^{-1} L(U)).
double dir_deriv_phi(const ModelContext& ctx, const PerturbationDirection& u);

/// g_W(U, V) = tr(X^{-1} L(U) X^{-1} L(V)).
double pullback_metric(const ModelContext& ctx, const PerturbationDirection& u,
                       const PerturbationDirection& v);

/// Derivatives of f(W) = det X(W) along U and V.
struct DeterminantDerivatives {
  double f = 0.0;
  double d_u = 0.0;
  double d_v = 0.0;
  double d_uv = 0.0;
  double metric = 0.0;  // tr(X^{-1} L(U) X^{-1} L(V))
};

DeterminantDerivatives determinant_derivatives(const ModelContext& ctx,
                                               const PerturbationDirection& u,
                                               const PerturbationDirection& v);

/// (D_U f)(D_V f) - f D_U D_V f - f^2 tr(X^{-1}L(U)X^{-1}L(V)); zero up to rounding.
double rayleigh_residual(const ModelContext& ctx, const PerturbationDirection& u,
                         const PerturbationDirection& v);

/// Direction with block u u^T on edge_index and zeros elsewhere.
PerturbationDirection rank_one_direction(int num_edges, int edge_index, const Eigen::VectorXd& u);

/// (b_e b_e^T) (x) (u u^T), built directly without the block Laplacian.
SymMatrix rank_one_lift(const OrientedGraph& graph, int edge_index, const Eigen::VectorXd& u);

/// Spanning-tree count from the reduced unit-weight Laplacian (vertex 0 removed).
std::int64_t matrix_tree_check(const OrientedGraph& graph);

/// Plain-text edge list: header "m d", then one line per edge with
/// "tail head" followed by the d(d+1)/2 upper-triangular entries of W_e
/// in row-major order. Lines starting with '#' are ignored.
std::pair<OrientedGraph, EdgeWeights> read_edge_list(std::istream& in);
std::pair<OrientedGraph, EdgeWeights> read_edge_list_file(const std::string& path);
void write_edge_list(std::ostream& out, const OrientedGraph& graph, const EdgeWeights& w);

}  // namespace conegeo
