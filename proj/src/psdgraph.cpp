#include "conegeo/psdgraph.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace conegeo {

namespace {

void check_blocks(const std::vector<SymMatrix>& blocks, int d, const char* who) {
  if (d < 1) throw InvalidInput(std::string(who) + ": block dimension must be >= 1");
  for (const auto& b : blocks) {
    if (b.dim() != d) throw InvalidInput(std::string(who) + ": block has wrong dimension");
    if (!b.all_finite()) throw InvalidInput(std::string(who) + ": non-finite block entry");
  }
}

void check_shape(const OrientedGraph& graph, std::size_t num_blocks, const char* who) {
  if (static_cast<int>(num_blocks) != graph.num_edges()) {
    throw InvalidInput(std::string(who) + ": expected one block per edge");
  }
}

// X^{-1} L(U), the building block of every derivative formula.
Eigen::MatrixXd resolvent_product(const ModelContext& ctx, const PerturbationDirection& u) {
  if (u.block_dim() != ctx.block_dim()) throw InvalidInput("direction block dimension mismatch");
  check_shape(ctx.graph(), u.blocks().size(), "direction");
  return ctx.x_inverse() * block_laplacian(ctx.graph(), u).matrix();
}

}  // namespace

OrientedGraph::OrientedGraph(int num_vertices, std::vector<Edge> edges)
    : m_(num_vertices), edges_(std::move(edges)) {
  if (m_ < 1) throw InvalidInput("OrientedGraph: need at least one vertex");
  for (const auto& e : edges_) {
    if (e.tail < 0 || e.tail >= m_ || e.head < 0 || e.head >= m_) {
      throw InvalidInput("OrientedGraph: vertex index out of range");
    }
    if (e.tail == e.head) throw InvalidInput("OrientedGraph: self-loops are not allowed");
  }
}

OrientedGraph OrientedGraph::cycle(int m) {
  if (m < 3) throw InvalidInput("cycle: need m >= 3");
  std::vector<Edge> edges;
  for (int i = 0; i < m; ++i) edges.push_back({i, (i + 1) % m});
  return OrientedGraph(m, std::move(edges));
}

OrientedGraph OrientedGraph::complete(int m) {
  std::vector<Edge> edges;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) edges.push_back({i, j});
  }
  return OrientedGraph(m, std::move(edges));
}

OrientedGraph OrientedGraph::path(int m) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < m; ++i) edges.push_back({i, i + 1});
  return OrientedGraph(m, std::move(edges));
}

Eigen::MatrixXd OrientedGraph::incidence() const {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m_, num_edges());
  for (int e = 0; e < num_edges(); ++e) {
    b(edges_[e].tail, e) = 1.0;
    b(edges_[e].head, e) = -1.0;
  }
  return b;
}

bool OrientedGraph::connected() const {
  std::vector<int> parent(static_cast<std::size_t>(m_));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  int components = m_;
  for (const auto& e : edges_) {
    const int a = find(e.tail);
    const int b = find(e.head);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

OrientedGraph OrientedGraph::reversed() const {
  std::vector<Edge> flipped;
  flipped.reserve(edges_.size());
  for (const auto& e : edges_) flipped.push_back({e.head, e.tail});
  return OrientedGraph(m_, std::move(flipped));
}

bool is_psd(const SymMatrix& a, double tol) { return min_eigenvalue(a) >= -tol; }

EdgeWeights::EdgeWeights(int d, std::vector<SymMatrix> blocks) : d_(d), blocks_(std::move(blocks)) {
  check_blocks(blocks_, d_, "EdgeWeights");
  for (const auto& b : blocks_) {
    if (!is_psd(b)) throw InvalidInput("EdgeWeights: edge weight is not PSD");
  }
}

EdgeWeights EdgeWeights::zero(int d, int num_edges) {
  return EdgeWeights(d, std::vector<SymMatrix>(static_cast<std::size_t>(num_edges), SymMatrix::zero(d)));
}

PerturbationDirection::PerturbationDirection(int d, std::vector<SymMatrix> blocks)
    : d_(d), blocks_(std::move(blocks)), cone_(true) {
  check_blocks(blocks_, d_, "PerturbationDirection");
  for (const auto& b : blocks_) {
    if (!is_psd(b)) {
      cone_ = false;
      break;
    }
  }
}

PerturbationDirection PerturbationDirection::zero(int d, int num_edges) {
  return PerturbationDirection(d, std::vector<SymMatrix>(static_cast<std::size_t>(num_edges), SymMatrix::zero(d)));
}

PerturbationDirection PerturbationDirection::operator*(double s) const {
  std::vector<SymMatrix> scaled;
  scaled.reserve(blocks_.size());
  for (const auto& b : blocks_) scaled.push_back(b * s);
  return PerturbationDirection(d_, std::move(scaled));
}

PerturbationDirection PerturbationDirection::operator+(const PerturbationDirection& other) const {
  if (other.d_ != d_ || other.blocks_.size() != blocks_.size()) {
    throw InvalidInput("PerturbationDirection +: shape mismatch");
  }
  std::vector<SymMatrix> sum;
  sum.reserve(blocks_.size());
  for (std::size_t e = 0; e < blocks_.size(); ++e) sum.push_back(blocks_[e] + other.blocks_[e]);
  return PerturbationDirection(d_, std::move(sum));
}

SymMatrix block_laplacian(const OrientedGraph& graph, std::span<const SymMatrix> blocks, int d) {
  check_shape(graph, blocks.size(), "block_laplacian");
  const Index n = static_cast<Index>(graph.num_vertices()) * d;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto& w = blocks[static_cast<std::size_t>(e)].matrix();
    if (w.rows() != d) throw InvalidInput("block_laplacian: block has wrong dimension");
    const Index i = static_cast<Index>(graph.edge(e).tail) * d;
    const Index j = static_cast<Index>(graph.edge(e).head) * d;
    l.block(i, i, d, d) += w;
    l.block(j, j, d, d) += w;
    l.block(i, j, d, d) -= w;
    l.block(j, i, d, d) -= w;
  }
  return SymMatrix(l);
}

SymMatrix block_laplacian(const OrientedGraph& graph, const EdgeWeights& w) {
  return block_laplacian(graph, w.blocks(), w.block_dim());
}

SymMatrix block_laplacian(const OrientedGraph& graph, const PerturbationDirection& u) {
  return block_laplacian(graph, u.blocks(), u.block_dim());
}

double dirichlet_form(const OrientedGraph& graph, const EdgeWeights& w, const Eigen::VectorXd& x) {
  check_shape(graph, w.blocks().size(), "dirichlet_form");
  const int d = w.block_dim();
  if (x.size() != static_cast<Index>(graph.num_vertices()) * d) {
    throw InvalidInput("dirichlet_form: vector length must be m*d");
  }
  double total = 0.0;
  for (int e = 0; e < graph.num_edges(); ++e) {
    const Eigen::VectorXd diff =
        x.segment(static_cast<Index>(graph.edge(e).tail) * d, d) - x.segment(static_cast<Index>(graph.edge(e).head) * d, d);
    total += diff.dot(w.block(e).matrix() * diff);
  }
  return total;
}

ModelContext::ModelContext(OrientedGraph graph, EdgeWeights w, std::optional<SpdMatrix> r)
    : graph_(std::move(graph)),
      w_(std::move(w)),
      r_(r ? std::move(*r)
           : SpdMatrix(SymMatrix::identity(static_cast<Index>(graph_.num_vertices()) * w_.block_dim()) *
                       kDefaultRegularizer)),
      x_([&] {
        check_shape(graph_, w_.blocks().size(), "ModelContext");
        if (r_.dim() != static_cast<Index>(graph_.num_vertices()) * w_.block_dim()) {
          throw InvalidInput("ModelContext: regularizer must be (m*d) x (m*d)");
        }
        return SpdMatrix(block_laplacian(graph_, w_) + r_.sym());
      }()),
      x_inv_(x_.inverse()) {}

ModelContext ModelContext::shifted(const PerturbationDirection& u, double eps) const {
  if (u.block_dim() != block_dim() || u.size() != w_.size()) {
    throw InvalidInput("ModelContext::shifted: direction shape mismatch");
  }
  std::vector<SymMatrix> blocks;
  blocks.reserve(w_.blocks().size());
  for (int e = 0; e < w_.size(); ++e) blocks.push_back(w_.block(e) + u.block(e) * eps);
  return ModelContext(graph_, EdgeWeights(block_dim(), std::move(blocks)), r_);
}

double energy_phi(const ModelContext& ctx) { return -ctx.x().logdet(); }

double dir_deriv_phi(const ModelContext& ctx, const PerturbationDirection& u) {
  return -resolvent_product(ctx, u).trace();
}

double pullback_metric(const ModelContext& ctx, const PerturbationDirection& u,
                       const PerturbationDirection& v) {
  const Eigen::MatrixXd a = resolvent_product(ctx, u);
  const Eigen::MatrixXd b = resolvent_product(ctx, v);
  // tr(A B) without forming the product.
  return a.cwiseProduct(b.transpose()).sum();
}

DeterminantDerivatives determinant_derivatives(const ModelContext& ctx,
                                               const PerturbationDirection& u,
                                               const PerturbationDirection& v) {
  const Eigen::MatrixXd a = resolvent_product(ctx, u);
  const Eigen::MatrixXd b = resolvent_product(ctx, v);
  const double tr_u = a.trace();
  const double tr_v = b.trace();
  const double metric = a.cwiseProduct(b.transpose()).sum();
  DeterminantDerivatives out;
  out.f = std::exp(ctx.x().logdet());
  out.d_u = out.f * tr_u;
  out.d_v = out.f * tr_v;
  out.d_uv = out.f * (tr_u * tr_v - metric);
  out.metric = metric;
  return out;
}

double rayleigh_residual(const ModelContext& ctx, const PerturbationDirection& u,
                         const PerturbationDirection& v) {
  const auto dd = determinant_derivatives(ctx, u, v);
  return dd.d_u * dd.d_v - dd.f * dd.d_uv - dd.f * dd.f * dd.metric;
}

PerturbationDirection rank_one_direction(int num_edges, int edge_index, const Eigen::VectorXd& u) {
  if (edge_index < 0 || edge_index >= num_edges) throw InvalidInput("rank_one_direction: bad edge index");
  if (u.size() < 1 || !u.allFinite() || u.squaredNorm() == 0.0) {
    throw InvalidInput("rank_one_direction: u must be a finite nonzero vector");
  }
  const int d = static_cast<int>(u.size());
  std::vector<SymMatrix> blocks(static_cast<std::size_t>(num_edges), SymMatrix::zero(d));
  blocks[static_cast<std::size_t>(edge_index)] = SymMatrix(u * u.transpose());
  return PerturbationDirection(d, std::move(blocks));
}

SymMatrix rank_one_lift(const OrientedGraph& graph, int edge_index, const Eigen::VectorXd& u) {
  if (edge_index < 0 || edge_index >= graph.num_edges()) throw InvalidInput("rank_one_lift: bad edge index");
  const Eigen::VectorXd b = graph.incidence().col(edge_index);
  const Index d = u.size();
  Eigen::VectorXd v(b.size() * d);
  for (Index i = 0; i < b.size(); ++i) v.segment(i * d, d) = b(i) * u;
  return SymMatrix(v * v.transpose());
}

std::int64_t matrix_tree_check(const OrientedGraph& graph) {
  if (!graph.connected()) throw InvalidInput("matrix_tree_check: graph is disconnected");
  const int m = graph.num_vertices();
  if (m == 1) return 1;
  const EdgeWeights unit(1, std::vector<SymMatrix>(static_cast<std::size_t>(graph.num_edges()), SymMatrix::identity(1)));
  const Eigen::MatrixXd l = block_laplacian(graph, unit).matrix();
  const SpdMatrix reduced(Eigen::MatrixXd(l.bottomRightCorner(m - 1, m - 1)));
  return std::llround(std::exp(reduced.logdet()));
}

std::pair<OrientedGraph, EdgeWeights> read_edge_list(std::istream& in) {
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw InvalidInput("edge list: missing header");
  int m = 0;
  int d = 0;
  {
    std::istringstream header(lines.front());
    if (!(header >> m >> d) || m < 1 || d < 1) throw InvalidInput("edge list: header must be 'm d'");
  }
  std::vector<Edge> edges;
  std::vector<SymMatrix> blocks;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    std::istringstream row(lines[k]);
    Edge e;
    if (!(row >> e.tail >> e.head)) throw InvalidInput("edge list: bad edge line " + std::to_string(k));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        if (!(row >> w(i, j))) throw InvalidInput("edge list: missing weight entries on line " + std::to_string(k));
        w(j, i) = w(i, j);
      }
    }
    std::string extra;
    if (row >> extra) throw InvalidInput("edge list: trailing data on line " + std::to_string(k));
    edges.push_back(e);
    blocks.emplace_back(w);
  }
  OrientedGraph graph(m, std::move(edges));
  EdgeWeights weights(d, std::move(blocks));
  return {std::move(graph), std::move(weights)};
}

std::pair<OrientedGraph, EdgeWeights> read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open edge list file: " + path);
  return read_edge_list(in);
}

void write_edge_list(std::ostream& out, const OrientedGraph& graph, const EdgeWeights& w) {
  const int d = w.block_dim();
  out << graph.num_vertices() << ' ' << d << '\n';
  const auto old_precision = out.precision(17);
  for (int e = 0; e < graph.num_edges(); ++e) {
    out << graph.edge(e).tail << ' ' << graph.edge(e).head;
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) out << ' ' << w.block(e)(i, j);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace conegeo
