#include "conegeo/geoval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>

#include "conegeo/csv.hpp"

namespace conegeo {

namespace {

std::vector<int> order_descending(const std::vector<double>& scores) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Stable: ties keep index order, so curves are deterministic.
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return idx;
}

std::vector<double> cumulative_mass(const std::vector<double>& mass, const std::vector<int>& order,
                                    double total) {
  std::vector<double> out;
  out.reserve(order.size());
  double acc = 0.0;
  for (int i : order) {
    acc += mass[static_cast<std::size_t>(i)];
    out.push_back(acc / total);
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// -log det in extended precision, so the second difference is not swamped by
// cancellation at small eps. StepTooLarge when the point left the cone.
long double phi_logdet(const MatrixXld& x) {
  Eigen::LLT<MatrixXld> llt(x);
  if (llt.info() != Eigen::Success) throw StepTooLarge("fd_curvature: shifted point is not positive definite");
  const auto& l = llt.matrixLLT();
  long double sum = 0.0L;
  for (Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0L)) throw StepTooLarge("fd_curvature: shifted point is not positive definite");
    sum += std::log(l(i, i));
  }
  return -2.0L * sum;
}

}  // namespace

ProbeSet ProbeSet::rank_one(const OrientedGraph& graph, std::vector<int> edges,
                            std::vector<Eigen::VectorXd> vectors) {
  if (edges.size() != vectors.size()) throw InvalidInput("ProbeSet: edges and vectors differ in length");
  ProbeSet set;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    set.directions.push_back(rank_one_direction(graph.num_edges(), edges[i], vectors[i]));
    set.lifted.push_back(block_laplacian(graph, set.directions.back()));
  }
  set.edges = std::move(edges);
  set.vectors = std::move(vectors);
  return set;
}

ProbeSet sample_rank_one_probes(const OrientedGraph& graph, int d, int count, std::uint64_t seed) {
  if (count < 1 || d < 1) throw InvalidInput("sample_rank_one_probes: need count >= 1 and d >= 1");
  if (graph.num_edges() < 1) throw InvalidInput("sample_rank_one_probes: graph has no edges");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> edges;
  std::vector<Eigen::VectorXd> vectors;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd u(d);
    do {
      for (int k = 0; k < d; ++k) u(k) = normal(rng);
    } while (u.norm() < 1e-8);
    edges.push_back(i % graph.num_edges());
    vectors.push_back(u / u.norm());
  }
  return ProbeSet::rank_one(graph, std::move(edges), std::move(vectors));
}

double metric_score(const SpdMatrix& x, const SymMatrix& delta) {
  return x.whiten(delta).squaredNorm();
}

double fd_curvature(const SpdMatrix& x, const SymMatrix& delta, double eps) {
  if (delta.dim() != x.dim()) throw InvalidInput("fd_curvature: dimension mismatch");
  if (!(eps > 0.0)) throw InvalidInput("fd_curvature: eps must be positive");
  const MatrixXld xl = x.matrix().cast<long double>();
  const MatrixXld step = static_cast<long double>(eps) * delta.matrix().cast<long double>();
  const long double plus = phi_logdet(xl + step);
  const long double minus = phi_logdet(xl - step);
  const long double center = phi_logdet(xl);
  const long double e = eps;
  return static_cast<double>((plus - 2.0L * center + minus) / (e * e));
}

FdResult fd_curvature_adaptive(const SpdMatrix& x, const SymMatrix& delta, double eps, int max_halvings) {
  for (int i = 0; i <= max_halvings; ++i) {
    try {
      return FdResult{fd_curvature(x, delta, eps), eps};
    } catch (const StepTooLarge&) {
      eps *= 0.5;
    }
  }
  throw StepTooLarge("fd_curvature_adaptive: no admissible step found");
}

double stability_margin_change(const ModelContext& ctx, const PerturbationDirection& u, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("stability_margin_change: eps must be positive");
  if (!u.is_cone_direction()) throw InvalidInput("stability_margin_change: U must be a cone direction");
  const ModelContext moved = ctx.shifted(u, eps);
  return min_eigenvalue(moved.x().sym()) - min_eigenvalue(ctx.x().sym());
}

CaptureCurveResult capture_curves(const std::vector<double>& scores_pred,
                                  const std::vector<double>& scores_oracle, std::uint64_t rng_seed) {
  const std::size_t m = scores_pred.size();
  if (m < 1 || scores_oracle.size() != m) throw InvalidInput("capture_curves: need equal non-empty score vectors");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(scores_pred[i] >= 0.0) || !(scores_oracle[i] >= 0.0)) {
      throw InvalidInput("capture_curves: scores must be nonnegative");
    }
  }
  const double total = std::accumulate(scores_pred.begin(), scores_pred.end(), 0.0);
  if (!(total > 0.0)) throw InvalidInput("capture_curves: total predicted mass is zero");

  CaptureCurveResult out;
  out.k_values.resize(m);
  std::iota(out.k_values.begin(), out.k_values.end(), 1);
  out.metric_curve = cumulative_mass(scores_pred, order_descending(scores_pred), total);
  out.oracle_curve = cumulative_mass(scores_pred, order_descending(scores_oracle), total);

  out.random_curve.assign(m, 0.0);
  std::mt19937_64 rng(rng_seed);
  std::vector<int> perm(m);
  for (int draw = 0; draw < kRandomCaptureDraws; ++draw) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto curve = cumulative_mass(scores_pred, perm, total);
    for (std::size_t k = 0; k < m; ++k) out.random_curve[k] += curve[k];
  }
  for (auto& v : out.random_curve) v /= kRandomCaptureDraws;
  return out;
}

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidInput("kendall_tau: need two equal series of length >= 2");
  long long concordant = 0;
  long long discordant = 0;
  long long ties_a = 0;
  long long ties_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) {
        ++ties_a;
      } else if (db == 0.0) {
        ++ties_b;
      } else if ((da > 0.0) == (db > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n_a = static_cast<double>(concordant + discordant + ties_b);
  const double n_b = static_cast<double>(concordant + discordant + ties_a);
  if (n_a == 0.0 || n_b == 0.0) return 0.0;
  return static_cast<double>(concordant - discordant) / std::sqrt(n_a * n_b);
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidInput("spearman_rho: need two equal series of length >= 2");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const Eigen::Map<const Eigen::VectorXd> va(ra.data(), static_cast<Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> vb(rb.data(), static_cast<Index>(rb.size()));
  const Eigen::VectorXd ca = va.array() - va.mean();
  const Eigen::VectorXd cb = vb.array() - vb.mean();
  const double denom = ca.norm() * cb.norm();
  return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

EdgeWeights sample_edge_weights(const OrientedGraph& graph, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<SymMatrix> blocks;
  for (int e = 0; e < graph.num_edges(); ++e) {
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
    }
    blocks.emplace_back(g * g.transpose() / d);
  }
  return EdgeWeights(d, std::move(blocks));
}

ModelContext validation_model(const ValidationConfig& cfg) {
  if (!(cfg.regularizer > 0.0) || cfg.ground_weight < 0.0) {
    throw InvalidInput("validation: regularizer must be positive and ground weight nonnegative");
  }
  std::optional<std::pair<OrientedGraph, EdgeWeights>> loaded;
  if (!cfg.graph_file.empty()) {
    loaded = read_edge_list_file(cfg.graph_file);
    if (loaded->second.block_dim() != cfg.d) throw InvalidInput("validation: graph file block size differs from d");
  } else if (cfg.d < 1 || cfg.num_vertices < 3) {
    throw InvalidInput("validation: need d >= 1 and at least 3 vertices");
  }
  OrientedGraph graph = loaded ? loaded->first : OrientedGraph::cycle(cfg.num_vertices);
  EdgeWeights w = loaded ? loaded->second : sample_edge_weights(graph, cfg.d, cfg.seed);
  const Index n = static_cast<Index>(graph.num_vertices()) * cfg.d;
  Eigen::MatrixXd r = cfg.regularizer * Eigen::MatrixXd::Identity(n, n);
  r.topLeftCorner(cfg.d, cfg.d) += cfg.ground_weight * Eigen::MatrixXd::Identity(cfg.d, cfg.d);
  return ModelContext(std::move(graph), std::move(w), SpdMatrix(r));
}

ValidationReport run_validation_experiment(const ValidationConfig& cfg) {
  if (cfg.num_probes < 1) throw InvalidInput("validation: need at least one probe");
  if (!(cfg.eps > 0.0) || !(cfg.margin_eps > 0.0)) throw InvalidInput("validation: eps must be positive");
  const ModelContext ctx = validation_model(cfg);
  // Probe stream is decoupled from the weight stream.
  const ProbeSet probes = sample_rank_one_probes(ctx.graph(), cfg.d, cfg.num_probes, cfg.seed + 1);

  ValidationReport report;
  std::vector<double> pred;
  std::vector<double> oracle;
  std::vector<double> margins;
  for (int i = 0; i < probes.size(); ++i) {
    CalibrationRow row;
    row.probe_id = i;
    row.edge = probes.edges[i];
    row.u = probes.vectors[i];
    row.s_delta = metric_score(ctx.x(), probes.lifted[i]);
    const FdResult fd = fd_curvature_adaptive(ctx.x(), probes.lifted[i], cfg.eps);
    row.fd_delta = fd.value;
    row.eps = fd.eps;
    row.margin_change = stability_margin_change(ctx, probes.directions[i], cfg.margin_eps);
    const double rel = std::abs(row.fd_delta - row.s_delta) / row.s_delta;
    report.max_relative_deviation = std::max(report.max_relative_deviation, rel);
    pred.push_back(row.s_delta);
    oracle.push_back(std::max(row.fd_delta, 0.0));
    margins.push_back(std::abs(row.margin_change));
    report.rows.push_back(std::move(row));
  }
  report.capture = capture_curves(pred, oracle, cfg.seed + 2);
  if (pred.size() >= 2) {
    report.kendall_tau = kendall_tau(pred, oracle);
    report.margin_spearman = spearman_rho(margins, pred);
  } else {
    report.kendall_tau = 1.0;
    report.margin_spearman = 1.0;
  }
  return report;
}

void write_calibration_csv(std::ostream& out, const ValidationReport& report) {
  out << "probe_id,edge,s_delta,fd_delta,eps\n";
  for (const auto& r : report.rows) {
    out << r.probe_id << ',' << r.edge << ',' << csv::number(r.s_delta) << ',' << csv::number(r.fd_delta) << ','
        << csv::number(r.eps) << '\n';
  }
}

void write_capture_csv(std::ostream& out, const CaptureCurveResult& capture) {
  out << "k,metric,oracle,random\n";
  for (std::size_t i = 0; i < capture.k_values.size(); ++i) {
    out << capture.k_values[i] << ',' << csv::number(capture.metric_curve[i]) << ','
        << csv::number(capture.oracle_curve[i]) << ',' << csv::number(capture.random_curve[i]) << '\n';
  }
}

void write_probes_csv(std::ostream& out, const ValidationReport& report) {
  const Index d = report.rows.empty() ? 0 : report.rows.front().u.size();
  out << "probe_id,edge";
  for (Index k = 0; k < d; ++k) out << ",u_" << k;
  out << ",s_delta,margin_change\n";
  for (const auto& r : report.rows) {
    out << r.probe_id << ',' << r.edge;
    for (Index k = 0; k < d; ++k) out << ',' << csv::number(r.u(k));
    out << ',' << csv::number(r.s_delta) << ',' << csv::number(r.margin_change) << '\n';
  }
}

}  // namespace conegeo
