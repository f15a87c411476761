#pragma once

// Geometry validation on PSD edge perturbations: exact log-det curvature
// s(D) = tr(X^{-1} D X^{-1} D) against a second-order finite difference,
// stability-margin probing, and sensitivity-mass capture curves.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "conegeo/psdgraph.hpp"

namespace conegeo {

/// Perturbation family together with the lifted operators D_i = L(U_i).
struct ProbeSet {
  std::vector<PerturbationDirection> directions;
  std::vector<SymMatrix> lifted;
  std::vector<int> edges;                // support edge of each rank-one probe
  std::vector<Eigen::VectorXd> vectors;  // u of each rank-one probe

  static ProbeSet rank_one(const OrientedGraph& graph, std::vector<int> edges,
                           std::vector<Eigen::VectorXd> vectors);
  int size() const { return static_cast<int>(directions.size()); }
};

/// Probes u uniform on the unit sphere of R^d, edges assigned round-robin.
ProbeSet sample_rank_one_probes(const OrientedGraph& graph, int d, int count, std::uint64_t seed);

/// tr(X^{-1} D X^{-1} D) = |X^{-1/2} D X^{-1/2}|_F^2.
double metric_score(const SpdMatrix& x, const SymMatrix& delta);

/// [phi(X + eps D) - 2 phi(X) + phi(X - eps D)] / eps^2 with phi = -log det.
/// Throws StepTooLarge when X - eps D (or X + eps D) is not positive definite.
double fd_curvature(const SpdMatrix& x, const SymMatrix& delta, double eps);

struct FdResult {
  double value = 0.0;
  double eps = 0.0;  // step actually used
};

/// fd_curvature with eps halved until both shifted points are positive definite.
FdResult fd_curvature_adaptive(const SpdMatrix& x, const SymMatrix& delta, double eps, int max_halvings = 40);

/// lambda_min(X(W + eps U)) - lambda_min(X(W)).
double stability_margin_change(const ModelContext& ctx, const PerturbationDirection& u, double eps);

struct CaptureCurveResult {
  std::vector<int> k_values;
  std::vector<double> metric_curve;
  std::vector<double> oracle_curve;
  std::vector<double> random_curve;
};

inline constexpr int kRandomCaptureDraws = 200;

/// Captured predicted mass under the predicted ranking, under the oracle
/// ranking, and averaged over random selections (prefixes of kRandomCaptureDraws
/// uniform permutations, so every k uses uniform k-subsets).
CaptureCurveResult capture_curves(const std::vector<double>& scores_pred,
                                  const std::vector<double>& scores_oracle, std::uint64_t rng_seed);

/// Kendall tau-b rank correlation.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);
/// Spearman rank correlation (average ranks for ties).
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

struct ValidationConfig {
  int num_vertices = 4;  // cycle graph
  int d = 3;
  int num_probes = 60;
  double eps = 1e-4;
  double margin_eps = 1e-2;
  double regularizer = kDefaultRegularizer;
  /// Extra weight on vertex 0 of R (R = delta I + g e_0 e_0^T (x) I). Zero keeps R = delta I.
  double ground_weight = 1.0;
  std::uint64_t seed = 20240601;
  /// Edge-list file replacing the random cycle model when non-empty.
  std::string graph_file;
};

struct CalibrationRow {
  int probe_id = 0;
  int edge = 0;
  Eigen::VectorXd u;
  double s_delta = 0.0;
  double fd_delta = 0.0;
  double eps = 0.0;
  double margin_change = 0.0;
};

struct ValidationReport {
  std::vector<CalibrationRow> rows;
  CaptureCurveResult capture;
  double max_relative_deviation = 0.0;
  double kendall_tau = 0.0;
  double margin_spearman = 0.0;
};

/// Random PSD edge weights W_e = G G^T / d with Gaussian G.
EdgeWeights sample_edge_weights(const OrientedGraph& graph, int d, std::uint64_t seed);

/// Builds the validation model (cycle graph with random weights, or graph_file, plus regularizer).
ModelContext validation_model(const ValidationConfig& cfg);

ValidationReport run_validation_experiment(const ValidationConfig& cfg);

/// probe_id,edge,s_delta,fd_delta,eps
void write_calibration_csv(std::ostream& out, const ValidationReport& report);
/// k,metric,oracle,random
void write_capture_csv(std::ostream& out, const CaptureCurveResult& capture);
/// probe_id,edge,u_0..u_{d-1},s_delta,margin_change
void write_probes_csv(std::ostream& out, const ValidationReport& report);

}  // namespace conegeo
