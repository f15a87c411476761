#pragma once

// Intrinsic Gibbs target pi(dX) ~ exp(-Phi(X)) vol_g(dX) on the SPD cone and
// Metropolis-adjusted Langevin kernels that share the same MH correction and
// differ only in their drift (grad Phi Euclidean, grad_g Phi = X grad Phi X):
//
//   geom_mala               M_X = -h X^{-1/2} grad_g Phi X^{-1/2}
//   naive_euclid_drift      M_X = -h grad_g Phi   (ambient gradient, not whitened)
//   naive_congruence_drift  M_X = -h X^{-1/2} grad Phi X^{-1/2}
//
// A proposal is S = M_X + sqrt(2h) Z, Y = X^{1/2} exp(S) X^{1/2}. Its density
// with respect to vol_g is the Gaussian density of S divided by the
// exponential-map Jacobian j(S).

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "conegeo/spdgeo.hpp"

namespace conegeo {

enum class Kernel { geom_mala, naive_euclid_drift, naive_congruence_drift };

std::string to_string(Kernel k);
Kernel parse_kernel(const std::string& name);

/// Phi(X) = lambda/2 d_AI(X, X0)^2 - beta log det X + kappa/2 (tr X - 1)^2
struct PotentialParams {
  double lambda;
  double beta;
  double kappa;
  SpdMatrix x0;

  PotentialParams(double lambda, double beta, double kappa, SpdMatrix x0);

  /// lambda = 6, beta = 1, kappa = 5, X0 = 0.4 I_d.
  static PotentialParams defaults(int d = 3);
};

struct SamplerConfig {
  int d = 3;
  double h = 0.05;
  int n_steps = 20000;
  int n_chains = 4;
  double burn_in_fraction = 0.5;
  std::uint64_t seed = 1;
  Kernel kernel = Kernel::geom_mala;
  bool save_states = true;

  void validate() const;
  int burn_in() const { return static_cast<int>(burn_in_fraction * n_steps); }
};

using Rng = std::mt19937_64;

/// Per-chain stream derived from (seed, chain_id).
Rng chain_rng(std::uint64_t seed, int chain_id);

struct PotentialTerms {
  double distance = 0.0;  // lambda/2 d^2
  double logdet = 0.0;    // -beta log det X
  double trace = 0.0;     // kappa/2 (tr X - 1)^2
  double total() const { return distance + logdet + trace; }
};

struct GradientTerms {
  SymMatrix distance;
  SymMatrix logdet;
  SymMatrix trace;
  SymMatrix total() const { return distance + logdet + trace; }
};

PotentialTerms potential_terms(const SpdFrame& x, const PotentialParams& p);
double potential(const SpdMatrix& x, const PotentialParams& p);

/// Riemannian gradient X (grad Phi) X, split by potential term.
GradientTerms riemannian_grad_terms(const SpdFrame& x, const PotentialParams& p);
SymMatrix riemannian_grad(const SpdMatrix& x, const PotentialParams& p);

SymMatrix drift_S(const SpdFrame& x, const PotentialParams& p, double h, Kernel kernel);
SymMatrix drift_S(const SpdMatrix& x, const PotentialParams& p, double h, Kernel kernel);

/// log of the N(mean, 2h I) density at s in orthonormal coordinates of Sym(d).
double gaussian_log_density(const SymMatrix& s, const SymMatrix& mean, double h);

struct Proposal {
  SpdMatrix y;
  SymMatrix s;
};

/// Throws StepTooLarge when exp_map rejects the increment.
Proposal propose(const SpdMatrix& x, const PotentialParams& p, const SamplerConfig& cfg, Rng& rng);

/// log q(X -> Y) with respect to vol_g.
double log_proposal_density(const SpdMatrix& x, const SpdMatrix& y, const PotentialParams& p,
                            const SamplerConfig& cfg);

/// -Phi(Y) + Phi(X) + log q(Y -> X) - log q(X -> Y).
double log_acceptance_ratio(const SpdMatrix& x, const SpdMatrix& y, const PotentialParams& p,
                            const SamplerConfig& cfg);
double acceptance_probability(const SpdMatrix& x, const SpdMatrix& y, const PotentialParams& p,
                              const SamplerConfig& cfg);

struct Observables {
  double trace = 0.0;
  double logdet = 0.0;
  double lambda_min = 0.0;
  double dist_sq = 0.0;  // d_AI(X, X0)^2
};

Observables observe(const SpdMatrix& x, const SpdFrame& x0);

struct StepResult {
  SpdMatrix next;
  bool accepted = false;
  double accept_prob = 0.0;
  bool numeric_failure = false;
  Observables obs;
};

/// One Metropolis-adjusted step; numeric failures are counted as rejections.
StepResult mh_step(const SpdMatrix& x, const PotentialParams& p, const SamplerConfig& cfg, Rng& rng);

struct ChainTrace {
  Kernel kernel = Kernel::geom_mala;
  int chain_id = 0;
  int d = 0;
  int burn_in = 0;  // leading steps flagged as burn-in; not removed
  std::vector<std::uint8_t> accepted;
  std::vector<Observables> obs;
  std::vector<std::int64_t> wall_ns;    // elapsed since chain start after each step
  std::vector<Eigen::VectorXd> states;  // upper-triangular entries, row-major; optional
  double wall_seconds = 0.0;
  int numeric_failures = 0;

  int n_steps() const { return static_cast<int>(accepted.size()); }
  double acceptance_rate() const;
  /// One observable over the kept (post-burn-in) steps.
  std::vector<double> kept(double Observables::*field) const;
  SpdMatrix state(int step) const;
};

std::vector<ChainTrace> run_chains(const PotentialParams& p, const SamplerConfig& cfg);

/// X / tr(X).
SpdMatrix normalize_trace_one(const SpdMatrix& x);

/// step,accepted,trace,logdet,lambda_min,dist_sq,wall_ns[,x_i_j...]
void write_trace_csv(std::ostream& out, const ChainTrace& trace);
ChainTrace read_trace_csv(std::istream& in, Kernel kernel, int chain_id, int burn_in);
std::string trace_file_name(Kernel kernel, int chain_id);

}  // namespace conegeo
