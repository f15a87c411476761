#include "conegeo/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <thread>

#include "conegeo/csv.hpp"

namespace conegeo {

namespace {

// Everything the MH step needs at one point, computed once.
struct PointEval {
  SpdFrame frame;
  double phi;
  SymMatrix drift;
};

PointEval evaluate(const SpdMatrix& x, const PotentialParams& p, double h, Kernel kernel) {
  SpdFrame frame(x);
  const double phi = potential_terms(frame, p).total();
  SymMatrix drift = drift_S(frame, p, h, kernel);
  return PointEval{std::move(frame), phi, std::move(drift)};
}

// log q(from -> to) given the tangent increment S with to = Exp_from(S).
double log_q(const PointEval& from, const SymMatrix& s, double h) {
  return gaussian_log_density(s, from.drift, h) - exp_jacobian_log(s);
}

SymMatrix standard_gaussian(int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(d * (d + 1) / 2);
  for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return from_coords(z);
}

Eigen::VectorXd upper_entries(const SpdMatrix& x) {
  const Index d = x.dim();
  Eigen::VectorXd v(d * (d + 1) / 2);
  Index k = 0;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i; j < d; ++j) v(k++) = x.matrix()(i, j);
  }
  return v;
}

struct StepOutcome {
  bool accepted = false;
  double accept_prob = 0.0;
  std::optional<std::string> failure;
};

// Draws Z then U, proposes, and applies the MH rule. On acceptance x and
// current move to the proposal; any library error becomes a rejection.
StepOutcome advance(SpdMatrix& x, std::optional<PointEval>& current, const PotentialParams& p,
                    const SamplerConfig& cfg, Rng& rng) {
  StepOutcome out;
  try {
    if (!current) current = evaluate(x, p, cfg.h, cfg.kernel);
    const SymMatrix s = current->drift + standard_gaussian(cfg.d, rng) * std::sqrt(2.0 * cfg.h);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double log_u = std::log(uniform(rng));
    SpdMatrix y = exp_map(current->frame, s);
    PointEval proposed = evaluate(y, p, cfg.h, cfg.kernel);
    const SymMatrix t = log_map(proposed.frame, x);
    const double log_ratio = -proposed.phi + current->phi + log_q(proposed, t, cfg.h) - log_q(*current, s, cfg.h);
    if (std::isnan(log_ratio)) throw StepTooLarge("NaN acceptance ratio");
    out.accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    if (log_u < log_ratio) {
      x = std::move(y);
      current = std::move(proposed);
      out.accepted = true;
    }
  } catch (const Error& e) {
    out.failure = e.what();
  }
  return out;
}

ChainTrace run_one_chain(const PotentialParams& p, const SamplerConfig& cfg, int chain_id) {
  ChainTrace trace;
  trace.kernel = cfg.kernel;
  trace.chain_id = chain_id;
  trace.d = cfg.d;
  trace.burn_in = cfg.burn_in();
  trace.accepted.reserve(static_cast<std::size_t>(cfg.n_steps));
  trace.obs.reserve(static_cast<std::size_t>(cfg.n_steps));
  trace.wall_ns.reserve(static_cast<std::size_t>(cfg.n_steps));

  Rng rng = chain_rng(cfg.seed, chain_id);
  const SpdFrame x0(p.x0);
  const auto start = std::chrono::steady_clock::now();

  SpdMatrix x = p.x0;
  std::optional<PointEval> current;
  for (int step = 0; step < cfg.n_steps; ++step) {
    const StepOutcome outcome = advance(x, current, p, cfg, rng);
    const bool accepted = outcome.accepted;
    if (outcome.failure) {
      if (trace.numeric_failures == 0) {
        std::clog << "warning: " << to_string(cfg.kernel) << " chain " << chain_id << " step " << step + 1
                  << ": numeric failure counted as rejection (" << *outcome.failure << ")\n";
      }
      ++trace.numeric_failures;
    }
    trace.accepted.push_back(accepted ? 1 : 0);
    trace.obs.push_back(observe(x, x0));
    if (cfg.save_states) trace.states.push_back(upper_entries(x));
    trace.wall_ns.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count());
  }
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

}  // namespace

std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::geom_mala: return "geom_mala";
    case Kernel::naive_euclid_drift: return "naive_euclid_drift";
    case Kernel::naive_congruence_drift: return "naive_congruence_drift";
  }
  return "unknown";
}

Kernel parse_kernel(const std::string& name) {
  if (name == "geom_mala" || name == "geom") return Kernel::geom_mala;
  if (name == "naive_euclid_drift" || name == "naive") return Kernel::naive_euclid_drift;
  if (name == "naive_congruence_drift") return Kernel::naive_congruence_drift;
  throw InvalidInput("unknown kernel '" + name +
                     "' (expected geom_mala, naive_euclid_drift or naive_congruence_drift)");
}

PotentialParams::PotentialParams(double lambda_, double beta_, double kappa_, SpdMatrix x0_)
    : lambda(lambda_), beta(beta_), kappa(kappa_), x0(std::move(x0_)) {
  if (!(lambda >= 0.0)) throw InvalidInput("potential: lambda must be >= 0");
  if (!(beta >= 0.0) || !(kappa >= 0.0)) throw InvalidInput("potential: beta and kappa must be >= 0");
}

PotentialParams PotentialParams::defaults(int d) {
  return PotentialParams(6.0, 1.0, 5.0, SpdMatrix(SymMatrix::identity(d) * 0.4));
}

void SamplerConfig::validate() const {
  if (d < 1) throw InvalidInput("sampler: d must be >= 1");
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("sampler: h must be > 0");
  if (n_steps < 1) throw InvalidInput("sampler: n_steps must be >= 1");
  if (n_chains < 1) throw InvalidInput("sampler: n_chains must be >= 1");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw InvalidInput("sampler: burn_in_fraction must lie in [0, 1)");
  }
}

Rng chain_rng(std::uint64_t seed, int chain_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain_id), 0x5eedu};
  return Rng(seq);
}

PotentialTerms potential_terms(const SpdFrame& x, const PotentialParams& p) {
  if (x.point().dim() != p.x0.dim()) throw InvalidInput("potential: dimension mismatch with X0");
  const double dist = ai_distance(x, p.x0);
  const double tr = x.point().sym().trace();
  PotentialTerms t;
  t.distance = 0.5 * p.lambda * dist * dist;
  t.logdet = -p.beta * x.point().logdet();
  t.trace = 0.5 * p.kappa * (tr - 1.0) * (tr - 1.0);
  return t;
}

double potential(const SpdMatrix& x, const PotentialParams& p) {
  return potential_terms(SpdFrame(x), p).total();
}

GradientTerms riemannian_grad_terms(const SpdFrame& x, const PotentialParams& p) {
  if (x.point().dim() != p.x0.dim()) throw InvalidInput("riemannian_grad: dimension mismatch with X0");
  const SymMatrix& xm = x.point().sym();
  // grad_g (1/2) d(., X0)^2 = -Log_X(X0) = -X^{1/2} log(X^{-1/2} X0 X^{-1/2}) X^{1/2}
  const SymMatrix log_x0 = log_map(x, p.x0);
  const double tr = xm.trace();
  GradientTerms g{
      x.from_tangent(log_x0) * (-p.lambda),
      xm * (-p.beta),
      SymMatrix(xm.matrix() * xm.matrix()) * (p.kappa * (tr - 1.0)),
  };
  return g;
}

SymMatrix riemannian_grad(const SpdMatrix& x, const PotentialParams& p) {
  return riemannian_grad_terms(SpdFrame(x), p).total();
}

SymMatrix drift_S(const SpdFrame& x, const PotentialParams& p, double h, Kernel kernel) {
  const SymMatrix grad_g = riemannian_grad_terms(x, p).total();
  switch (kernel) {
    case Kernel::geom_mala:
      return x.to_tangent(grad_g) * (-h);
    case Kernel::naive_euclid_drift:
      return grad_g * (-h);
    case Kernel::naive_congruence_drift: {
      // grad Phi = X^{-1} grad_g X^{-1}, so X^{-1/2} grad Phi X^{-1/2} = X^{-3/2} grad_g X^{-3/2}.
      const Eigen::MatrixXd inv32 = x.invsqrt().matrix() * x.point().inverse();
      return congruence(inv32, grad_g) * (-h);
    }
  }
  throw InvalidInput("drift_S: unknown kernel");
}

SymMatrix drift_S(const SpdMatrix& x, const PotentialParams& p, double h, Kernel kernel) {
  return drift_S(SpdFrame(x), p, h, kernel);
}

double gaussian_log_density(const SymMatrix& s, const SymMatrix& mean, double h) {
  const double n = static_cast<double>(s.dim() * (s.dim() + 1) / 2);
  const double sq = (s - mean).matrix().squaredNorm();
  return -0.5 * n * std::log(4.0 * std::numbers::pi * h) - sq / (4.0 * h);
}

Proposal propose(const SpdMatrix& x, const PotentialParams& p, const SamplerConfig& cfg, Rng& rng) {
  const SpdFrame frame(x);
  SymMatrix s = drift_S(frame, p, cfg.h, cfg.kernel) + standard_gaussian(static_cast<int>(x.dim()), rng) *
                                                           std::sqrt(2.0 * cfg.h);
  SpdMatrix y = exp_map(frame, s);
  return Proposal{std::move(y), std::move(s)};
}

double log_proposal_density(const SpdMatrix& x, const SpdMatrix& y, const PotentialParams& p,
                            const SamplerConfig& cfg) {
  const PointEval from = evaluate(x, p, cfg.h, cfg.kernel);
  return log_q(from, log_map(from.frame, y), cfg.h);
}

double log_acceptance_ratio(const SpdMatrix& x, const SpdMatrix& y, const PotentialParams& p,
                            const SamplerConfig& cfg) {
  const PointEval ex = evaluate(x, p, cfg.h, cfg.kernel);
  const PointEval ey = evaluate(y, p, cfg.h, cfg.kernel);
  const SymMatrix s = log_map(ex.frame, y);
  const SymMatrix t = log_map(ey.frame, x);
  return -ey.phi + ex.phi + log_q(ey, t, cfg.h) - log_q(ex, s, cfg.h);
}

double acceptance_probability(const SpdMatrix& x, const SpdMatrix& y, const PotentialParams& p,
                              const SamplerConfig& cfg) {
  const double r = log_acceptance_ratio(x, y, p, cfg);
  if (std::isnan(r)) return 0.0;
  return r >= 0.0 ? 1.0 : std::exp(r);
}

Observables observe(const SpdMatrix& x, const SpdFrame& x0) {
  Observables o;
  o.trace = x.sym().trace();
  o.logdet = x.logdet();
  o.lambda_min = min_eigenvalue(x.sym());
  const double dist = ai_distance(x0, x);
  o.dist_sq = dist * dist;
  return o;
}

StepResult mh_step(const SpdMatrix& x, const PotentialParams& p, const SamplerConfig& cfg, Rng& rng) {
  if (x.dim() != cfg.d) throw InvalidInput("mh_step: state dimension does not match cfg.d");
  SpdMatrix next = x;
  std::optional<PointEval> current;
  const StepOutcome outcome = advance(next, current, p, cfg, rng);
  if (outcome.failure) {
    std::clog << "warning: mh_step numeric failure counted as rejection (" << *outcome.failure << ")\n";
  }
  Observables obs = observe(next, SpdFrame(p.x0));
  return StepResult{std::move(next), outcome.accepted, outcome.accept_prob, outcome.failure.has_value(), obs};
}

double ChainTrace::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  std::size_t count = 0;
  for (auto a : accepted) count += a;
  return static_cast<double>(count) / static_cast<double>(accepted.size());
}

std::vector<double> ChainTrace::kept(double Observables::*field) const {
  std::vector<double> out;
  for (std::size_t i = static_cast<std::size_t>(std::max(burn_in, 0)); i < obs.size(); ++i) {
    out.push_back(obs[i].*field);
  }
  return out;
}

SpdMatrix ChainTrace::state(int step) const {
  const Eigen::VectorXd& v = states.at(static_cast<std::size_t>(step));
  Eigen::MatrixXd a(d, d);
  Index k = 0;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i; j < d; ++j) {
      a(i, j) = v(k);
      a(j, i) = v(k);
      ++k;
    }
  }
  return SpdMatrix(a);
}

std::vector<ChainTrace> run_chains(const PotentialParams& p, const SamplerConfig& cfg) {
  cfg.validate();
  if (p.x0.dim() != cfg.d) throw InvalidInput("run_chains: X0 dimension does not match d");
  std::vector<ChainTrace> traces(static_cast<std::size_t>(cfg.n_chains));
  // Chains are pulled from a shared counter; results are stored by chain id,
  // so scheduling never changes the output.
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(cfg.n_chains));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int c = next++; c < cfg.n_chains; c = next++) traces[static_cast<std::size_t>(c)] = run_one_chain(p, cfg, c);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return traces;
}

SpdMatrix normalize_trace_one(const SpdMatrix& x) { return SpdMatrix(x.sym() * (1.0 / x.sym().trace())); }

std::string trace_file_name(Kernel kernel, int chain_id) {
  return "trace_" + to_string(kernel) + "_chain" + std::to_string(chain_id) + ".csv";
}

void write_trace_csv(std::ostream& out, const ChainTrace& trace) {
  const bool states = !trace.states.empty();
  out << "step,accepted,trace,logdet,lambda_min,dist_sq,wall_ns";
  if (states) {
    for (int i = 0; i < trace.d; ++i) {
      for (int j = i; j < trace.d; ++j) out << ",x_" << i << '_' << j;
    }
  }
  out << '\n';
  for (int k = 0; k < trace.n_steps(); ++k) {
    const auto& o = trace.obs[static_cast<std::size_t>(k)];
    out << k + 1 << ',' << static_cast<int>(trace.accepted[static_cast<std::size_t>(k)]) << ','
        << csv::number(o.trace) << ',' << csv::number(o.logdet) << ',' << csv::number(o.lambda_min) << ','
        << csv::number(o.dist_sq) << ',' << trace.wall_ns[static_cast<std::size_t>(k)];
    if (states) {
      const auto& v = trace.states[static_cast<std::size_t>(k)];
      for (Index i = 0; i < v.size(); ++i) out << ',' << csv::number(v(i));
    }
    out << '\n';
  }
}

ChainTrace read_trace_csv(std::istream& in, Kernel kernel, int chain_id, int burn_in) {
  const csv::Table t = csv::read(in);
  const char* required[] = {"step", "accepted", "trace", "logdet", "lambda_min", "dist_sq", "wall_ns"};
  int col[7];
  for (int i = 0; i < 7; ++i) {
    col[i] = t.column(required[i]);
    if (col[i] < 0) throw InvalidInput(std::string("trace csv: missing column ") + required[i]);
  }
  std::vector<int> state_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c].rfind("x_", 0) == 0) state_cols.push_back(static_cast<int>(c));
  }
  ChainTrace trace;
  trace.kernel = kernel;
  trace.chain_id = chain_id;
  trace.burn_in = burn_in;
  if (!state_cols.empty()) {
    trace.d = static_cast<int>(dim_from_coord_count(static_cast<Index>(state_cols.size())));
  }
  for (const auto& row : t.rows) {
    trace.accepted.push_back(static_cast<std::uint8_t>(csv::to_double(row[col[1]]) != 0.0));
    Observables o;
    o.trace = csv::to_double(row[col[2]]);
    o.logdet = csv::to_double(row[col[3]]);
    o.lambda_min = csv::to_double(row[col[4]]);
    o.dist_sq = csv::to_double(row[col[5]]);
    trace.obs.push_back(o);
    trace.wall_ns.push_back(std::stoll(row[col[6]]));
    if (!state_cols.empty()) {
      Eigen::VectorXd v(static_cast<Index>(state_cols.size()));
      for (std::size_t i = 0; i < state_cols.size(); ++i) v(static_cast<Index>(i)) = csv::to_double(row[state_cols[i]]);
      trace.states.push_back(std::move(v));
    }
  }
  trace.wall_seconds = trace.wall_ns.empty() ? 0.0 : static_cast<double>(trace.wall_ns.back()) * 1e-9;
  return trace;
}

}  // namespace conegeo
