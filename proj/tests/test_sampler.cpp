#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "conegeo/diagnostics.hpp"
#include "conegeo/error.hpp"
#include "conegeo/sampler.hpp"

using namespace conegeo;

namespace {

constexpr Kernel kAllKernels[] = {Kernel::geom_mala, Kernel::naive_euclid_drift, Kernel::naive_congruence_drift};

Eigen::MatrixXd gaussian_matrix(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
  return a;
}

SpdMatrix random_spd(int n, std::mt19937_64& rng) {
  const Eigen::MatrixXd g = gaussian_matrix(n, rng);
  return SpdMatrix(Eigen::MatrixXd(0.3 * g * g.transpose() / n + 0.2 * Eigen::MatrixXd::Identity(n, n)));
}

SymMatrix random_sym(int n, std::mt19937_64& rng) { return SymMatrix(gaussian_matrix(n, rng)); }

Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(n, rng));
  return qr.householderQ();
}

SamplerConfig small_config(Kernel k, double h = 0.05) {
  SamplerConfig cfg;
  cfg.kernel = k;
  cfg.h = h;
  return cfg;
}

// -logdet straight from eigenvalues, independent of the cached Cholesky value.
double eig_logdet(const Eigen::MatrixXd& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
  return es.eigenvalues().array().log().sum();
}

// d_AI(X, X0)^2 from generalized eigenvalues of (X, X0).
double eig_dist_sq(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x0) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(x, x0);
  return es.eigenvalues().array().log().square().sum();
}

}  // namespace

TEST(Potential, HandCases) {
  const PotentialParams at_ref(6.0, 0.0, 0.0, SpdMatrix(SymMatrix::identity(3) * 0.4));
  EXPECT_NEAR(potential(at_ref.x0, at_ref), 0.0, 1e-14);

  const PotentialParams logdet_only(0.0, 1.7, 0.0, SpdMatrix::identity(3));
  EXPECT_NEAR(potential(SpdMatrix(SymMatrix::identity(3) * std::numbers::e), logdet_only), -1.7 * 3.0, 1e-13);
}

TEST(Potential, TermsMatchIndependentOracles) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const SpdMatrix x0 = random_spd(3, rng);
    const PotentialParams p(2.5, 0.7, 3.0, x0);
    const SpdMatrix x = random_spd(3, rng);
    const PotentialTerms t = potential_terms(SpdFrame(x), p);
    EXPECT_NEAR(t.distance, 0.5 * 2.5 * eig_dist_sq(x.matrix(), x0.matrix()), 1e-10);
    EXPECT_NEAR(t.logdet, -0.7 * eig_logdet(x.matrix()), 1e-12);
    const double tr = x.matrix().trace();
    EXPECT_NEAR(t.trace, 1.5 * (tr - 1.0) * (tr - 1.0), 1e-12);
    EXPECT_NEAR(potential(x, p), t.total(), 1e-12);
  }
}

TEST(PotentialParams, RejectsInvalid) {
  EXPECT_THROW(PotentialParams(-1.0, 1.0, 1.0, SpdMatrix::identity(2)), InvalidInput);
  EXPECT_THROW(PotentialParams(1.0, -1.0, 1.0, SpdMatrix::identity(2)), InvalidInput);
  EXPECT_THROW(PotentialParams(1.0, 1.0, -1.0, SpdMatrix::identity(2)), InvalidInput);
}

TEST(RiemannianGrad, HandCases) {
  const PotentialParams at_ref(6.0, 0.0, 0.0, SpdMatrix(SymMatrix::identity(3) * 0.4));
  EXPECT_LE(riemannian_grad(at_ref.x0, at_ref).frobenius_norm(), 1e-13);

  std::mt19937_64 rng(102);
  const SpdMatrix x = random_spd(3, rng);
  const PotentialParams logdet_only(0.0, 1.3, 0.0, SpdMatrix::identity(3));
  EXPECT_LE((riemannian_grad(x, logdet_only).matrix() + 1.3 * x.matrix()).norm(), 1e-14);
}

TEST(RiemannianGrad, PairingMatchesFiniteDifferencesPerTerm) {
  std::mt19937_64 rng(103);
  const PotentialParams p(6.0, 1.0, 5.0, random_spd(3, rng));
  const double t = 1e-5;
  for (int dir = 0; dir < 20; ++dir) {
    const SpdMatrix x = random_spd(3, rng);
    const SymMatrix u = random_sym(3, rng) * 0.1;
    const GradientTerms g = riemannian_grad_terms(SpdFrame(x), p);
    const PotentialTerms plus = potential_terms(SpdFrame(SpdMatrix(x.sym() + u * t)), p);
    const PotentialTerms minus = potential_terms(SpdFrame(SpdMatrix(x.sym() - u * t)), p);
    const double fd[3] = {(plus.distance - minus.distance) / (2 * t), (plus.logdet - minus.logdet) / (2 * t),
                          (plus.trace - minus.trace) / (2 * t)};
    const SymMatrix* grads[3] = {&g.distance, &g.logdet, &g.trace};
    for (int k = 0; k < 3; ++k) {
      const double pairing = ai_inner(x, *grads[k], u);
      EXPECT_NEAR(pairing, fd[k], 1e-5 * std::max(1.0, std::abs(fd[k]))) << "dir " << dir << " term " << k;
    }
  }
}

TEST(Drift, ZeroGradientGivesZeroDrift) {
  const PotentialParams at_ref(6.0, 0.0, 0.0, SpdMatrix(SymMatrix::identity(3) * 0.4));
  for (Kernel k : kAllKernels) EXPECT_LE(drift_S(at_ref.x0, at_ref, 0.05, k).frobenius_norm(), 1e-13);
}

TEST(Drift, KernelsCoincideAtIdentity) {
  const PotentialParams p = PotentialParams::defaults(3);
  const SpdMatrix x = SpdMatrix::identity(3);
  const SymMatrix geom = drift_S(x, p, 0.05, Kernel::geom_mala);
  EXPECT_GT(geom.frobenius_norm(), 0.0);
  for (Kernel k : kAllKernels) EXPECT_LE((drift_S(x, p, 0.05, k) - geom).frobenius_norm(), 1e-13);
}

TEST(Drift, GeomIsTangentCoordinatesOfGradient) {
  std::mt19937_64 rng(104);
  const PotentialParams p = PotentialParams::defaults(3);
  for (int trial = 0; trial < 10; ++trial) {
    const SpdMatrix x = random_spd(3, rng);
    const SymMatrix m = drift_S(x, p, 0.05, Kernel::geom_mala);
    const SymMatrix g = riemannian_grad(x, p);
    // <S(grad), S(U)>_F = <grad, U>_g for any U, so compare via pairings.
    const SpdFrame f(x);
    for (int j = 0; j < 3; ++j) {
      const SymMatrix u = random_sym(3, rng);
      EXPECT_NEAR(frobenius_inner(m, f.to_tangent(u)), -0.05 * ai_inner(x, g, u), 1e-10);
    }
  }
}

TEST(Propose, MeanMatchesDriftByClt) {
  std::mt19937_64 rng(105);
  const PotentialParams p = PotentialParams::defaults(3);
  const SpdMatrix x = random_spd(3, rng);
  for (Kernel k : {Kernel::geom_mala, Kernel::naive_euclid_drift}) {
    const SamplerConfig cfg = small_config(k, 0.01);
    const Eigen::VectorXd drift = to_coords(drift_S(x, p, cfg.h, k));
    Rng r = chain_rng(7, 0);
    const int n = 100000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(drift.size());
    for (int i = 0; i < n; ++i) sum += to_coords(propose(x, p, cfg, r).s);
    const double se = std::sqrt(2.0 * cfg.h / n);
    for (Index a = 0; a < drift.size(); ++a) EXPECT_NEAR(sum(a) / n, drift(a), 4.0 * se) << to_string(k);
  }
}

TEST(Propose, ProposalIsExpOfIncrementAndDeterministic) {
  std::mt19937_64 rng(106);
  const PotentialParams p = PotentialParams::defaults(3);
  const SpdMatrix x = random_spd(3, rng);
  const SamplerConfig cfg = small_config(Kernel::geom_mala);
  Rng a = chain_rng(3, 1), b = chain_rng(3, 1);
  const Proposal pa = propose(x, p, cfg, a);
  const Proposal pb = propose(x, p, cfg, b);
  EXPECT_EQ(pa.y.matrix(), pb.y.matrix());
  EXPECT_LE((log_map(x, pa.y) - pa.s).frobenius_norm(), 1e-10);

  SamplerConfig tiny = cfg;
  tiny.h = 1e-12;
  const Proposal pt = propose(x, p, tiny, a);
  EXPECT_LE((pt.y.matrix() - x.matrix()).norm(), 1e-5);
}

TEST(Propose, TraceOfIncrementHasGaussianBinProbabilities) {
  // tr(S) is the sum of the d diagonal coordinates, so tr(S) ~ N(tr M, 2 h d).
  std::mt19937_64 rng(107);
  const PotentialParams p = PotentialParams::defaults(3);
  const SpdMatrix x = random_spd(3, rng);
  const SamplerConfig cfg = small_config(Kernel::geom_mala, 0.05);
  const double mu = drift_S(x, p, cfg.h, cfg.kernel).trace();
  const double sd = std::sqrt(2.0 * cfg.h * 3.0);
  const double edges[] = {-1.5, -0.5, 0.5, 1.5};
  int counts[5] = {0, 0, 0, 0, 0};
  Rng r = chain_rng(11, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Proposal pr = propose(x, p, cfg, r);
    const double z = (log_map(x, pr.y).trace() - mu) / sd;
    int bin = 0;
    while (bin < 4 && z > edges[bin]) ++bin;
    ++counts[bin];
  }
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  double lo = 0.0;
  for (int b = 0; b < 5; ++b) {
    const double hi = b < 4 ? cdf(edges[b]) : 1.0;
    const double prob = hi - lo;
    EXPECT_NEAR(counts[b] / static_cast<double>(n), prob, 4.0 * std::sqrt(prob * (1 - prob) / n)) << "bin " << b;
    lo = hi;
  }
}

TEST(ProposalDensity, AtSamePointIsGaussianNormalizer) {
  const PotentialParams at_ref(6.0, 0.0, 0.0, SpdMatrix(SymMatrix::identity(3) * 0.4));
  const SamplerConfig cfg = small_config(Kernel::geom_mala, 0.05);
  const double expect = -3.0 * std::log(4.0 * std::numbers::pi * 0.05);
  EXPECT_NEAR(log_proposal_density(at_ref.x0, at_ref.x0, at_ref, cfg), expect, 1e-12);
}

TEST(ProposalDensity, OrthogonalCongruenceInvariant) {
  std::mt19937_64 rng(108);
  for (Kernel k : kAllKernels) {
    for (int trial = 0; trial < 10; ++trial) {
      const SpdMatrix x0 = random_spd(3, rng);
      const PotentialParams p(6.0, 1.0, 5.0, x0);
      const SpdMatrix x = random_spd(3, rng);
      const SpdMatrix y = random_spd(3, rng);
      const Eigen::MatrixXd q = random_orthogonal(3, rng);
      const PotentialParams pq(6.0, 1.0, 5.0, SpdMatrix(congruence(q, x0.sym())));
      const SamplerConfig cfg = small_config(k, 0.05);
      const double a = log_proposal_density(x, y, p, cfg);
      const double b = log_proposal_density(SpdMatrix(congruence(q, x.sym())), SpdMatrix(congruence(q, y.sym())), pq, cfg);
      EXPECT_NEAR(a, b, 1e-9 * (1.0 + std::abs(a))) << to_string(k);
    }
  }
}

TEST(MhStep, DetailedBalanceIdentity) {
  std::mt19937_64 rng(109);
  const PotentialParams p = PotentialParams::defaults(3);
  for (Kernel k : kAllKernels) {
    const SamplerConfig cfg = small_config(k, 0.05);
    Rng r = chain_rng(13, 0);
    for (int pair = 0; pair < 100; ++pair) {
      const SpdMatrix x = random_spd(3, rng);
      const SpdMatrix y = propose(x, p, cfg, r).y;
      const double lxy = log_acceptance_ratio(x, y, p, cfg);
      const double lyx = log_acceptance_ratio(y, x, p, cfg);
      const double lhs = -potential(x, p) + log_proposal_density(x, y, p, cfg) + std::min(0.0, lxy);
      const double rhs = -potential(y, p) + log_proposal_density(y, x, p, cfg) + std::min(0.0, lyx);
      // |exp(lhs - rhs) - 1| <= 1e-10
      EXPECT_LE(std::abs(std::expm1(lhs - rhs)), 1e-10) << to_string(k) << " pair " << pair;
    }
  }
}

TEST(MhStep, AcceptanceProbabilityInUnitInterval) {
  std::mt19937_64 rng(110);
  const PotentialParams p = PotentialParams::defaults(3);
  for (Kernel k : kAllKernels) {
    SamplerConfig cfg = small_config(k, 0.3);
    Rng r = chain_rng(17, 0);
    SpdMatrix x = random_spd(3, rng);
    for (int step = 0; step < 200; ++step) {
      const StepResult res = mh_step(x, p, cfg, r);
      EXPECT_GE(res.accept_prob, 0.0);
      EXPECT_LE(res.accept_prob, 1.0);
      x = res.next;
    }
  }
}

TEST(MhStep, EqualPotentialAndSymmetricProposalAcceptsSurely) {
  // Zero potential: no drift, Phi constant, so only the Jacobian-corrected
  // Gaussian ratio remains and it is symmetric (T = -S congruent).
  const PotentialParams flat(0.0, 0.0, 0.0, SpdMatrix::identity(3));
  std::mt19937_64 rng(111);
  const SamplerConfig cfg = small_config(Kernel::geom_mala, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    const SpdMatrix x = random_spd(3, rng);
    Rng r = chain_rng(19, trial);
    const SpdMatrix y = propose(x, flat, cfg, r).y;
    EXPECT_NEAR(log_acceptance_ratio(x, y, flat, cfg), 0.0, 1e-10);
  }
}

TEST(RunChains, TinyStepAcceptsAndCountsMatch) {
  SamplerConfig cfg = small_config(Kernel::geom_mala, 1e-10);
  cfg.n_steps = 1;
  cfg.n_chains = 4;
  const auto traces = run_chains(PotentialParams::defaults(3), cfg);
  ASSERT_EQ(traces.size(), 4u);
  for (const auto& t : traces) {
    EXPECT_EQ(t.n_steps(), 1);
    EXPECT_EQ(t.acceptance_rate(), 1.0);
  }
}

TEST(RunChains, DeterministicAndAcceptanceCountReproducesRate) {
  SamplerConfig cfg = small_config(Kernel::naive_euclid_drift, 0.05);
  cfg.n_steps = 500;
  cfg.n_chains = 3;
  cfg.seed = 42;
  const PotentialParams p = PotentialParams::defaults(3);
  const auto a = run_chains(p, cfg);
  const auto b = run_chains(p, cfg);
  for (std::size_t c = 0; c < a.size(); ++c) {
    EXPECT_EQ(a[c].accepted, b[c].accepted);
    ASSERT_EQ(a[c].states.size(), b[c].states.size());
    for (std::size_t i = 0; i < a[c].states.size(); ++i) EXPECT_EQ(a[c].states[i], b[c].states[i]);
    long count = 0;
    for (auto f : a[c].accepted) count += f;
    EXPECT_EQ(static_cast<double>(count) / cfg.n_steps, a[c].acceptance_rate());
    EXPECT_EQ(a[c].burn_in, 250);
    EXPECT_EQ(a[c].kept(&Observables::logdet).size(), 250u);
  }
  EXPECT_NE(a[0].accepted, a[1].accepted);
}

TEST(RunChains, ObservablesMatchStoredStates) {
  SamplerConfig cfg = small_config(Kernel::geom_mala, 0.05);
  cfg.n_steps = 50;
  cfg.n_chains = 1;
  const PotentialParams p = PotentialParams::defaults(3);
  const ChainTrace t = run_chains(p, cfg)[0];
  for (int k = 0; k < t.n_steps(); ++k) {
    const Eigen::MatrixXd x = t.state(k).matrix();
    EXPECT_NEAR(t.obs[k].trace, x.trace(), 1e-12);
    EXPECT_NEAR(t.obs[k].logdet, eig_logdet(x), 1e-12);
    EXPECT_NEAR(t.obs[k].dist_sq, eig_dist_sq(x, p.x0.matrix()), 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
    EXPECT_NEAR(t.obs[k].lambda_min, es.eigenvalues()(0), 1e-13);
  }
}

TEST(RunChains, LargeLambdaConcentratesAtLocalGaussianValue) {
  // Target exp(-lambda/2 d^2) vol_g around X0 = I. In normal coordinates the
  // law is N(0, I/lambda) reweighted by j(S); the oracle is self-normalized
  // importance sampling of |S|^2 under that Gaussian.
  const double lambda = 100.0;
  const int d = 3;
  const int n = d * (d + 1) / 2;
  std::mt19937_64 rng(112);
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(lambda));
  const int draws = 400000;
  double sw = 0.0, swf = 0.0, swff = 0.0, sww = 0.0;
  for (int i = 0; i < draws; ++i) {
    Eigen::VectorXd c(n);
    for (int a = 0; a < n; ++a) c(a) = nd(rng);
    const double w = std::exp(exp_jacobian_log(from_coords(c)));
    const double f = c.squaredNorm();
    sw += w;
    swf += w * f;
    swff += w * f * f;
    sww += w * w;
  }
  const double oracle = swf / sw;
  const double oracle_var = (swff / sw - oracle * oracle) * sww / (sw * sw);
  EXPECT_NEAR(oracle, n / lambda, 0.05 * n / lambda);

  SamplerConfig cfg = small_config(Kernel::geom_mala, 0.002);
  cfg.n_steps = 20000;
  cfg.n_chains = 4;
  cfg.seed = 5;
  const PotentialParams p(lambda, 0.0, 0.0, SpdMatrix::identity(d));
  const auto traces = run_chains(p, cfg);
  std::vector<std::vector<double>> kept;
  std::vector<double> pooled;
  for (const auto& t : traces) {
    kept.push_back(t.kept(&Observables::dist_sq));
    pooled.insert(pooled.end(), kept.back().begin(), kept.back().end());
  }
  const double m = sample_mean(pooled);
  const double se = std::hypot(mcse(pooled, ess_pooled(kept)), std::sqrt(oracle_var));
  EXPECT_NEAR(m, oracle, 3.0 * se);
}

TEST(NormalizeTraceOne, Properties) {
  const SpdMatrix i3 = normalize_trace_one(SpdMatrix::identity(3));
  EXPECT_LE((i3.matrix() - Eigen::MatrixXd::Identity(3, 3) / 3.0).norm(), 1e-16);
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    const SpdMatrix x = random_spd(4, rng);
    const SpdMatrix n1 = normalize_trace_one(x);
    EXPECT_NEAR(n1.matrix().trace(), 1.0, 1e-14);
    EXPECT_LE((normalize_trace_one(n1).matrix() - n1.matrix()).norm(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(x.matrix()), en(n1.matrix());
    EXPECT_NEAR(en.eigenvalues()(0), ex.eigenvalues()(0) / x.matrix().trace(), 1e-14);
  }
}

TEST(TraceCsv, RoundTrip) {
  SamplerConfig cfg = small_config(Kernel::geom_mala, 0.05);
  cfg.n_steps = 40;
  cfg.n_chains = 1;
  const ChainTrace t = run_chains(PotentialParams::defaults(3), cfg)[0];
  std::stringstream ss;
  write_trace_csv(ss, t);
  const ChainTrace back = read_trace_csv(ss, t.kernel, 0, t.burn_in);
  ASSERT_EQ(back.n_steps(), t.n_steps());
  EXPECT_EQ(back.accepted, t.accepted);
  EXPECT_EQ(back.wall_ns, t.wall_ns);
  EXPECT_EQ(back.d, 3);
  for (int k = 0; k < t.n_steps(); ++k) {
    EXPECT_EQ(back.obs[k].trace, t.obs[k].trace);
    EXPECT_EQ(back.obs[k].logdet, t.obs[k].logdet);
    EXPECT_EQ(back.obs[k].lambda_min, t.obs[k].lambda_min);
    EXPECT_EQ(back.obs[k].dist_sq, t.obs[k].dist_sq);
    EXPECT_EQ(back.states[k], t.states[k]);
  }
}

TEST(Kernels, NamesRoundTrip) {
  for (Kernel k : kAllKernels) EXPECT_EQ(parse_kernel(to_string(k)), k);
  EXPECT_THROW(parse_kernel("hmc"), InvalidInput);
}

TEST(SamplerConfig, Validation) {
  SamplerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.h = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg.h = 0.05;
  cfg.n_steps = 0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg.n_steps = 10;
  cfg.burn_in_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}
