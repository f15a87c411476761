#pragma once

// MCMC diagnostics: split-Rhat, Geyer ESS, MCSE, cross-method z-scores,
// the empirical Poincare proxy
//   rho(h) = mean_i |grad_g h(X_i)|_g^2 / Var(h),
// and ECDF / histogram export for marginal overlays.

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conegeo/sampler.hpp"

namespace conegeo {

enum class Observable { trace, logdet, lambda_min, dist_sq };

inline constexpr std::array<Observable, 4> kCanonicalObservables = {
    Observable::logdet, Observable::lambda_min, Observable::dist_sq, Observable::trace};

std::string to_string(Observable o);
double Observables::*observable_field(Observable o);

/// Eigengap below which grad lambda_min is treated as undefined.
inline constexpr double kLambdaMinGapTolerance = 1e-6;

/// The canonical observables plus optional linear functionals tr(C X),
/// each with its Riemannian gradient and closed-form squared gradient norm.
class ObservableSet {
 public:
  explicit ObservableSet(SpdMatrix x0, std::vector<SymMatrix> linear = {});

  const SpdFrame& reference() const { return x0_; }
  const std::vector<SymMatrix>& linear() const { return linear_; }

  double value(Observable o, const SpdMatrix& x) const;
  /// Throws InvalidInput for lambda_min at a near-degenerate eigengap.
  SymMatrix riemannian_gradient(Observable o, const SpdMatrix& x) const;
  /// tr(X^2), d, lambda_min^2, 4 d^2; nullopt for lambda_min with gap < kLambdaMinGapTolerance.
  std::optional<double> grad_norm_sq(Observable o, const SpdMatrix& x) const;

  double linear_value(std::size_t i, const SpdMatrix& x) const;
  SymMatrix linear_gradient(std::size_t i, const SpdMatrix& x) const;
  /// tr(X C X C)
  double linear_grad_norm_sq(std::size_t i, const SpdMatrix& x) const;

 private:
  SpdFrame x0_;
  std::vector<SymMatrix> linear_;
};

using Series = std::span<const double>;

/// Standard split-Rhat. All-constant input returns 1; constant chains at
/// different levels return +inf.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Geyer initial-monotone-sequence ESS, clamped to [1, N]. Constant series -> 1.
double ess(Series series);
/// Sum of per-chain ESS.
double ess_pooled(const std::vector<std::vector<double>>& chains);

double sample_mean(Series x);
/// Unbiased sample standard deviation.
double sample_sd(Series x);

/// sd / sqrt(ess_total).
double mcse_from_sd(double sd, double ess_total);
double mcse(Series pooled, double ess_total);

double zscore(double mean_a, double mcse_a, double mean_b, double mcse_b);

struct PoincareResult {
  double rho = 0.0;
  int excluded = 0;  // samples whose gradient norm was undefined (NaN)
};

/// NaN entries of grad_norm_sq are excluded from the numerator mean.
PoincareResult poincare_proxy(Series values, Series grad_norm_sq);

struct ObservableSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 1.0;
  double ess_total = 0.0;
  double ess_per_sec = 0.0;
  double mcse = 0.0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  int rho_excluded = 0;
};

struct MethodSummary {
  std::string method;
  int n_chains = 0;
  int kept_per_chain = 0;
  double runtime_per_chain = 0.0;
  double acceptance_mean = 0.0;
  double acceptance_sd = 0.0;
  double rhat_max = 1.0;
  double rho_min = std::numeric_limits<double>::quiet_NaN();
  int numeric_failures = 0;
  std::vector<ObservableSummary> observables;  // canonical four, then linear functionals
  const ObservableSummary& get(const std::string& name) const;
};

struct ZScoreRow {
  std::string name;
  double z = 0.0;
};

struct DiagnosticsReport {
  std::vector<MethodSummary> methods;
  /// (methods[0] - methods[1]) per canonical observable; empty unless two methods.
  std::vector<ZScoreRow> zscores;
};

MethodSummary summarize_method(const std::vector<ChainTrace>& chains, const ObservableSet& set);
DiagnosticsReport diagnose(const std::vector<std::vector<ChainTrace>>& per_method, const ObservableSet& set);

/// One row per method x observable.
void write_report_csv(std::ostream& out, const DiagnosticsReport& report);
/// Core diagnostics, pooled marginals with rho, and MCSE / z-score tables.
void write_report_text(std::ostream& out, const DiagnosticsReport& report);

struct MethodSamples {
  std::string method;
  std::vector<double> values;
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::vector<long>> counts;  // per method, per bin
};

inline constexpr int kHistogramBins = 60;

/// Shared bins over the union range of all methods.
Histogram shared_histogram(const std::vector<MethodSamples>& samples, int bins = kHistogramBins);
/// Sorted (value, F(value)) pairs.
std::vector<std::pair<double, double>> ecdf(std::vector<double> values);

/// observable,method,value,ecdf
void write_ecdf_csv(std::ostream& out, const std::string& observable, const std::vector<MethodSamples>& samples);
/// observable,method,bin,lo,hi,count
void write_histogram_csv(std::ostream& out, const std::string& observable, const std::vector<MethodSamples>& samples);

}  // namespace conegeo
