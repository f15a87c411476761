#include "conegeo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "conegeo/csv.hpp"

namespace conegeo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool all_identical(const std::vector<std::vector<double>>& chains) {
  const double first = chains.front().front();
  for (const auto& c : chains) {
    for (double v : c) {
      if (v != first) return false;
    }
  }
  return true;
}

std::vector<double> pooled(const std::vector<std::vector<double>>& chains) {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.begin(), c.end());
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string to_string(Observable o) {
  switch (o) {
    case Observable::trace: return "trace";
    case Observable::logdet: return "logdet";
    case Observable::lambda_min: return "lambda_min";
    case Observable::dist_sq: return "dist_sq";
  }
  return "unknown";
}

double Observables::*observable_field(Observable o) {
  switch (o) {
    case Observable::trace: return &Observables::trace;
    case Observable::logdet: return &Observables::logdet;
    case Observable::lambda_min: return &Observables::lambda_min;
    case Observable::dist_sq: return &Observables::dist_sq;
  }
  throw InvalidInput("unknown observable");
}

ObservableSet::ObservableSet(SpdMatrix x0, std::vector<SymMatrix> linear)
    : x0_(std::move(x0)), linear_(std::move(linear)) {
  for (const auto& c : linear_) {
    if (c.dim() != x0_.point().dim()) throw InvalidInput("ObservableSet: linear functional has wrong dimension");
  }
}

double ObservableSet::value(Observable o, const SpdMatrix& x) const {
  switch (o) {
    case Observable::trace: return x.sym().trace();
    case Observable::logdet: return x.logdet();
    case Observable::lambda_min: return min_eigenvalue(x.sym());
    case Observable::dist_sq: {
      const double dist = ai_distance(x0_, x);
      return dist * dist;
    }
  }
  throw InvalidInput("unknown observable");
}

SymMatrix ObservableSet::riemannian_gradient(Observable o, const SpdMatrix& x) const {
  const SymMatrix& xm = x.sym();
  switch (o) {
    case Observable::trace: return SymMatrix(xm.matrix() * xm.matrix());
    case Observable::logdet: return xm;
    case Observable::lambda_min: {
      const EigenDecomp eig = eigh(xm);
      if (eig.values.size() > 1 && eig.values(1) - eig.values(0) < kLambdaMinGapTolerance) {
        throw InvalidInput("lambda_min gradient undefined at a repeated eigenvalue");
      }
      const Eigen::VectorXd xu = xm.matrix() * eig.vectors.col(0);
      return SymMatrix(xu * xu.transpose());
    }
    case Observable::dist_sq: {
      const SpdFrame frame(x);
      return frame.from_tangent(log_map(frame, x0_.point())) * -2.0;
    }
  }
  throw InvalidInput("unknown observable");
}

std::optional<double> ObservableSet::grad_norm_sq(Observable o, const SpdMatrix& x) const {
  switch (o) {
    case Observable::trace: return x.matrix().squaredNorm();  // tr(X^2)
    case Observable::logdet: return static_cast<double>(x.dim());
    case Observable::lambda_min: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(x.matrix(), Eigen::EigenvaluesOnly);
      const auto& ev = solver.eigenvalues();
      if (ev.size() > 1 && ev(1) - ev(0) < kLambdaMinGapTolerance) return std::nullopt;
      return ev(0) * ev(0);
    }
    case Observable::dist_sq: return 4.0 * value(Observable::dist_sq, x);
  }
  throw InvalidInput("unknown observable");
}

double ObservableSet::linear_value(std::size_t i, const SpdMatrix& x) const {
  return frobenius_inner(linear_.at(i), x.sym());
}

SymMatrix ObservableSet::linear_gradient(std::size_t i, const SpdMatrix& x) const {
  return congruence(x.matrix(), linear_.at(i));
}

double ObservableSet::linear_grad_norm_sq(std::size_t i, const SpdMatrix& x) const {
  const Eigen::MatrixXd xc = x.matrix() * linear_.at(i).matrix();
  return (xc * xc).trace();
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw InvalidInput("split_rhat: need at least 2 chains");
  std::size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  if (len < 4) throw InvalidInput("split_rhat: each chain needs at least 4 samples");
  if (all_identical(chains)) return 1.0;

  const std::size_t half = len / 2;
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& c : chains) {
    const Series first(c.data(), half);
    const Series second(c.data() + (len - half), half);
    for (const Series s : {first, second}) {
      means.push_back(sample_mean(s));
      const double sd = sample_sd(s);
      vars.push_back(sd * sd);
    }
  }
  const double n = static_cast<double>(half);
  const double grand = sample_mean(means);
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= n / static_cast<double>(means.size() - 1);
  const double w = sample_mean(vars);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return std::sqrt((n - 1.0) / n + b / (n * w));
}

double ess(Series series) {
  const std::size_t n = series.size();
  if (n < 8) throw InvalidInput("ess: need at least 8 samples");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) return 1.0;

  const double mean = sample_mean(series);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = series[i] - mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return 1.0;

  // Initial positive sequence of paired autocorrelations, made monotone.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double gamma = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (!(gamma > 0.0)) break;
    gamma = std::min(gamma, prev);
    sum += gamma;
    prev = gamma;
  }
  const double tau = -1.0 + 2.0 * sum;
  const double nn = static_cast<double>(n);
  if (!(tau > 0.0)) return nn;
  return std::clamp(nn / tau, 1.0, nn);
}

double ess_pooled(const std::vector<std::vector<double>>& chains) {
  double total = 0.0;
  for (const auto& c : chains) total += ess(c);
  return total;
}

double sample_mean(Series x) {
  if (x.empty()) throw InvalidInput("sample_mean: empty series");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(Series x) {
  if (x.size() < 2) throw InvalidInput("sample_sd: need at least 2 samples");
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double mcse_from_sd(double sd, double ess_total) {
  if (!(ess_total >= 1.0)) throw InvalidInput("mcse: ESS must be >= 1");
  if (!(sd >= 0.0)) throw InvalidInput("mcse: sd must be >= 0");
  return sd / std::sqrt(ess_total);
}

double mcse(Series pooled_series, double ess_total) {
  return mcse_from_sd(sample_sd(pooled_series), ess_total);
}

double zscore(double mean_a, double mcse_a, double mean_b, double mcse_b) {
  const double denom = mcse_a * mcse_a + mcse_b * mcse_b;
  if (!(denom > 0.0)) throw DegenerateVariance("zscore: both MCSEs are zero");
  return (mean_a - mean_b) / std::sqrt(denom);
}

PoincareResult poincare_proxy(Series values, Series grad_norm_sq) {
  if (values.size() != grad_norm_sq.size()) throw InvalidInput("poincare_proxy: length mismatch");
  if (values.size() < 2) throw InvalidInput("poincare_proxy: need at least 2 samples");
  const double sd = sample_sd(values);
  const double var = sd * sd;
  if (var < 1e-14) throw DegenerateVariance("poincare_proxy: observable variance is (numerically) zero");
  PoincareResult out;
  double sum = 0.0;
  std::size_t used = 0;
  for (double g : grad_norm_sq) {
    if (std::isnan(g)) {
      ++out.excluded;
      continue;
    }
    sum += g;
    ++used;
  }
  if (used == 0) throw InvalidInput("poincare_proxy: no sample has a defined gradient");
  out.rho = (sum / static_cast<double>(used)) / var;
  return out;
}

const ObservableSummary& MethodSummary::get(const std::string& name) const {
  for (const auto& o : observables) {
    if (o.name == name) return o;
  }
  throw InvalidInput("MethodSummary: no observable named " + name);
}

MethodSummary summarize_method(const std::vector<ChainTrace>& chains, const ObservableSet& set) {
  if (chains.empty()) throw InvalidInput("summarize_method: no chains");
  MethodSummary out;
  out.method = to_string(chains.front().kernel);
  out.n_chains = static_cast<int>(chains.size());

  std::vector<double> acc;
  double wall_total = 0.0;
  for (const auto& c : chains) {
    acc.push_back(c.acceptance_rate());
    wall_total += c.wall_seconds;
    out.numeric_failures += c.numeric_failures;
  }
  out.runtime_per_chain = wall_total / static_cast<double>(chains.size());
  out.acceptance_mean = sample_mean(acc);
  out.acceptance_sd = acc.size() > 1 ? sample_sd(acc) : 0.0;
  out.kept_per_chain = static_cast<int>(chains.front().kept(&Observables::trace).size());

  const bool have_states = std::all_of(chains.begin(), chains.end(), [](const ChainTrace& c) {
    return static_cast<int>(c.states.size()) == c.n_steps();
  });

  auto summarize = [&](const std::string& name, const std::vector<std::vector<double>>& per_chain,
                       const std::vector<double>& grads) {
    ObservableSummary s;
    s.name = name;
    const auto all = pooled(per_chain);
    s.mean = sample_mean(all);
    s.sd = sample_sd(all);
    s.rhat = per_chain.size() >= 2 ? split_rhat(per_chain) : 1.0;
    s.ess_total = ess_pooled(per_chain);
    s.ess_per_sec = wall_total > 0.0 ? s.ess_total / wall_total : 0.0;
    s.mcse = mcse_from_sd(s.sd, s.ess_total);
    if (!grads.empty()) {
      try {
        const auto r = poincare_proxy(all, grads);
        s.rho = r.rho;
        s.rho_excluded = r.excluded;
      } catch (const Error&) {
        s.rho = kNaN;
      }
    }
    return s;
  };

  for (Observable o : kCanonicalObservables) {
    std::vector<std::vector<double>> per_chain;
    std::vector<double> grads;
    for (const auto& c : chains) {
      per_chain.push_back(c.kept(observable_field(o)));
      for (std::size_t k = static_cast<std::size_t>(c.burn_in); k < c.obs.size(); ++k) {
        const Observables& ob = c.obs[k];
        switch (o) {
          case Observable::logdet: grads.push_back(static_cast<double>(c.d > 0 ? c.d : set.reference().point().dim())); break;
          case Observable::dist_sq: grads.push_back(4.0 * ob.dist_sq); break;
          case Observable::trace:
          case Observable::lambda_min:
            if (have_states) {
              const auto g = set.grad_norm_sq(o, c.state(static_cast<int>(k)));
              grads.push_back(g ? *g : kNaN);
            }
            break;
        }
      }
    }
    out.observables.push_back(summarize(to_string(o), per_chain, grads));
  }

  if (have_states) {
    for (std::size_t i = 0; i < set.linear().size(); ++i) {
      std::vector<std::vector<double>> per_chain;
      std::vector<double> grads;
      for (const auto& c : chains) {
        std::vector<double> vals;
        for (std::size_t k = static_cast<std::size_t>(c.burn_in); k < c.obs.size(); ++k) {
          const SpdMatrix x = c.state(static_cast<int>(k));
          vals.push_back(set.linear_value(i, x));
          grads.push_back(set.linear_grad_norm_sq(i, x));
        }
        per_chain.push_back(std::move(vals));
      }
      out.observables.push_back(summarize("linear_" + std::to_string(i), per_chain, grads));
    }
  }

  for (std::size_t i = 0; i < kCanonicalObservables.size(); ++i) {
    out.rhat_max = i == 0 ? out.observables[i].rhat : std::max(out.rhat_max, out.observables[i].rhat);
  }
  for (const auto& o : out.observables) {
    if (std::isnan(o.rho)) continue;
    out.rho_min = std::isnan(out.rho_min) ? o.rho : std::min(out.rho_min, o.rho);
  }
  return out;
}

DiagnosticsReport diagnose(const std::vector<std::vector<ChainTrace>>& per_method, const ObservableSet& set) {
  DiagnosticsReport report;
  for (const auto& chains : per_method) report.methods.push_back(summarize_method(chains, set));
  if (report.methods.size() == 2) {
    const auto& a = report.methods[0];
    const auto& b = report.methods[1];
    for (Observable o : kCanonicalObservables) {
      const auto& sa = a.get(to_string(o));
      const auto& sb = b.get(to_string(o));
      report.zscores.push_back({to_string(o), zscore(sa.mean, sa.mcse, sb.mean, sb.mcse)});
    }
  }
  return report;
}

void write_report_csv(std::ostream& out, const DiagnosticsReport& report) {
  out << "method,observable,mean,sd,rhat,ess,ess_per_sec,mcse,rho,rho_excluded,acceptance_mean,acceptance_sd,"
         "runtime_per_chain,rhat_max,rho_min,zscore\n";
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    const auto& ms = report.methods[m];
    for (const auto& o : ms.observables) {
      double z = kNaN;
      for (const auto& row : report.zscores) {
        if (row.name == o.name) z = m == 0 ? row.z : -row.z;
      }
      out << ms.method << ',' << o.name << ',' << csv::number(o.mean) << ',' << csv::number(o.sd) << ','
          << csv::number(o.rhat) << ',' << csv::number(o.ess_total) << ',' << csv::number(o.ess_per_sec) << ','
          << csv::number(o.mcse) << ',' << csv::number(o.rho) << ',' << o.rho_excluded << ','
          << csv::number(ms.acceptance_mean) << ',' << csv::number(ms.acceptance_sd) << ','
          << csv::number(ms.runtime_per_chain) << ',' << csv::number(ms.rhat_max) << ',' << csv::number(ms.rho_min)
          << ',' << csv::number(z) << '\n';
    }
  }
}

void write_report_text(std::ostream& out, const DiagnosticsReport& report) {
  out << "Table 1: core diagnostics (runtime is per chain; acceptance is mean +- sd across chains)\n";
  out << std::left << std::setw(22) << "method" << std::setw(12) << "runtime_s" << std::setw(18) << "acceptance"
      << std::setw(12) << "Rhat_max" << std::setw(14) << "ESS/s logdet" << std::setw(14) << "ESS/s lmin"
      << std::setw(14) << "ESS/s dist2" << '\n';
  for (const auto& m : report.methods) {
    out << std::setw(22) << m.method << std::setw(12) << fixed(m.runtime_per_chain, 3) << std::setw(18)
        << (fixed(m.acceptance_mean, 3) + " +- " + fixed(m.acceptance_sd, 3)) << std::setw(12) << fixed(m.rhat_max, 6)
        << std::setw(14) << fixed(m.get("logdet").ess_per_sec, 1) << std::setw(14)
        << fixed(m.get("lambda_min").ess_per_sec, 1) << std::setw(14) << fixed(m.get("dist_sq").ess_per_sec, 1)
        << '\n';
  }

  out << "\nTable 2: pooled marginals (mean +- sd) and empirical Poincare proxy\n";
  out << std::setw(22) << "method" << std::setw(22) << "logdet" << std::setw(22) << "lambda_min" << std::setw(22)
      << "dist_sq" << std::setw(22) << "trace" << std::setw(10) << "rho_min" << '\n';
  for (const auto& m : report.methods) {
    out << std::setw(22) << m.method;
    for (const char* name : {"logdet", "lambda_min", "dist_sq", "trace"}) {
      const auto& o = m.get(name);
      out << std::setw(22) << (fixed(o.mean, 4) + " +- " + fixed(o.sd, 4));
    }
    out << std::setw(10) << fixed(m.rho_min, 2) << '\n';
  }

  out << "\nTable 3: cross-method mean agreement via MCSE and z-scores\n";
  if (report.methods.size() != 2) {
    out << "(needs exactly two methods)\n";
    return;
  }
  const auto& a = report.methods[0];
  const auto& b = report.methods[1];
  out << "a = " << a.method << ", b = " << b.method << ", z = (mean_a - mean_b) / sqrt(MCSE_a^2 + MCSE_b^2)\n";
  out << std::setw(12) << "observable" << std::setw(14) << "mean_a" << std::setw(14) << "mean_b" << std::setw(12) << "ESS_a" << std::setw(12) << "ESS_b" << std::setw(12)
      << "MCSE_a" << std::setw(12) << "MCSE_b" << std::setw(8) << "z" << '\n';
  for (const auto& row : report.zscores) {
    const auto& sa = a.get(row.name);
    const auto& sb = b.get(row.name);
    out << std::setw(12) << row.name << std::setw(14) << fixed(sa.mean, 6) << std::setw(14) << fixed(sb.mean, 6)
        << std::setw(12) << fixed(sa.ess_total, 3) << std::setw(12) << fixed(sb.ess_total, 3) << std::setw(12)
        << fixed(sa.mcse, 6) << std::setw(12) << fixed(sb.mcse, 6) << std::setw(8) << fixed(row.z, 3) << '\n';
  }
}

Histogram shared_histogram(const std::vector<MethodSamples>& samples, int bins) {
  if (samples.empty() || bins < 1) throw InvalidInput("histogram: need samples and at least one bin");
  Histogram h;
  bool first = true;
  for (const auto& s : samples) {
    if (s.values.empty()) throw InvalidInput("histogram: empty sample set for " + s.method);
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    h.lo = first ? *lo : std::min(h.lo, *lo);
    h.hi = first ? *hi : std::max(h.hi, *hi);
    first = false;
  }
  const double width = h.hi > h.lo ? (h.hi - h.lo) / bins : 1.0;
  for (const auto& s : samples) {
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (double v : s.values) {
      int b = static_cast<int>((v - h.lo) / width);
      b = std::clamp(b, 0, bins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    h.counts.push_back(std::move(counts));
  }
  return h;
}

std::vector<std::pair<double, double>> ecdf(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("ecdf: empty sample");
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(values.size());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  return out;
}

void write_ecdf_csv(std::ostream& out, const std::string& observable, const std::vector<MethodSamples>& samples) {
  out << "observable,method,value,ecdf\n";
  for (const auto& s : samples) {
    for (const auto& [v, f] : ecdf(s.values)) {
      out << observable << ',' << s.method << ',' << csv::number(v) << ',' << csv::number(f) << '\n';
    }
  }
}

void write_histogram_csv(std::ostream& out, const std::string& observable, const std::vector<MethodSamples>& samples) {
  const Histogram h = shared_histogram(samples);
  const int bins = static_cast<int>(h.counts.front().size());
  const double width = h.hi > h.lo ? (h.hi - h.lo) / bins : 1.0;
  out << "observable,method,bin,lo,hi,count\n";
  for (std::size_t m = 0; m < samples.size(); ++m) {
    for (int b = 0; b < bins; ++b) {
      out << observable << ',' << samples[m].method << ',' << b << ',' << csv::number(h.lo + b * width) << ','
          << csv::number(h.lo + (b + 1) * width) << ',' << h.counts[m][static_cast<std::size_t>(b)] << '\n';
    }
  }
}

}  // namespace conegeo
