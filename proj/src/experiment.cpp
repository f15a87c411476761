#include "conegeo/experiment.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "conegeo/csv.hpp"

namespace conegeo {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw InvalidInput("config: '" + key + "' expects an integer, got '" + value + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    return csv::to_double(value);
  } catch (const std::exception&) {
    throw InvalidInput("config: '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw InvalidInput("config: '" + key + "' expects true or false, got '" + value + "'");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_provenance(const ExperimentConfig& cfg, const fs::path& dir) {
  auto out = open_out(dir / kProvenanceFile);
  cfg.write(out);
}

template <class F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const InvalidInput& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const Error& e) {
    log << "numeric failure: " << e.what() << '\n';
    return kExitNumericFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

void sample_into(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  fs::create_directories(dir);
  write_provenance(cfg, dir);
  const PotentialParams p = cfg.potential();
  for (Kernel k : cfg.kernels()) {
    const SamplerConfig sc = cfg.sampler(k);
    const auto chains = run_chains(p, sc);
    int failures = 0;
    double acc = 0.0;
    for (const auto& c : chains) {
      auto out = open_out(dir / trace_file_name(k, c.chain_id));
      write_trace_csv(out, c);
      failures += c.numeric_failures;
      acc += c.acceptance_rate();
    }
    log << to_string(k) << ": h=" << sc.h << " chains=" << chains.size() << " steps=" << sc.n_steps
        << " mean_acceptance=" << acc / static_cast<double>(chains.size()) << " numeric_failures=" << failures
        << '\n';
  }
}

int diagnose_into(const fs::path& trace_dir, const fs::path& out_dir, std::ostream& log) {
  const ExperimentConfig cfg = ExperimentConfig::from_file((trace_dir / kProvenanceFile).string());
  fs::create_directories(out_dir);
  if (fs::weakly_canonical(out_dir) != fs::weakly_canonical(trace_dir)) write_provenance(cfg, out_dir);

  std::vector<std::vector<ChainTrace>> per_method;
  for (Kernel k : cfg.kernels()) per_method.push_back(load_traces(trace_dir.string(), cfg, k));
  const ObservableSet set(cfg.potential().x0);
  const DiagnosticsReport report = diagnose(per_method, set);

  {
    auto out = open_out(out_dir / "report.csv");
    write_report_csv(out, report);
  }
  std::ostringstream tables;
  write_report_text(tables, report);
  {
    auto out = open_out(out_dir / "tables.txt");
    out << tables.str();
  }
  log << tables.str();

  for (Observable o : kCanonicalObservables) {
    std::vector<MethodSamples> samples;
    for (const auto& chains : per_method) {
      MethodSamples ms{to_string(chains.front().kernel), {}};
      for (const auto& c : chains) {
        const auto kept = c.kept(observable_field(o));
        ms.values.insert(ms.values.end(), kept.begin(), kept.end());
      }
      samples.push_back(std::move(ms));
    }
    auto ecdf_out = open_out(out_dir / ("ecdf_" + to_string(o) + ".csv"));
    write_ecdf_csv(ecdf_out, to_string(o), samples);
    auto hist_out = open_out(out_dir / ("hist_" + to_string(o) + ".csv"));
    write_histogram_csv(hist_out, to_string(o), samples);
  }

  for (const auto& m : report.methods) {
    if (!(m.rhat_max <= kRhatGate)) {
      log << "gate failure: " << m.method << " split-Rhat " << m.rhat_max << " > " << kRhatGate << '\n';
      return kExitGateFailure;
    }
  }
  return kExitOk;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "num_vertices") num_vertices = parse_integer<int>(key, value);
  else if (key == "num_probes") num_probes = parse_integer<int>(key, value);
  else if (key == "eps") eps = parse_real(key, value);
  else if (key == "margin_eps") margin_eps = parse_real(key, value);
  else if (key == "regularizer") regularizer = parse_real(key, value);
  else if (key == "ground_weight") ground_weight = parse_real(key, value);
  else if (key == "graph_file") graph_file = value;
  else if (key == "d") d = parse_integer<int>(key, value);
  else if (key == "lambda") lambda = parse_real(key, value);
  else if (key == "beta") beta = parse_real(key, value);
  else if (key == "kappa") kappa = parse_real(key, value);
  else if (key == "x0_scale") x0_scale = parse_real(key, value);
  else if (key == "h") h = parse_real(key, value);
  else if (key == "h_naive") h_naive = parse_real(key, value);
  else if (key == "n_steps") n_steps = parse_integer<int>(key, value);
  else if (key == "n_chains") n_chains = parse_integer<int>(key, value);
  else if (key == "burn_in_fraction") burn_in_fraction = parse_real(key, value);
  else if (key == "seed") seed = parse_integer<std::uint64_t>(key, value);
  else if (key == "kernel") kernel = value;
  else if (key == "save_states") save_states = parse_bool(key, value);
  else throw InvalidInput("config: unknown key '" + key + "'");
}

void ExperimentConfig::validate() const {
  if (!(x0_scale > 0.0)) throw InvalidInput("config: x0_scale must be > 0");
  if (num_probes < 1) throw InvalidInput("config: num_probes must be >= 1");
  if (!(eps > 0.0) || !(margin_eps > 0.0)) throw InvalidInput("config: eps and margin_eps must be > 0");
  kernels();
  potential();
  sampler(Kernel::geom_mala).validate();
  sampler(Kernel::naive_euclid_drift).validate();
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(lineno) + ": expected key=value");
    }
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path);
  return parse(in);
}

void ExperimentConfig::write(std::ostream& out) const {
  out << "num_vertices=" << num_vertices << '\n'
      << "num_probes=" << num_probes << '\n'
      << "eps=" << csv::number(eps) << '\n'
      << "margin_eps=" << csv::number(margin_eps) << '\n'
      << "regularizer=" << csv::number(regularizer) << '\n'
      << "ground_weight=" << csv::number(ground_weight) << '\n';
  if (!graph_file.empty()) out << "graph_file=" << fs::absolute(graph_file).string() << '\n';
  out << "d=" << d << '\n'
      << "lambda=" << csv::number(lambda) << '\n'
      << "beta=" << csv::number(beta) << '\n'
      << "kappa=" << csv::number(kappa) << '\n'
      << "x0_scale=" << csv::number(x0_scale) << '\n'
      << "h=" << csv::number(h) << '\n'
      << "h_naive=" << csv::number(h_naive) << '\n'
      << "n_steps=" << n_steps << '\n'
      << "n_chains=" << n_chains << '\n'
      << "burn_in_fraction=" << csv::number(burn_in_fraction) << '\n'
      << "seed=" << seed << '\n'
      << "kernel=" << kernel << '\n'
      << "save_states=" << (save_states ? "true" : "false") << '\n';
}

ValidationConfig ExperimentConfig::validation() const {
  ValidationConfig v;
  v.num_vertices = num_vertices;
  v.d = d;
  v.num_probes = num_probes;
  v.eps = eps;
  v.margin_eps = margin_eps;
  v.regularizer = regularizer;
  v.ground_weight = ground_weight;
  v.seed = seed;
  v.graph_file = graph_file;
  return v;
}

PotentialParams ExperimentConfig::potential() const {
  if (d < 1) throw InvalidInput("config: d must be >= 1");
  return PotentialParams(lambda, beta, kappa, SpdMatrix(SymMatrix::identity(d) * x0_scale));
}

SamplerConfig ExperimentConfig::sampler(Kernel k) const {
  SamplerConfig s;
  s.d = d;
  s.h = (k != Kernel::geom_mala && h_naive > 0.0) ? h_naive : h;
  s.n_steps = n_steps;
  s.n_chains = n_chains;
  s.burn_in_fraction = burn_in_fraction;
  s.seed = seed;
  s.kernel = k;
  s.save_states = save_states;
  return s;
}

std::vector<Kernel> ExperimentConfig::kernels() const {
  if (kernel == "both") return {Kernel::geom_mala, Kernel::naive_euclid_drift};
  std::vector<Kernel> out;
  for (const auto& name : csv::split(kernel, ';')) out.push_back(parse_kernel(trim(name)));
  return out;
}

std::vector<ChainTrace> load_traces(const std::string& trace_dir, const ExperimentConfig& cfg, Kernel kernel) {
  const SamplerConfig sc = cfg.sampler(kernel);
  std::vector<ChainTrace> chains;
  for (int c = 0; c < sc.n_chains; ++c) {
    const fs::path path = fs::path(trace_dir) / trace_file_name(kernel, c);
    std::ifstream in(path);
    if (!in) throw InvalidInput("missing trace file " + path.string());
    ChainTrace t = read_trace_csv(in, kernel, c, sc.burn_in());
    if (t.n_steps() != sc.n_steps) throw InvalidInput("trace file " + path.string() + " has the wrong row count");
    if (t.d == 0) t.d = sc.d;
    chains.push_back(std::move(t));
  }
  return chains;
}

int cmd_validate_geometry(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_provenance(cfg, dir);
    const ValidationReport report = run_validation_experiment(cfg.validation());
    {
      auto out = open_out(dir / "calibration.csv");
      write_calibration_csv(out, report);
    }
    {
      auto out = open_out(dir / "capture.csv");
      write_capture_csv(out, report.capture);
    }
    {
      auto out = open_out(dir / "probes.csv");
      write_probes_csv(out, report);
    }
    log << "max_relative_deviation=" << csv::number(report.max_relative_deviation) << '\n'
        << "kendall_tau=" << csv::number(report.kendall_tau) << '\n'
        << "margin_spearman=" << csv::number(report.margin_spearman) << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_sample(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    sample_into(cfg, out_dir, log);
    return static_cast<int>(kExitOk);
  });
}

int cmd_diagnose(const std::string& trace_dir, const std::string& out_dir, std::ostream& log) {
  return guarded(log, [&] { return diagnose_into(trace_dir, out_dir.empty() ? trace_dir : out_dir, log); });
}

int cmd_reproduce_tables(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    sample_into(cfg, out_dir, log);
    return diagnose_into(out_dir, out_dir, log);
  });
}

}  // namespace conegeo
