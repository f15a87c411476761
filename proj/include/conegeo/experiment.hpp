#pragma once

// Experiment runner behind the command-line tool. A flat key=value config is
// serialized as provenance.cfg into every output directory; rerunning a
// command on that file reproduces the directory's CSVs.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "conegeo/diagnostics.hpp"
#include "conegeo/geoval.hpp"
#include "conegeo/sampler.hpp"

namespace conegeo {

inline constexpr const char* kProvenanceFile = "provenance.cfg";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitNumericFailure = 2,
  kExitGateFailure = 3,
};

/// split-Rhat above this fails the diagnostic gate.
inline constexpr double kRhatGate = 1.05;

struct ExperimentConfig {
  // Geometry validation.
  int num_vertices = 4;
  int num_probes = 60;
  double eps = 1e-4;
  double margin_eps = 1e-2;
  double regularizer = kDefaultRegularizer;
  double ground_weight = 1.0;
  std::string graph_file;

  // Target.
  int d = 3;
  double lambda = 6.0;
  double beta = 1.0;
  double kappa = 5.0;
  double x0_scale = 0.4;

  // Sampler. h_naive applies to the naive kernels; <= 0 means "use h".
  double h = 0.05;
  double h_naive = 0.0;
  int n_steps = 20000;
  int n_chains = 4;
  double burn_in_fraction = 0.5;
  std::uint64_t seed = 1;
  /// "both" (geom_mala and naive_euclid_drift), one kernel name, or a ';'-separated list.
  std::string kernel = "both";
  bool save_states = true;

  /// Throws InvalidInput on unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig from_file(const std::string& path);
  void write(std::ostream& out) const;

  ValidationConfig validation() const;
  PotentialParams potential() const;
  SamplerConfig sampler(Kernel k) const;
  std::vector<Kernel> kernels() const;
};

/// Each command writes its artifacts and provenance.cfg into out_dir, reports
/// to `log`, and returns an ExitCode.
int cmd_validate_geometry(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_sample(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
/// Reads provenance.cfg and traces from trace_dir; out_dir defaults to trace_dir.
int cmd_diagnose(const std::string& trace_dir, const std::string& out_dir, std::ostream& log);
int cmd_reproduce_tables(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);

/// Loads every chain of `kernel` listed by the provenance config in trace_dir.
std::vector<ChainTrace> load_traces(const std::string& trace_dir, const ExperimentConfig& cfg, Kernel kernel);

}  // namespace conegeo
