#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "conegeo/error.hpp"
#include "conegeo/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string kernel;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts, const std::string& default_out) {
  opts.out_dir = default_out;
  cmd->add_option("--config", opts.config_path, "Flat key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opts.seed, "Overrides the config seed");
  cmd->add_option("--kernel", opts.kernel, "Kernel name, 'both', or a ';'-separated list");
  cmd->add_option("--set", opts.overrides, "Extra key=value overrides (repeatable)");
}

conegeo::ExperimentConfig load_config(const CommonOptions& opts) {
  conegeo::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = conegeo::ExperimentConfig::from_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw conegeo::InvalidInput("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.kernel.empty()) cfg.kernel = opts.kernel;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry validation and Riemannian MCMC on the SPD cone"};
  app.require_subcommand(1);

  CommonOptions geo_opts;
  auto* geo = app.add_subcommand("validate-geometry", "Curvature calibration and capture curves");
  add_common(geo, geo_opts, "out/geometry");

  CommonOptions sample_opts;
  auto* sample = app.add_subcommand("sample", "Run MCMC chains and write per-chain traces");
  add_common(sample, sample_opts, "out/traces");

  std::string trace_dir;
  std::string diag_out;
  auto* diag = app.add_subcommand("diagnose", "Diagnostics tables from a trace directory");
  diag->add_option("--traces", trace_dir, "Directory written by 'sample'")->required()->check(CLI::ExistingDirectory);
  diag->add_option("--out", diag_out, "Output directory (defaults to the trace directory)");

  CommonOptions repro_opts;
  auto* repro = app.add_subcommand("reproduce-tables", "Sample both kernels and diagnose");
  add_common(repro, repro_opts, "out/tables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (geo->parsed()) return conegeo::cmd_validate_geometry(load_config(geo_opts), geo_opts.out_dir, std::cout);
    if (sample->parsed()) return conegeo::cmd_sample(load_config(sample_opts), sample_opts.out_dir, std::cout);
    if (diag->parsed()) return conegeo::cmd_diagnose(trace_dir, diag_out, std::cout);
    if (repro->parsed()) return conegeo::cmd_reproduce_tables(load_config(repro_opts), repro_opts.out_dir, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return conegeo::kExitConfigError;
  }
  return conegeo::kExitConfigError;
}
