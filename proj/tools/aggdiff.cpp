// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: run, sweep, steady, toy, validate.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aggdiff/config.hpp"
#include "aggdiff/csv.hpp"
#include "aggdiff/diagnostics.hpp"
#include "aggdiff/experiment.hpp"
#include "aggdiff/toy_model.hpp"

#ifndef AGGDIFF_PRESET_DIR
#define AGGDIFF_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace aggdiff;

namespace {

/// A path to a TOML file, or the name of a shipped preset.
fs::path resolve_config(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const fs::path preset = fs::path(AGGDIFF_PRESET_DIR) / (arg + ".toml");
  if (fs::exists(preset)) return preset;
  throw ConfigError({{arg, "no such file or preset", std::nullopt}});
}

ExperimentConfig load(const std::string& arg, const std::string& output_override) {
  ExperimentConfig cfg = load_config(resolve_config(arg));
  if (!output_override.empty()) cfg.output_dir = output_override;
  return cfg;
}

int report_violations(const std::vector<Violation>& v) {
  for (const Violation& x : v) std::cerr << "error: " << x.to_string() << "\n";
  return v.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aggdiff: 1D aggregation-diffusion simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string output;

  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file or preset name");
  run_cmd->add_option("config", config, "TOML config path or preset name")->required();
  run_cmd->add_option("-o,--output", output, "override output_dir");

  std::string param;
  std::vector<double> values;
  auto* sweep_cmd = app.add_subcommand("sweep", "run one experiment per parameter value");
  sweep_cmd->add_option("config", config, "base TOML config path or preset name")->required();
  sweep_cmd->add_option("--param", param, "epsilon | R | delta | X0")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->delimiter(',')->expected(0, -1);
  sweep_cmd->add_option("-o,--output", output, "override output_dir");

  double epsilon = 0.0;
  std::string kernel_name = "gaussian";
  double x_left = -2.0, x_right = 2.0, dx = 0.01;
  auto* steady_cmd = app.add_subcommand("steady", "compute the steady state for a given epsilon");
  steady_cmd->add_option("--epsilon", epsilon, "diffusion constant")->required();
  steady_cmd->add_option("--kernel", kernel_name, "interaction kernel")->check(CLI::IsMember({"gaussian"}));
  steady_cmd->add_option("--x-left", x_left);
  steady_cmd->add_option("--x-right", x_right);
  steady_cmd->add_option("--dx", dx);
  std::string steady_output = "out/steady";
  steady_cmd->add_option("-o,--output", steady_output, "output directory")->capture_default_str();

  double x0 = 0.0;
  double t_end = 200.0;
  auto* toy_cmd = app.add_subcommand("toy", "two-particle model: equilibria and a trajectory");
  toy_cmd->add_option("--epsilon", epsilon, "diffusion constant")->required();
  auto* x0_opt = toy_cmd->add_option("--x0", x0, "initial half-distance");
  toy_cmd->add_option("--t-end", t_end, "integration horizon")->default_val(200.0);
  std::string toy_output = "out/toy";
  toy_cmd->add_option("-o,--output", toy_output, "output directory")->capture_default_str();

  auto* validate_cmd = app.add_subcommand("validate", "check a config without running it");
  validate_cmd->add_option("config", config, "TOML config path or preset name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const ExperimentConfig cfg = load(config, output);
      if (int rc = report_violations(validate_config(cfg))) return rc;
      const ExperimentResult r = run_experiment(cfg);
      for (const RunSummary& s : r.summaries) {
        std::cout << s.solver << ": t=" << format_real(s.t_end) << " linf=" << format_real(s.final_linf)
                  << " m2=" << format_real(s.final_m2);
        if (s.final_w2_to_ref) std::cout << " w2_to_ref=" << format_real(*s.final_w2_to_ref);
        std::cout << "\n";
      }
      std::cout << "wrote " << cfg.output_dir.string() << "\n";
      return 0;
    }
    if (*sweep_cmd) {
      const ExperimentConfig cfg = load(config, output);
      if (int rc = report_violations(validate_config(cfg))) return rc;
      const SweepParameter p = parse_sweep_parameter(param);
      const std::vector<SweepRow> rows = sweep(cfg, p, values);
      write_phase_table(cfg.output_dir / "phase_table.csv", param, rows);
      for (const SweepRow& row : rows) {
        std::cout << param << "=" << format_real(row.value) << " " << row.classification;
        if (!row.error.empty()) std::cout << " (" << row.error << ")";
        std::cout << "\n";
      }
      return 0;
    }
    if (*steady_cmd) {
      const InteractionKernel kernel = KernelConfig{kernel_name}.build();
      SteadyStateOptions so;
      so.x_left = x_left;
      so.x_right = x_right;
      so.dx = dx;
      const SteadyState s = compute_steady_state(kernel, epsilon, 1.0, 0.0, so);
      write_steady_state(steady_output, s, epsilon);
      std::cout << (s.trivial ? "trivial (zero) steady state" : (s.converged ? "converged" : "not converged"))
                << " C=" << format_real(s.lagrange_constant) << " residual=" << format_real(s.residual)
                << " support=[" << format_real(s.support_left) << ", " << format_real(s.support_right) << "]\n";
      return s.converged ? 0 : 1;
    }
    if (*toy_cmd) {
      ExperimentConfig cfg;
      cfg.solver = SolverKind::toy;
      cfg.epsilon = epsilon;
      cfg.t_end = t_end;
      cfg.output_dir = toy_output;
      if (*x0_opt) cfg.toy_x0 = x0;
      if (int rc = report_violations(validate_config(cfg))) return rc;
      if (!*x0_opt) {
        // Equilibria only.
        const ToyEquilibriaRow e = equilibria_row(ToyProblem{epsilon, cfg.kernel.build()});
        CsvWriter w(fs::path(toy_output) / "toy" / "equilibria.csv", {"epsilon", "a", "b", "fold"});
        w.row({format_real(e.epsilon), format_real(e.a), format_real(e.b), format_real(e.fold)});
        std::cout << "a=" << format_real(e.a) << " b=" << format_real(e.b) << " fold=" << format_real(e.fold) << "\n";
        return 0;
      }
      const ExperimentResult r = run_experiment(cfg);
      const ToyEquilibriaRow& e = *r.toy_equilibria;
      std::cout << "a=" << format_real(e.a) << " b=" << format_real(e.b) << " fold=" << format_real(e.fold)
                << " basin=" << to_string(*r.toy_basin) << " X(" << format_real(t_end)
                << ")=" << format_real(r.toy->x.back()) << "\n";
      return 0;
    }
    if (*validate_cmd) {
      const ExperimentConfig cfg = load_config(resolve_config(config));
      const std::vector<Violation> v = validate_config(cfg);
      if (v.empty()) std::cout << "ok\n";
      return report_violations(v);
    }
  } catch (const ConfigError& e) {
    return report_violations(e.violations);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
