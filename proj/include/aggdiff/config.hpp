// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Experiment configuration: a TOML file describing one run.
//
//   solver = "fv"                  # fv | particles | both | toy
//   epsilon = 0.5
//   t_end = 1.0
//   snapshot_times = [0.5]
//   diagnostics_dt = 0.1
//   reference = "computed_steady_state"   # or "none"
//   output_dir = "out/run"
//   seed_label = "free text"
//   [kernel]     name = "gaussian", amplitude, width
//   [initial]    profile = "parabola" (a, b) | "uniform_box" (half_width)
//                | "oscillating_gaussian" (delta); center; renormalize
//   [domain]     x_left, x_right, dx
//   [fv]         cfl, dt_max
//   [particles]  n, diffusion = "displayed" | "energy_consistent",
//                tol_abs, tol_rel, row_dt
//   [toy]        x0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "aggdiff/csv.hpp"
#include "aggdiff/density.hpp"
#include "aggdiff/initial_data.hpp"
#include "aggdiff/kernel.hpp"
#include "aggdiff/particle_solver.hpp"

namespace aggdiff {

enum class SolverKind { fv, particles, both, toy };
enum class ReferenceKind { none, computed_steady_state };

inline std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::fv: return "fv";
    case SolverKind::particles: return "particles";
    case SolverKind::both: return "both";
    case SolverKind::toy: return "toy";
  }
  return "unknown";
}

struct KernelConfig {
  std::string name = "gaussian";
  double amplitude = kInvSqrtPi;
  double width = 1.0;

  InteractionKernel build() const {
    if (name != "gaussian") throw std::invalid_argument("unsupported kernel '" + name + "'");
    return InteractionKernel::gaussian(amplitude, width);
  }
};

struct ExperimentConfig {
  SolverKind solver = SolverKind::fv;
  KernelConfig kernel;
  double epsilon = 0.0;
  InitialDatumSpec initial{Parabola{9.0 / 8.0, 9.0 / 4.0}, 0.0, true};
  double x_left = -2.0;
  double x_right = 2.0;
  double dx = 0.01;
  long long particles = 200;
  double t_end = 1.0;
  std::vector<double> snapshot_times;
  double diagnostics_dt = 0.0;
  ReferenceKind reference = ReferenceKind::none;
  std::filesystem::path output_dir = "out";
  std::string seed_label;

  double cfl = 0.4;
  double dt_max = 1e-2;
  ParticleDiffusion particle_diffusion = ParticleDiffusion::displayed;
  double tol_abs = 1e-6;
  double tol_rel = 1e-6;
  double particle_row_dt = 0.0;
  double toy_x0 = 0.8;
  std::size_t quantile_nodes = 4000;

  /// Source line of each key read from a file, for error messages.
  std::map<std::string, long> lines;
};

struct Violation {
  std::string field;
  std::string message;
  std::optional<long> line;

  std::string to_string() const {
    std::string s = field;
    if (line) s += " (line " + std::to_string(*line) + ")";
    return s + ": " + message;
  }
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Violation> v) : std::runtime_error(join(v)), violations(std::move(v)) {}
  std::vector<Violation> violations;

 private:
  static std::string join(const std::vector<Violation>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : "; ") + x.to_string();
    return s;
  }
};

namespace detail {

class TomlReader {
 public:
  explicit TomlReader(const toml::table& root, ExperimentConfig& cfg) : root_(root), cfg_(cfg) {}

  std::vector<Violation> violations;

  template <class T>
  void read(const std::string& key, T& dst) {
    const toml::node* n = find(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = n->value<std::string>()) {
        dst = *v;
        return;
      }
      fail(key, "expected a string");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto v = n->value<bool>()) {
        dst = *v;
        return;
      }
      fail(key, "expected a boolean");
    } else if constexpr (std::is_same_v<T, long long>) {
      if (auto v = n->value<int64_t>()) {
        dst = *v;
        return;
      }
      fail(key, "expected an integer");
    } else {
      if (n->is_integer() || n->is_floating_point()) {
        dst = *n->value<double>();
        return;
      }
      fail(key, "expected a number");
    }
  }

  void read_list(const std::string& key, std::vector<double>& dst) {
    const toml::node* n = find(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) {
      fail(key, "expected an array of numbers");
      return;
    }
    dst.clear();
    for (const toml::node& e : *arr) {
      if (!(e.is_integer() || e.is_floating_point())) {
        fail(key, "expected an array of numbers");
        return;
      }
      dst.push_back(*e.value<double>());
    }
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  void fail(const std::string& key, const std::string& message) {
    violations.push_back({key, message, line_of(key)});
  }

  std::optional<long> line_of(const std::string& key) const {
    if (const toml::node* n = find(key)) return static_cast<long>(n->source().begin.line);
    return std::nullopt;
  }

  /// Records lines of every leaf key and flags keys nobody reads.
  void check_unknown(const std::set<std::string>& known) {
    root_.for_each([&](const toml::key& k, const toml::node& v) { visit(std::string(k.str()), v, known); });
  }

 private:
  const toml::node* find(const std::string& dotted) const { return root_.at_path(dotted).node(); }

  void visit(const std::string& path, const toml::node& n, const std::set<std::string>& known) {
    if (const toml::table* t = n.as_table()) {
      t->for_each([&](const toml::key& k, const toml::node& v) { visit(path + "." + std::string(k.str()), v, known); });
      return;
    }
    cfg_.lines[path] = static_cast<long>(n.source().begin.line);
    if (!known.count(path)) violations.push_back({path, "unknown key", static_cast<long>(n.source().begin.line)});
  }

  const toml::table& root_;
  ExperimentConfig& cfg_;
};

}  // namespace detail

/// Parses a TOML document; throws ConfigError listing every malformed field.
inline ExperimentConfig parse_config(std::string_view text, const std::string& source_name = "config") {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ConfigError({{source_name, std::string(e.description()), static_cast<long>(e.source().begin.line)}});
  }

  ExperimentConfig cfg;
  detail::TomlReader r(root, cfg);
  const std::set<std::string> known = {
      "solver", "epsilon", "t_end", "snapshot_times", "diagnostics_dt", "reference", "output_dir", "seed_label",
      "kernel.name", "kernel.amplitude", "kernel.width", "initial.profile", "initial.a", "initial.b",
      "initial.half_width", "initial.delta", "initial.center", "initial.renormalize", "domain.x_left",
      "domain.x_right", "domain.dx", "fv.cfl", "fv.dt_max", "particles.n", "particles.diffusion", "particles.tol_abs",
      "particles.tol_rel", "particles.row_dt", "toy.x0", "quantile_nodes"};
  r.check_unknown(known);

  std::string solver = to_string(cfg.solver);
  r.read("solver", solver);
  if (solver == "fv") cfg.solver = SolverKind::fv;
  else if (solver == "particles") cfg.solver = SolverKind::particles;
  else if (solver == "both") cfg.solver = SolverKind::both;
  else if (solver == "toy") cfg.solver = SolverKind::toy;
  else r.fail("solver", "must be one of fv, particles, both, toy");

  r.read("epsilon", cfg.epsilon);
  r.read("t_end", cfg.t_end);
  r.read_list("snapshot_times", cfg.snapshot_times);
  r.read("diagnostics_dt", cfg.diagnostics_dt);
  std::string reference = "none";
  r.read("reference", reference);
  if (reference == "none") cfg.reference = ReferenceKind::none;
  else if (reference == "computed_steady_state") cfg.reference = ReferenceKind::computed_steady_state;
  else r.fail("reference", "must be none or computed_steady_state");
  std::string out = cfg.output_dir.string();
  r.read("output_dir", out);
  cfg.output_dir = out;
  r.read("seed_label", cfg.seed_label);

  r.read("kernel.name", cfg.kernel.name);
  r.read("kernel.amplitude", cfg.kernel.amplitude);
  r.read("kernel.width", cfg.kernel.width);

  std::string profile = "parabola";
  r.read("initial.profile", profile);
  if (profile == "parabola") {
    Parabola p{9.0 / 8.0, 9.0 / 4.0};
    r.read("initial.a", p.a);
    r.read("initial.b", p.b);
    cfg.initial.profile = p;
  } else if (profile == "uniform_box") {
    UniformBox b;
    r.read("initial.half_width", b.half_width);
    cfg.initial.profile = b;
  } else if (profile == "oscillating_gaussian") {
    OscillatingGaussian o;
    r.read("initial.delta", o.delta);
    cfg.initial.profile = o;
  } else {
    r.fail("initial.profile", "must be parabola, uniform_box or oscillating_gaussian");
  }
  r.read("initial.center", cfg.initial.center);
  r.read("initial.renormalize", cfg.initial.renormalize);

  r.read("domain.x_left", cfg.x_left);
  r.read("domain.x_right", cfg.x_right);
  r.read("domain.dx", cfg.dx);
  r.read("fv.cfl", cfg.cfl);
  r.read("fv.dt_max", cfg.dt_max);
  r.read("particles.n", cfg.particles);
  std::string diffusion = to_string(cfg.particle_diffusion);
  r.read("particles.diffusion", diffusion);
  try {
    cfg.particle_diffusion = parse_particle_diffusion(diffusion);
  } catch (const std::invalid_argument&) {
    r.fail("particles.diffusion", "must be displayed or energy_consistent");
  }
  r.read("particles.tol_abs", cfg.tol_abs);
  r.read("particles.tol_rel", cfg.tol_rel);
  r.read("particles.row_dt", cfg.particle_row_dt);
  r.read("toy.x0", cfg.toy_x0);
  long long nodes = static_cast<long long>(cfg.quantile_nodes);
  r.read("quantile_nodes", nodes);
  if (nodes < 2) r.fail("quantile_nodes", "must be >= 2");
  else cfg.quantile_nodes = static_cast<std::size_t>(nodes);

  if (!r.violations.empty()) throw ConfigError(std::move(r.violations));
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path.string(), "cannot open file", std::nullopt}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

/// Semantic checks; an empty list means the config can be run.
inline std::vector<Violation> validate_config(const ExperimentConfig& c) {
  std::vector<Violation> v;
  const auto add = [&](const std::string& field, const std::string& msg) {
    const auto it = c.lines.find(field);
    v.push_back({field, msg, it == c.lines.end() ? std::nullopt : std::optional<long>(it->second)});
  };
  const bool grid_solver = c.solver == SolverKind::fv || c.solver == SolverKind::both;
  const bool particle_solver = c.solver == SolverKind::particles || c.solver == SolverKind::both;

  if (!(c.epsilon >= 0.0) || !std::isfinite(c.epsilon)) add("epsilon", "must be >= 0");
  if (c.solver == SolverKind::toy && !(c.epsilon > 0.0)) add("epsilon", "must be > 0 for the toy model");
  if (c.reference == ReferenceKind::computed_steady_state && !(c.epsilon > 0.0)) {
    add("epsilon", "must be > 0 to compute a steady state");
  }
  if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) add("t_end", "must be > 0");
  for (double t : c.snapshot_times) {
    if (!(t >= 0.0 && t <= c.t_end)) add("snapshot_times", "time " + format_real(t) + " outside [0, t_end]");
  }
  if (!(c.diagnostics_dt >= 0.0)) add("diagnostics_dt", "must be >= 0");
  if (c.kernel.name != "gaussian") add("kernel.name", "only gaussian kernels can be configured");
  if (!(c.kernel.amplitude > 0.0)) add("kernel.amplitude", "must be > 0");
  if (!(c.kernel.width > 0.0)) add("kernel.width", "must be > 0");

  if (c.solver == SolverKind::toy) {
    if (!(c.toy_x0 > 0.0)) add("toy.x0", "must be > 0");
    return v;
  }

  try {
    validate_profile(c.initial.profile);
  } catch (const std::exception& e) {
    add("initial", e.what());
  }
  if (!(c.dx > 0.0)) {
    add("domain.dx", "must be > 0");
  } else if (!(c.x_right > c.x_left)) {
    add("domain.x_right", "must exceed domain.x_left");
  } else {
    try {
      (void)UniformGrid::from_domain(c.x_left, c.x_right, c.dx);
    } catch (const std::invalid_argument&) {
      add("domain.dx", "must divide the domain: x_left and x_right must be multiples of dx");
    }
  }
  if (c.x_right > c.x_left) {
    try {
      const auto [l, r] = profile_support(c.initial.profile);
      if (l + c.initial.center < c.x_left) {
        add("domain.x_left", "initial support starts at " + format_real(l + c.initial.center) + " outside the domain");
      }
      if (r + c.initial.center > c.x_right) {
        add("domain.x_right", "initial support ends at " + format_real(r + c.initial.center) + " outside the domain");
      }
    } catch (const std::exception&) {
      // reported by validate_profile
    }
  }
  if (grid_solver) {
    if (!(c.cfl > 0.0 && c.cfl <= 1.0)) add("fv.cfl", "must be in (0, 1]");
    if (!(c.dt_max > 0.0)) add("fv.dt_max", "must be > 0");
  }
  if (particle_solver) {
    if (c.particles < 2) add("particles.n", "need N >= 2");
    if (!(c.tol_abs > 0.0)) add("particles.tol_abs", "must be > 0");
    if (!(c.tol_rel >= 0.0)) add("particles.tol_rel", "must be >= 0");
  }
  return v;
}

}  // namespace aggdiff
