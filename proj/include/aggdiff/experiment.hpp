// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Config-driven runs and parameter sweeps, and the CSV files they write.
//
// Layout of output_dir:
//   fv/snap_t<time>.csv, fv/diagnostics.csv
//   particles/trajectory.csv, particles/snap_t<time>.csv, particles/rows.csv
//   cross_w2.csv                  (solver = both)
//   steady/steady_state.csv, steady/meta.csv   (reference = computed_steady_state)
//   toy/equilibria.csv, toy/trajectory.csv     (solver = toy)
//   summary.csv

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "aggdiff/config.hpp"
#include "aggdiff/csv.hpp"
#include "aggdiff/diagnostics.hpp"
#include "aggdiff/fv_solver.hpp"
#include "aggdiff/initial_data.hpp"
#include "aggdiff/particle_solver.hpp"
#include "aggdiff/quantile.hpp"
#include "aggdiff/toy_model.hpp"

namespace aggdiff {

// ---------------------------------------------------------------------------
// CSV writers

inline void write_density_csv(const std::filesystem::path& path, const GridDensity& rho) {
  CsvWriter w(path, {"x", "rho"});
  for (std::size_t k = 0; k < rho.size(); ++k) w.row({rho.x(k), rho[k]});
}

inline void write_quantile_csv(const std::filesystem::path& path, const QuantileFunction& q) {
  CsvWriter w(path, {"z", "u"});
  for (std::size_t j = 0; j < q.nodes.size(); ++j) w.row({q.nodes[j], q.values[j]});
}

inline void write_diagnostics_csv(const std::filesystem::path& path, std::span<const DiagnosticsRow> rows) {
  CsvWriter w(path, {"t", "mass", "linf", "l2sq", "m2", "energy", "dissipation", "w2_to_ref"});
  for (const DiagnosticsRow& r : rows) {
    w.row({format_real(r.t), format_real(r.mass), format_real(r.linf), format_real(r.l2sq), format_real(r.m2),
           format_real(r.energy), format_real(r.dissipation), format_real(r.w2_to_ref)});
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path, std::span<const ParticleEnsemble> snaps) {
  if (snaps.empty()) return;
  std::vector<std::string> header{"t"};
  for (std::size_t i = 1; i <= snaps.front().size(); ++i) header.push_back("X_" + std::to_string(i));
  CsvWriter w(path, header);
  for (const ParticleEnsemble& e : snaps) {
    std::vector<double> row{e.time};
    row.insert(row.end(), e.positions.begin(), e.positions.end());
    w.row(row);
  }
}

inline void write_particle_rows_csv(const std::filesystem::path& path, std::span<const ParticleRow> rows) {
  CsvWriter w(path, {"t", "m2", "center", "linf", "l2sq", "max_gap", "min_gap"});
  for (const ParticleRow& r : rows) w.row({r.t, r.m2, r.center, r.linf, r.l2sq, r.max_gap, r.min_gap});
}

inline void write_steady_state(const std::filesystem::path& dir, const SteadyState& s, double epsilon) {
  write_density_csv(dir / "steady_state.csv", s.density);
  CsvWriter w(dir / "meta.csv", {"epsilon", "C", "residual", "support_left", "support_right"});
  w.row({epsilon, s.lagrange_constant, s.residual, s.support_left, s.support_right});
}

inline std::string snapshot_name(double t) { return "snap_t" + format_time_label(t) + ".csv"; }

// ---------------------------------------------------------------------------
// Single runs

struct RunSummary {
  std::string solver;
  double t_end = 0.0;
  double final_linf = 0.0;
  double final_m2 = 0.0;
  std::optional<double> final_w2_to_ref;
  std::optional<DecayFit> decay;
  std::optional<HypothesisReport> hypotheses;
};

struct ExperimentResult {
  std::optional<FvRun> fv;
  std::optional<ParticleRun> particles;
  std::optional<SteadyState> steady;
  std::vector<std::pair<double, double>> cross_w2;  // (t, W2(fv, particles))
  std::optional<ToyTrajectory> toy;
  std::optional<ToyEquilibriaRow> toy_equilibria;
  std::optional<Basin> toy_basin;
  std::vector<RunSummary> summaries;
};

namespace detail {

inline void write_summary(const std::filesystem::path& path, std::span<const RunSummary> rows) {
  CsvWriter w(path, {"solver", "t_end", "final_linf", "final_m2", "final_w2_to_ref", "decay_rate", "decay_r_squared",
                     "hyp_threshold", "hyp_steady_half_width", "hyp_w_inf_initial", "hyp_steady_condition",
                     "hyp_initial_condition", "hyp_satisfied"});
  for (const RunSummary& s : rows) {
    const auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
    const HypothesisReport* h = s.hypotheses ? &*s.hypotheses : nullptr;
    w.row({s.solver, format_real(s.t_end), format_real(s.final_linf), format_real(s.final_m2),
           format_real(s.final_w2_to_ref), s.decay ? format_real(s.decay->rate) : "",
           s.decay ? format_real(s.decay->r_squared) : "", h ? format_real(h->threshold) : "",
           h ? format_real(h->steady_half_width) : "", h ? format_real(h->w_inf_initial) : "",
           h ? flag(h->steady_condition) : "", h ? flag(h->initial_condition) : "", h ? flag(h->satisfied()) : ""});
  }
}

inline std::optional<DecayFit> try_decay_fit(std::span<const std::pair<double, double>> series) {
  try {
    return w2_decay_fit(series);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

inline ExperimentResult run_toy(const ExperimentConfig& cfg, bool write) {
  ExperimentResult out;
  const ToyProblem p{cfg.epsilon, cfg.kernel.build()};
  out.toy_equilibria = equilibria_row(p);
  out.toy_basin = classify_basin(p, cfg.toy_x0);
  Rk23Options opt;
  opt.tol_abs = cfg.tol_abs;
  opt.tol_rel = cfg.tol_rel;
  out.toy = integrate_toy(p, cfg.toy_x0, cfg.t_end, cfg.diagnostics_dt, opt);
  if (write) {
    const auto dir = cfg.output_dir / "toy";
    const ToyEquilibriaRow& e = *out.toy_equilibria;
    CsvWriter eq(dir / "equilibria.csv", {"epsilon", "a", "b", "fold"});
    eq.row({format_real(e.epsilon), format_real(e.a), format_real(e.b), format_real(e.fold)});
    CsvWriter tr(dir / "trajectory.csv", {"t", "X"});
    for (std::size_t i = 0; i < out.toy->t.size(); ++i) tr.row({out.toy->t[i], out.toy->x[i]});
  }
  return out;
}

}  // namespace detail

/// Runs the configured solver(s). Throws ConfigError on an invalid config;
/// solver failures propagate.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write = true) {
  if (auto v = validate_config(cfg); !v.empty()) throw ConfigError(std::move(v));
  if (cfg.solver == SolverKind::toy) return detail::run_toy(cfg, write);

  ExperimentResult out;
  const InteractionKernel kernel = cfg.kernel.build();
  const UniformGrid grid = UniformGrid::from_domain(cfg.x_left, cfg.x_right, cfg.dx);
  const GridDensity rho0 = build_initial(cfg.initial, grid);
  const bool run_fv = cfg.solver == SolverKind::fv || cfg.solver == SolverKind::both;
  const bool run_part = cfg.solver == SolverKind::particles || cfg.solver == SolverKind::both;

  const GridDensity* reference = nullptr;
  if (cfg.reference == ReferenceKind::computed_steady_state) {
    SteadyStateOptions so;
    so.x_left = cfg.x_left;
    so.x_right = cfg.x_right;
    so.dx = cfg.dx;
    out.steady = compute_steady_state(kernel, cfg.epsilon, mass(rho0), center_of_mass(rho0), so);
    if (!out.steady->trivial) reference = &out.steady->density;
    if (write) write_steady_state(cfg.output_dir / "steady", *out.steady, cfg.epsilon);
  }
  const auto hypotheses = [&]() -> std::optional<HypothesisReport> {
    if (!out.steady || out.steady->trivial) return std::nullopt;
    return stability_hypotheses_check(rho0, *out.steady, kernel);
  };

  if (run_fv) {
    FvConfig fc;
    fc.epsilon = cfg.epsilon;
    fc.cfl = cfg.cfl;
    fc.dt_max = cfg.dt_max;
    fc.t_end = cfg.t_end;
    fc.snapshot_times = cfg.snapshot_times;
    fc.diagnostics_dt = cfg.diagnostics_dt;
    out.fv = run(rho0, kernel, fc, reference);
    RunSummary s;
    s.solver = "fv";
    s.t_end = cfg.t_end;
    const DiagnosticsRow& last = out.fv->diagnostics.back();
    s.final_linf = last.linf;
    s.final_m2 = last.m2;
    s.final_w2_to_ref = last.w2_to_ref;
    if (reference) {
      std::vector<std::pair<double, double>> series;
      for (const DiagnosticsRow& r : out.fv->diagnostics) series.emplace_back(r.t, *r.w2_to_ref);
      s.decay = detail::try_decay_fit(series);
    }
    s.hypotheses = hypotheses();
    out.summaries.push_back(s);
    if (write) {
      const auto dir = cfg.output_dir / "fv";
      for (const FvState& snap : out.fv->snapshots) write_density_csv(dir / snapshot_name(snap.time), snap.density);
      write_diagnostics_csv(dir / "diagnostics.csv", out.fv->diagnostics);
    }
  }

  if (run_part) {
    ParticleOptions po;
    po.integrator.tol_abs = cfg.tol_abs;
    po.integrator.tol_rel = cfg.tol_rel;
    po.diffusion = cfg.particle_diffusion;
    po.row_dt = cfg.particle_row_dt > 0.0 ? cfg.particle_row_dt : cfg.diagnostics_dt;
    std::vector<double> times = cfg.snapshot_times;
    if (out.fv) {
      for (const FvState& snap : out.fv->snapshots) times.push_back(snap.time);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    out.particles = run_particles(rho0, static_cast<std::size_t>(cfg.particles), kernel, cfg.epsilon, cfg.t_end,
                                  times, po);
    const ParticleEnsemble& fin = out.particles->final_state;
    RunSummary s;
    s.solver = "particles";
    s.t_end = cfg.t_end;
    const ParticleRow row = particle_row(fin);
    s.final_linf = row.linf;
    s.final_m2 = row.m2;
    if (reference) {
      s.final_w2_to_ref = wasserstein_p(reconstruct_quantile(fin), PiecewiseQuantile::from_density(*reference), 2.0,
                                        cfg.quantile_nodes);
    }
    s.hypotheses = hypotheses();
    out.summaries.push_back(s);

    if (out.fv) {
      for (const FvState& fs : out.fv->snapshots) {
        for (const ParticleEnsemble& ps : out.particles->snapshots) {
          if (std::abs(ps.time - fs.time) < 1e-12) {
            out.cross_w2.emplace_back(fs.time, wasserstein_p(PiecewiseQuantile::from_density(fs.density),
                                                             reconstruct_quantile(ps), 2.0, cfg.quantile_nodes));
          }
        }
      }
    }
    if (write) {
      const auto dir = cfg.output_dir / "particles";
      write_trajectory_csv(dir / "trajectory.csv", out.particles->snapshots);
      write_particle_rows_csv(dir / "rows.csv", out.particles->rows);
      for (const ParticleEnsemble& e : out.particles->snapshots) {
        write_density_csv(dir / snapshot_name(e.time), resample(reconstruct_density(e), grid));
      }
      if (!out.cross_w2.empty()) {
        CsvWriter w(cfg.output_dir / "cross_w2.csv", {"t", "w2"});
        for (const auto& [t, d] : out.cross_w2) w.row({t, d});
      }
    }
  }
  if (write) detail::write_summary(cfg.output_dir / "summary.csv", out.summaries);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParameter { epsilon, R, delta, X0 };

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  if (s == "epsilon") return SweepParameter::epsilon;
  if (s == "R") return SweepParameter::R;
  if (s == "delta") return SweepParameter::delta;
  if (s == "X0") return SweepParameter::X0;
  throw std::invalid_argument("unknown sweep parameter '" + s + "' (epsilon | R | delta | X0)");
}

struct SweepRow {
  double value = 0.0;
  std::string classification;  // steady | decaying | undetermined | toy basin | failed
  std::optional<double> final_linf;
  std::optional<double> final_m2;
  std::optional<double> final_w2_to_ref;
  std::string error;
};

inline constexpr double kSteadyW2Threshold = 1e-3;
inline constexpr double kDecayLinfFraction = 0.1;

/// steady: final W2 to the steady state < 1e-3. decaying: final linf below
/// 0.1 of the initial value with m2 increasing over the last two rows.
inline std::string classify_run(const ExperimentResult& r) {
  if (r.toy) {
    // Attraction to a is decided by integration, not by the predicted basin.
    const double x_end = r.toy->x.back();
    const auto& e = *r.toy_equilibria;
    if (e.a && std::abs(x_end - *e.a) < 1e-3) return to_string(Basin::converges_to_a);
    if (r.toy->x.size() >= 2 && x_end > r.toy->x[r.toy->x.size() - 2] && (!e.b || x_end > *e.b)) {
      return to_string(Basin::diverges);
    }
    return "undetermined";
  }
  if (!r.fv && !r.particles) return "undetermined";
  const RunSummary& s = r.summaries.front();
  if (s.final_w2_to_ref && *s.final_w2_to_ref < kSteadyW2Threshold) return "steady";
  if (r.fv) {
    const auto& d = r.fv->diagnostics;
    if (d.size() >= 2 && d.back().linf < kDecayLinfFraction * d.front().linf &&
        d.back().m2 > d[d.size() - 2].m2) {
      return "decaying";
    }
  } else {
    const auto& rows = r.particles->rows;
    if (rows.size() >= 2 && rows.back().linf < kDecayLinfFraction * rows.front().linf &&
        rows.back().m2 > rows[rows.size() - 2].m2) {
      return "decaying";
    }
  }
  return "undetermined";
}

inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, SweepParameter p, double v) {
  switch (p) {
    case SweepParameter::epsilon: cfg.epsilon = v; break;
    case SweepParameter::R:
      if (!std::holds_alternative<UniformBox>(cfg.initial.profile)) {
        throw std::invalid_argument("sweep over R needs a uniform_box initial profile");
      }
      cfg.initial.profile = UniformBox{v};
      break;
    case SweepParameter::delta:
      if (!std::holds_alternative<OscillatingGaussian>(cfg.initial.profile)) {
        throw std::invalid_argument("sweep over delta needs an oscillating_gaussian initial profile");
      }
      cfg.initial.profile = OscillatingGaussian{v};
      break;
    case SweepParameter::X0:
      if (cfg.solver != SolverKind::toy) throw std::invalid_argument("sweep over X0 needs solver = toy");
      cfg.toy_x0 = v;
      break;
  }
  return cfg;
}

/// Worker count: hardware threads, capped by AGGDIFF_THREADS when set.
inline std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("AGGDIFF_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

inline std::string sweep_label(SweepParameter p, double v) {
  static const char* names[] = {"epsilon", "R", "delta", "X0"};
  return std::string(names[static_cast<int>(p)]) + "_" + format_time_label(v);
}

/// One run per value, each in output_dir/<param>_<value>/. Failed runs are
/// recorded and the sweep continues. Rows come back in input order.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepParameter p, std::span<const double> values,
                                   bool write = true) {
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      SweepRow& row = rows[i];
      row.value = values[i];
      try {
        ExperimentConfig cfg = apply_sweep_value(base, p, values[i]);
        cfg.output_dir = base.output_dir / sweep_label(p, values[i]);
        const ExperimentResult r = run_experiment(cfg, write);
        row.classification = classify_run(r);
        if (!r.summaries.empty()) {
          row.final_linf = r.summaries.front().final_linf;
          row.final_m2 = r.summaries.front().final_m2;
          row.final_w2_to_ref = r.summaries.front().final_w2_to_ref;
        } else if (r.toy) {
          row.final_m2 = r.toy->x.back();
        }
      } catch (const std::exception& e) {
        row.classification = "failed";
        row.error = e.what();
      }
    }
  };
  const std::size_t n = worker_count(values.size());
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return rows;
}

inline void write_phase_table(const std::filesystem::path& path, const std::string& param,
                              std::span<const SweepRow> rows) {
  CsvWriter w(path, {param, "classification", "final_linf", "final_m2", "final_w2_to_ref", "error"});
  for (const SweepRow& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    w.row({format_real(r.value), r.classification, format_real(r.final_linf), format_real(r.final_m2),
           format_real(r.final_w2_to_ref), err});
  }
}

}  // namespace aggdiff
