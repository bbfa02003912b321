// datalmi: command-line front end for synthesis, simulation, sweeps and SDP export.

#include <datalmi/experiments.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace datalmi;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int parallel = 1;
  std::optional<double> margin;
  std::optional<double> tol;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed = true) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (with_seed) cmd->add_option("--seed", c.seed, "overrides the offline seed (sweep: the x0 seed)");
  cmd->add_option("--out", c.out, "output directory (default: config output_dir)");
  cmd->add_option("--margin", c.margin, "relative strictness margin of the LMIs");
  cmd->add_option("--tol", c.tol, "solver feasibility and gap tolerance");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.margin) cfg.synthesis.relative_margin = *c.margin;
  if (c.tol) cfg.synthesis.solver.feas_tol = cfg.synthesis.solver.gap_tol = *c.tol;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

json matrix_json(const Matrix& m) { return detail::matrix_to_json(m); }

[[noreturn]] void fail(const std::string& kind, const std::string& message, int code = 1) {
  std::cout << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  std::exit(code);
}

// Spectral radius of A(delta) + B K on `points` evenly spaced deltas over the vertex range.
json radius_scan(const ExperimentConfig& cfg, const Matrix& K, int points) {
  json scan = json::array();
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double d = cfg.vertex_deltas[0] + (cfg.vertex_deltas[1] - cfg.vertex_deltas[0]) * i / (points - 1);
    const SystemPair s = benchmark_system(d, cfg.kappa);
    const double r = spectral_radius(s.closed_loop(K));
    worst = std::max(worst, r);
    scan.push_back({{"delta", d}, {"rho", r}});
  }
  return {{"max_rho", worst}, {"grid", scan}};
}

int cmd_synth(const Common& c, const std::string& manifest) {
  ExperimentConfig cfg = resolve(c);
  if (c.seed) cfg.offline.seed = *c.seed;
  std::vector<ConsistencyGram> grams;
  if (!manifest.empty()) {
    for (const auto& ds : load_manifest_datasets(manifest)) grams.push_back(consistency_gram(ds));
  } else {
    grams = offline_setup(cfg).grams;
  }
  const SynthesisSolution sol = solve(pose_stabilization(grams, cfg.synthesis), cfg.synthesis.solver);
  if (!sol.ok()) fail("infeasible_setup", "robust stabilization is infeasible on these datasets: " + sol.report.message, 3);
  json out{{"status", to_string(sol.status)},
           {"K", matrix_json(sol.K)},
           {"P", matrix_json(sol.P)},
           {"gamma", sol.gamma},
           {"reduced_accuracy", sol.report.reduced_accuracy},
           {"stability_scan", radius_scan(cfg, sol.K, 21)}};
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_simulate(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  if (c.seed) cfg.offline.seed = *c.seed;
  const RunRecord r = run_single(cfg);
  write_run_outputs(r, cfg, cfg.output_dir);
  json summary = {{"J_adaptive", detail::optional_to_json(r.J_adaptive())},
                  {"J_robust", detail::optional_to_json(r.J_robust())},
                  {"variation", detail::optional_to_json(r.variation)},
                  {"output_dir", cfg.output_dir}};
  std::cout << summary.dump(2) << std::endl;
  if (!r.both_completed())
    fail("run_failed", "adaptive: " + r.adaptive.error + "; robust: " + r.robust.error, 4);
  return 0;
}

int cmd_sweep(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  if (c.seed) cfg.sweep.seed = *c.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult r = run_sweep(cfg, c.parallel);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_sweep_outputs(r, cfg, cfg.output_dir, secs);
  std::cout << sweep_summary_csv(r.summary);
  return 0;
}

int cmd_export(const Common& c, int step) {
  ExperimentConfig cfg = resolve(c);
  if (c.seed) cfg.offline.seed = *c.seed;
  const OfflineSetup setup = offline_setup(cfg);
  const StepProblem sp = problem_at_step(cfg, setup, step);
  fs::create_directories(cfg.output_dir);
  const fs::path path = fs::path(cfg.output_dir) / ("step_" + std::to_string(step) + ".dat-s");
  detail::write_text(path, export_sdpa(sp.posed.problem));
  json out{{"file", path.string()},
           {"kind", sp.kind},
           {"state_scale", sp.scale},
           {"blocks", sp.posed.problem.blocks.size()},
           {"variables", sp.posed.problem.variable_names}};
  std::cout << out.dump(2) << std::endl;
  return 0;
}

// Post-hoc controller invariants on a trace file.
int cmd_check(const Common& c, const std::string& trace_path, double decrease_floor) {
  const ExperimentConfig cfg = resolve(c);
  std::ifstream f(trace_path);
  if (!f) fail("io", "cannot open " + trace_path);
  const auto rows = read_trace_csv(f, cfg.state_dim(), cfg.input_dim());
  const ConstraintPolytope poly = cfg.polytope();
  json violations = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double gain_err = (r.u - r.K * r.x).norm();
    if (gain_err > 1e-9 * std::max(1.0, r.u.norm()))
      violations.push_back({{"k", r.k}, {"check", "u = K x"}, {"value", gain_err}});
    if (poly.W_u.rows() > 0 && (poly.W_u * r.u).maxCoeff() > 1.0 + 1e-8)
      violations.push_back({{"k", r.k}, {"check", "input constraint"}, {"value", (poly.W_u * r.u).maxCoeff()}});
    if (poly.W_x.rows() > 0 && (poly.W_x * r.x).maxCoeff() > 1.0 + 1e-8)
      violations.push_back({{"k", r.k}, {"check", "state constraint"}, {"value", (poly.W_x * r.x).maxCoeff()}});
    if (i + 1 < rows.size()) {
      const Vector& xn = rows[i + 1].x;
      const double v0 = r.x.dot(r.P * r.x), v1 = xn.dot(r.P * xn);
      if (v0 > decrease_floor && !(v1 < v0))
        violations.push_back({{"k", r.k}, {"check", "Lyapunov decrease"}, {"value", v1 - v0}});
    }
  }
  json out{{"rows", rows.size()}, {"violations", violations}, {"ok", violations.empty()}};
  std::cout << out.dump(2) << std::endl;
  return violations.empty() ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven adaptive LMI control: synthesis, simulation and sweeps"};
  app.require_subcommand(1);
  Common common;
  std::string manifest, trace;
  int step = 5;
  double decrease_floor = 1e-10;

  auto* synth = app.add_subcommand("synth", "robust stabilization from offline data; prints K, P");
  add_common(synth, common);
  synth->add_option("--manifest", manifest, "dataset manifest (JSON); default: generate from the config");

  auto* sim = app.add_subcommand("simulate", "paired adaptive/robust run; writes traces, metrics and a plot script");
  add_common(sim, common);

  auto* sweep = app.add_subcommand("sweep", "constant-delta sweep with random initial states");
  add_common(sweep, common);
  sweep->add_option("--parallel", common.parallel, "worker threads")->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("export-sdpa", "write the step-k SDP of the adaptive run in SDPA sparse format");
  add_common(exp, common);
  exp->add_option("--step", step, "time step k")->check(CLI::NonNegativeNumber);

  auto* check = app.add_subcommand("check", "verify controller invariants on a trace CSV");
  add_common(check, common, false);
  check->add_option("--trace", trace, "trace CSV written by simulate")->required();
  check->add_option("--floor", decrease_floor, "Lyapunov values below this are not checked for decrease");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what(), 2);
  }

  try {
    if (*synth) return cmd_synth(common, manifest);
    if (*sim) return cmd_simulate(common);
    if (*sweep) return cmd_sweep(common);
    if (*exp) return cmd_export(common, step);
    if (*check) return cmd_check(common, trace, decrease_floor);
  } catch (const ConfigError& e) {
    fail("config", e.what());
  } catch (const AssumptionViolated& e) {
    fail("infeasible_setup", e.what(), 3);
  } catch (const std::exception& e) {
    fail("runtime", e.what());
  }
  return 1;
}
