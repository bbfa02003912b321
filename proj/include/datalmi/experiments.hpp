#pragma once

// Reproducible experiments over the benchmark plant: the paired
// adaptive/robust trajectory run and the constant-delta sweep.

#include <datalmi/controller.hpp>
#include <datalmi/plant.hpp>
#include <datalmi/synthesis.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace datalmi {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct OfflineConfig {
  std::vector<int> lengths{3, 2};  // one per vertex
  Vector x0 = (Vector(2) << 0.95, 0.0).finished();
  double input_lo = -1.0;
  double input_hi = 1.0;
  std::uint64_t seed = 4;
};

struct SweepConfig {
  std::vector<double> deltas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int runs_per_delta = 15;
  std::uint64_t seed = 1;
  double x0_bound = 1.0;  // x0 uniform on the infinity-norm ball of this radius
};

struct ExperimentConfig {
  double kappa = kBenchmarkKappa;
  std::vector<double> vertex_deltas{kBenchmarkDeltaMin, kBenchmarkDeltaMax};
  std::vector<std::pair<int, double>> schedule{{0, 0.15}, {15, 0.30}};
  int horizon = 50;
  int window_length = 5;
  Matrix Q = Matrix::Identity(2, 2);
  Matrix R = Matrix::Constant(1, 1, 0.01);
  Matrix W_x = Matrix::Zero(0, 2);
  Matrix W_u = (Matrix(2, 1) << 1.0, -1.0).finished();
  OfflineConfig offline;
  Vector x0 = (Vector(2) << 0.95, 0.0).finished();
  SweepConfig sweep;
  SynthesisOptions synthesis;
  double inconsistency_tol = 1e-6;
  std::string output_dir = "out";

  int state_dim() const { return 2; }
  int input_dim() const { return 1; }

  void validate() const {
    if (horizon < 0) throw ConfigError("config: horizon must be nonnegative");
    if (window_length < 1) throw ConfigError("config: window_length must be at least 1");
    if (vertex_deltas.size() != 2 || !(vertex_deltas[0] < vertex_deltas[1]))
      throw ConfigError("config: vertex_deltas must be two increasing values");
    if (offline.lengths.size() != vertex_deltas.size())
      throw ConfigError("config: offline.lengths needs one entry per vertex");
    for (int t : offline.lengths)
      if (t < 1) throw ConfigError("config: offline lengths must be positive");
    if (!(offline.input_lo <= offline.input_hi)) throw ConfigError("config: offline.input_range is empty");
    if (offline.x0.size() != state_dim() || x0.size() != state_dim())
      throw ConfigError("config: initial states must have dimension 2");
    if (Q.rows() != state_dim() || R.rows() != input_dim())
      throw ConfigError("config: Q must be 2x2 and R must be 1x1");
    if (sweep.runs_per_delta < 0) throw ConfigError("config: sweep.runs_per_delta must be nonnegative");
    if (!(sweep.x0_bound >= 0.0)) throw ConfigError("config: sweep.x0_bound must be nonnegative");
    for (double d : sweep.deltas)
      if (d < vertex_deltas[0] || d > vertex_deltas[1])
        throw ConfigError("config: sweep delta " + io::format_double(d) + " lies outside the vertex range");
    if (!(inconsistency_tol > 0.0)) throw ConfigError("config: inconsistency_tol must be positive");
    try {
      (void)delta_schedule();
      (void)weights();
      (void)polytope();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }

  DeltaSchedule delta_schedule() const { return DeltaSchedule(schedule, vertex_deltas[0], vertex_deltas[1]); }
  CostWeights weights() const { return CostWeights::make(Q, R); }
  ConstraintPolytope polytope() const { return ConstraintPolytope(W_x, W_u); }

  BenchmarkPlant plant(const DeltaSchedule& s) const {
    BenchmarkPlant p;
    p.kappa = kappa;
    p.schedule = s;
    p.delta_lo = vertex_deltas[0];
    p.delta_hi = vertex_deltas[1];
    return p;
  }
};

namespace detail {

// An empty array means a matrix with no rows and `empty_cols` columns.
inline Matrix matrix_from_json(const json& j, const char* what, Eigen::Index empty_cols = -1) {
  if (j.is_array() && j.empty() && empty_cols >= 0) return Matrix::Zero(0, empty_cols);
  if (!j.is_array() || j.empty() || !j.front().is_array()) throw ConfigError(std::string("config: ") + what + " must be a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(std::string("config: ") + what + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string("config: ") + what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// Symmetric box |u_i| <= b_i as rows of W_u.
inline Matrix input_box_rows(const Vector& bound) {
  const auto m = bound.size();
  Matrix w = Matrix::Zero(2 * m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(bound(i) > 0.0)) throw ConfigError("config: input bounds must be positive");
    w(2 * i, i) = 1.0 / bound(i);
    w(2 * i + 1, i) = -1.0 / bound(i);
  }
  return w;
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected so that typos surface.
inline ExperimentConfig config_from_json(const json& j) {
  static const std::vector<std::string> known{"plant",   "horizon", "window_length",     "weights",   "constraints",
                                              "offline", "x0",      "sweep",             "solver",    "inconsistency_tol",
                                              "output_dir"};
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("config: unknown key '" + key + "'");
  ExperimentConfig c;
  try {
    if (j.contains("plant")) {
      const auto& p = j["plant"];
      c.kappa = p.value("kappa", c.kappa);
      if (p.contains("vertex_deltas")) c.vertex_deltas = p["vertex_deltas"].get<std::vector<double>>();
      if (p.contains("schedule")) {
        c.schedule.clear();
        for (const auto& bp : p["schedule"]) c.schedule.emplace_back(bp.at(0).get<int>(), bp.at(1).get<double>());
      }
    }
    c.horizon = j.value("horizon", c.horizon);
    c.window_length = j.value("window_length", c.window_length);
    if (j.contains("weights")) {
      if (j["weights"].contains("Q")) c.Q = detail::matrix_from_json(j["weights"]["Q"], "weights.Q");
      if (j["weights"].contains("R")) c.R = detail::matrix_from_json(j["weights"]["R"], "weights.R");
    }
    if (j.contains("constraints")) {
      const auto& k = j["constraints"];
      if (k.contains("input_bound") && k.contains("W_u"))
        throw ConfigError("config: give either constraints.input_bound or constraints.W_u");
      if (k.contains("input_bound")) c.W_u = detail::input_box_rows(detail::vector_from_json(k["input_bound"], "input_bound"));
      if (k.contains("W_u")) c.W_u = detail::matrix_from_json(k["W_u"], "constraints.W_u", c.input_dim());
      if (k.contains("W_x")) c.W_x = detail::matrix_from_json(k["W_x"], "constraints.W_x", c.state_dim());
    }
    if (j.contains("offline")) {
      const auto& o = j["offline"];
      if (o.contains("lengths")) c.offline.lengths = o["lengths"].get<std::vector<int>>();
      if (o.contains("x0")) c.offline.x0 = detail::vector_from_json(o["x0"], "offline.x0");
      if (o.contains("input_range")) {
        const auto r = o["input_range"].get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("config: offline.input_range must have two entries");
        c.offline.input_lo = r[0];
        c.offline.input_hi = r[1];
      }
      c.offline.seed = o.value("seed", c.offline.seed);
    }
    if (j.contains("x0")) c.x0 = detail::vector_from_json(j["x0"], "x0");
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      if (s.contains("deltas")) c.sweep.deltas = s["deltas"].get<std::vector<double>>();
      c.sweep.runs_per_delta = s.value("runs_per_delta", c.sweep.runs_per_delta);
      c.sweep.seed = s.value("seed", c.sweep.seed);
      c.sweep.x0_bound = s.value("x0_bound", c.sweep.x0_bound);
    }
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      auto& t = c.synthesis.solver;
      t.feas_tol = s.value("feas_tol", t.feas_tol);
      t.gap_tol = s.value("gap_tol", t.gap_tol);
      t.max_iterations = s.value("max_iterations", t.max_iterations);
      t.variable_bound = s.value("variable_bound", t.variable_bound);
      t.accept_tol = s.value("accept_tol", t.accept_tol);
      t.accept_gap = s.value("accept_gap", t.accept_gap);
      c.synthesis.relative_margin = s.value("relative_margin", c.synthesis.relative_margin);
      c.synthesis.positivity_floor = s.value("positivity_floor", c.synthesis.positivity_floor);
    }
    c.inconsistency_tol = j.value("inconsistency_tol", c.inconsistency_tol);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json sched = json::array();
  for (const auto& [k, d] : c.schedule) sched.push_back({k, d});
  const auto& t = c.synthesis.solver;
  return {
      {"plant", {{"kappa", c.kappa}, {"vertex_deltas", c.vertex_deltas}, {"schedule", sched}}},
      {"horizon", c.horizon},
      {"window_length", c.window_length},
      {"weights", {{"Q", detail::matrix_to_json(c.Q)}, {"R", detail::matrix_to_json(c.R)}}},
      {"constraints", {{"W_x", detail::matrix_to_json(c.W_x)}, {"W_u", detail::matrix_to_json(c.W_u)}}},
      {"offline",
       {{"lengths", c.offline.lengths},
        {"x0", detail::vector_to_json(c.offline.x0)},
        {"input_range", {c.offline.input_lo, c.offline.input_hi}},
        {"seed", c.offline.seed}}},
      {"x0", detail::vector_to_json(c.x0)},
      {"sweep",
       {{"deltas", c.sweep.deltas},
        {"runs_per_delta", c.sweep.runs_per_delta},
        {"seed", c.sweep.seed},
        {"x0_bound", c.sweep.x0_bound}}},
      {"solver",
       {{"feas_tol", t.feas_tol},
        {"gap_tol", t.gap_tol},
        {"max_iterations", t.max_iterations},
        {"variable_bound", t.variable_bound},
        {"accept_tol", t.accept_tol},
        {"accept_gap", t.accept_gap},
        {"relative_margin", c.synthesis.relative_margin},
        {"positivity_floor", c.synthesis.positivity_floor}}},
      {"inconsistency_tol", c.inconsistency_tol},
      {"output_dir", c.output_dir},
  };
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

struct OfflineSetup {
  std::vector<SystemPair> vertices;
  std::vector<TrajectoryDataset> datasets;
  std::vector<ConsistencyGram> grams;
  SynthesisSolution stabilization;  // robust stabilization certificate on the offline data
};

/// Vertex v draws its inputs from derive_seed(offline seed, v). Throws
/// AssumptionViolated when the offline data do not certify robust stabilization.
inline OfflineSetup offline_setup(const ExperimentConfig& c) {
  c.validate();
  OfflineSetup s;
  for (std::size_t v = 0; v < c.vertex_deltas.size(); ++v) {
    s.vertices.push_back(benchmark_system(c.vertex_deltas[v], c.kappa));
    s.datasets.push_back(generate_offline_data(s.vertices.back(), c.offline.lengths[v], c.offline.x0, c.offline.input_lo,
                                               c.offline.input_hi, derive_seed(c.offline.seed, v)));
    s.grams.push_back(consistency_gram(s.datasets.back()));
  }
  s.stabilization = solve(pose_stabilization(s.grams, c.synthesis), c.synthesis.solver);
  if (!s.stabilization.ok())
    throw AssumptionViolated("offline data do not certify robust stabilization (offline seed " +
                             std::to_string(c.offline.seed) + "): " + s.stabilization.report.message);
  return s;
}

enum class ControllerKind { adaptive, robust };

struct ControllerRun {
  std::vector<TraceRow> trace;
  std::optional<double> cost;  // set only when the run reached T_e
  std::string error;
  double seconds = 0.0;
  std::map<std::string, int> modes;
  bool completed() const { return cost.has_value(); }
};

/// Closed loop over k = 0..T_e. A controller exception ends the run early
/// with the partial trace kept for diagnosis.
inline ControllerRun simulate(const ExperimentConfig& c, const std::vector<ConsistencyGram>& grams,
                              const DeltaSchedule& schedule, const Vector& x0, ControllerKind kind) {
  ControllerRun run;
  const auto t0 = std::chrono::steady_clock::now();
  PlantModel plant = c.plant(schedule).make(x0);
  ControllerState state = ControllerState::make(grams, c.window_length, c.weights(), c.polytope(), c.synthesis);
  state.inconsistency_tol = c.inconsistency_tol;
  std::vector<Vector> xs, us;
  try {
    for (int k = 0; k <= c.horizon; ++k) {
      const Vector x = plant.state();
      auto [d, next] = kind == ControllerKind::adaptive ? adaptive_step(std::move(state), x) : robust_step(std::move(state), x);
      state = std::move(next);
      run.trace.push_back({k, x, d.u, d.gamma, d.mode, d.lyapunov, d.iterations, d.solve_seconds, d.K, d.P});
      ++run.modes[to_string(d.mode)];
      xs.push_back(x);
      us.push_back(d.u);
      if (k < c.horizon) plant.step(d.u);
    }
    run.cost = true_cost(xs, us, c.Q, c.R, c.horizon);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

struct RunRecord {
  ControllerRun adaptive;
  ControllerRun robust;
  std::optional<double> variation;  // (J_R - J_A) / J_R, only when both finished and J_R > 0

  std::optional<double> J_adaptive() const { return adaptive.cost; }
  std::optional<double> J_robust() const { return robust.cost; }
  bool both_completed() const { return adaptive.completed() && robust.completed(); }
};

inline std::optional<double> performance_variation(const std::optional<double>& ja, const std::optional<double>& jr) {
  if (!ja || !jr || !(*jr > 0.0)) return std::nullopt;
  return (*jr - *ja) / *jr;
}

/// Both controllers share the offline data, x0 and delta schedule.
inline RunRecord run_paired(const ExperimentConfig& c, const OfflineSetup& setup, const DeltaSchedule& schedule,
                            const Vector& x0) {
  RunRecord r;
  r.adaptive = simulate(c, setup.grams, schedule, x0, ControllerKind::adaptive);
  r.robust = simulate(c, setup.grams, schedule, x0, ControllerKind::robust);
  r.variation = performance_variation(r.adaptive.cost, r.robust.cost);
  return r;
}

inline RunRecord run_single(const ExperimentConfig& c) {
  const OfflineSetup setup = offline_setup(c);
  return run_paired(c, setup, c.delta_schedule(), c.x0);
}

namespace detail {

inline json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json run_to_json(const ControllerRun& r) {
  double max_u = 0.0;
  for (const auto& row : r.trace) max_u = std::max(max_u, row.u.lpNorm<Eigen::Infinity>());
  int iterations = 0;
  for (const auto& row : r.trace) iterations += row.iterations;
  return {{"cost", optional_to_json(r.cost)},
          {"completed", r.completed()},
          {"error", r.error},
          {"steps", r.trace.size()},
          {"final_state_norm", r.trace.empty() ? json(nullptr) : json(r.trace.back().x.norm())},
          {"max_abs_input", max_u},
          {"modes", r.modes},
          {"solver_iterations", iterations},
          {"seconds", r.seconds}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

}  // namespace detail

inline json metrics_json(const RunRecord& r) {
  return {{"J_adaptive", detail::optional_to_json(r.J_adaptive())},
          {"J_robust", detail::optional_to_json(r.J_robust())},
          {"variation", detail::optional_to_json(r.variation)},
          {"adaptive", detail::run_to_json(r.adaptive)},
          {"robust", detail::run_to_json(r.robust)}};
}

/// Gnuplot script for the two traces: states and input against k.
inline std::string trajectory_plot_script() {
  return R"(# gnuplot -p plot.script
set datafile separator ','
set key autotitle columnhead
set multiplot layout 3,1
set ylabel 'x1'
plot 'trace_robust.csv' using 1:2 with lines lc rgb 'blue' title 'robust', \
     'trace_adaptive.csv' using 1:2 with lines lc rgb 'orange' title 'adaptive'
set ylabel 'x2'
plot 'trace_robust.csv' using 1:3 with lines lc rgb 'blue' title 'robust', \
     'trace_adaptive.csv' using 1:3 with lines lc rgb 'orange' title 'adaptive'
set ylabel 'u'
set xlabel 'k'
plot 'trace_robust.csv' using 1:4 with steps lc rgb 'blue' title 'robust', \
     'trace_adaptive.csv' using 1:4 with steps lc rgb 'orange' title 'adaptive'
unset multiplot
)";
}

/// trace_adaptive.csv, trace_robust.csv, metrics.json and plot.script under dir.
inline void write_run_outputs(const RunRecord& r, const ExperimentConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream a, b;
  write_trace_csv(a, r.adaptive.trace);
  write_trace_csv(b, r.robust.trace);
  detail::write_text(dir / "trace_adaptive.csv", a.str());
  detail::write_text(dir / "trace_robust.csv", b.str());
  json m = metrics_json(r);
  m["config"] = config_to_json(c);
  detail::write_text(dir / "metrics.json", m.dump(2) + "\n");
  detail::write_text(dir / "plot.script", trajectory_plot_script());
}

struct StepProblem {
  int step = 0;
  std::string kind;  // "adaptive" or "robust"
  double scale = 1.0;  // ||x_k||; the SDP is posed for x_k / ||x_k||
  Vector x;
  PosedProblem posed;
};

/// The first SDP the adaptive controller poses at step k of the configured run:
/// the adaptive problem on the online window once it is full and consistent, the robust
/// problem otherwise.
inline StepProblem problem_at_step(const ExperimentConfig& c, const OfflineSetup& setup, int k) {
  if (k < 0 || k > c.horizon) throw std::invalid_argument("problem_at_step: step outside [0, horizon]");
  PlantModel plant = c.plant(c.delta_schedule()).make(c.x0);
  ControllerState state = ControllerState::make(setup.grams, c.window_length, c.weights(), c.polytope(), c.synthesis);
  state.inconsistency_tol = c.inconsistency_tol;
  for (int j = 0; j < k; ++j) {
    auto [d, next] = adaptive_step(std::move(state), plant.state());
    state = std::move(next);
    plant.step(d.u);
  }
  const Vector x = plant.state();
  detail::absorb_sample(state, x);
  const detail::Normalized nz = detail::normalize(x, state.polytope);
  const bool adaptive =
      state.window.full() && relative_fit_residual(state.window.dataset()) <= state.inconsistency_tol;
  return StepProblem{k, adaptive ? "adaptive" : "robust", nz.scale, x,
                     adaptive ? pose_adaptive(state.offline_grams, consistency_gram(state.window.dataset()),
                                              state.weights, nz.x, nz.polytope, state.options)
                              : pose_robust(state.offline_grams, state.weights, nz.x, nz.polytope, state.options)};
}

struct SweepCell {
  int index = 0;
  double delta = 0.0;
  int run = 0;
  Vector x0;
  std::optional<double> J_adaptive;
  std::optional<double> J_robust;
  std::optional<double> variation;
  std::string error;
};

struct SweepSummaryRow {
  double delta = 0.0;
  int runs = 0;
  int defined = 0;    // runs with a variation value
  int undefined = 0;  // both finished but J_R = 0
  int failed = 0;     // at least one controller did not finish
  std::optional<double> min, q1, median, q3, max;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // ordered by cell index
  std::vector<SweepSummaryRow> summary;
};

/// Linear interpolation between order statistics; `sorted` must be ascending and nonempty.
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Cell i draws x0 from derive_seed(sweep seed, i), so results do not depend on scheduling.
inline Vector sweep_initial_state(const ExperimentConfig& c, int cell) {
  std::mt19937_64 rng(derive_seed(c.sweep.seed, static_cast<std::uint64_t>(cell)));
  std::uniform_real_distribution<double> dist(-c.sweep.x0_bound, c.sweep.x0_bound);
  Vector x(c.state_dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = dist(rng);
  return x;
}

inline std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepCell>& cells,
                                                    const std::vector<double>& deltas) {
  std::vector<SweepSummaryRow> rows;
  for (double d : deltas) {
    SweepSummaryRow row;
    row.delta = d;
    std::vector<double> v;
    for (const auto& cell : cells) {
      if (cell.delta != d) continue;
      ++row.runs;
      if (cell.variation) v.push_back(*cell.variation);
      else if (cell.J_adaptive && cell.J_robust) ++row.undefined;
      else ++row.failed;
    }
    row.defined = static_cast<int>(v.size());
    if (!v.empty()) {
      std::sort(v.begin(), v.end());
      row.min = v.front();
      row.q1 = quantile(v, 0.25);
      row.median = quantile(v, 0.5);
      row.q3 = quantile(v, 0.75);
      row.max = v.back();
    }
    rows.push_back(row);
  }
  return rows;
}

/// Every (delta, x0) cell runs both controllers at constant delta. A failed
/// cell is recorded and the sweep continues.
inline SweepResult run_sweep(const ExperimentConfig& c, int parallel = 1,
                             const std::optional<OfflineSetup>& given_setup = std::nullopt) {
  const OfflineSetup setup = given_setup ? *given_setup : offline_setup(c);
  SweepResult result;
  for (double d : c.sweep.deltas)
    for (int r = 0; r < c.sweep.runs_per_delta; ++r) {
      SweepCell cell;
      cell.index = static_cast<int>(result.cells.size());
      cell.delta = d;
      cell.run = r;
      cell.x0 = sweep_initial_state(c, cell.index);
      result.cells.push_back(std::move(cell));
    }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < result.cells.size(); i = next++) {
      SweepCell& cell = result.cells[i];
      try {
        const RunRecord rec = run_paired(c, setup, DeltaSchedule({{0, cell.delta}}, c.vertex_deltas[0], c.vertex_deltas[1]), cell.x0);
        cell.J_adaptive = rec.adaptive.cost;
        cell.J_robust = rec.robust.cost;
        cell.variation = rec.variation;
        cell.error = !rec.adaptive.error.empty() ? "adaptive: " + rec.adaptive.error
                     : !rec.robust.error.empty() ? "robust: " + rec.robust.error
                                                 : "";
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const int threads = std::max(1, parallel);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  result.summary = summarize_sweep(result.cells, c.sweep.deltas);
  return result;
}

namespace detail {

inline std::string csv_optional(const std::optional<double>& v) { return v ? io::format_double(*v) : "null"; }

// Errors go last and lose their commas so that the row stays parseable.
inline std::string csv_text(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace detail

/// One row per delta; rows without any defined variation carry null statistics.
inline std::string sweep_summary_csv(const std::vector<SweepSummaryRow>& rows) {
  std::ostringstream os;
  os << "delta,runs,defined,undefined,failed,min,q1,median,q3,max\n";
  for (const auto& r : rows)
    os << io::format_double(r.delta) << ',' << r.runs << ',' << r.defined << ',' << r.undefined << ',' << r.failed << ','
       << detail::csv_optional(r.min) << ',' << detail::csv_optional(r.q1) << ',' << detail::csv_optional(r.median)
       << ',' << detail::csv_optional(r.q3) << ',' << detail::csv_optional(r.max) << "\n";
  return os.str();
}

inline std::string sweep_runs_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream os;
  os << "cell,delta,run,x0_1,x0_2,J_adaptive,J_robust,variation,error\n";
  for (const auto& c : cells)
    os << c.index << ',' << io::format_double(c.delta) << ',' << c.run << ',' << io::format_double(c.x0(0)) << ','
       << io::format_double(c.x0(1)) << ',' << detail::csv_optional(c.J_adaptive) << ','
       << detail::csv_optional(c.J_robust) << ',' << detail::csv_optional(c.variation) << ','
       << detail::csv_text(c.error) << "\n";
  return os.str();
}

/// Box plot of the normalized cost difference per delta.
inline std::string sweep_plot_script() {
  return R"(# gnuplot -p plot.script
set datafile separator ','
set datafile missing 'null'
set xlabel 'delta'
set ylabel '(J_R - J_A) / J_R'
set boxwidth 0.04
set style fill empty
plot 'sweep_summary.csv' skip 1 using 1:7:6:10:9 with candlesticks whiskerbars lc rgb 'black' title 'quartiles', \
     '' skip 1 using 1:8:8:8:8 with candlesticks lc rgb 'red' notitle
)";
}

/// sweep_summary.csv, sweep_runs.csv, plot.script and metrics.json under dir.
inline void write_sweep_outputs(const SweepResult& r, const ExperimentConfig& c, const std::filesystem::path& dir,
                                double seconds) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "sweep_summary.csv", sweep_summary_csv(r.summary));
  detail::write_text(dir / "sweep_runs.csv", sweep_runs_csv(r.cells));
  detail::write_text(dir / "plot.script", sweep_plot_script());
  int failed = 0;
  for (const auto& cell : r.cells) failed += cell.error.empty() ? 0 : 1;
  json m = {{"cells", r.cells.size()}, {"failed_cells", failed}, {"seconds", seconds}, {"config", config_to_json(c)}};
  detail::write_text(dir / "metrics.json", m.dump(2) + "\n");
}

}  // namespace datalmi
