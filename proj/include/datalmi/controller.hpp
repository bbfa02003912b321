#pragma once

// Receding-horizon adaptive law with its fallback chain, and the robust baseline.

#include <datalmi/dataset.hpp>
#include <datalmi/io.hpp>
#include <datalmi/linalg.hpp>
#include <datalmi/synthesis.hpp>

#include <chrono>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace datalmi {

enum class ControlMode { solved_fresh, reused_gain, resolved_previous_window, robust_warmup };

inline const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::solved_fresh: return "solved_fresh";
    case ControlMode::reused_gain: return "reused_gain";
    case ControlMode::resolved_previous_window: return "resolved_previous_window";
    case ControlMode::robust_warmup: return "robust_warmup";
  }
  return "unknown";
}

inline ControlMode control_mode_from_string(const std::string& s) {
  for (auto m : {ControlMode::solved_fresh, ControlMode::reused_gain, ControlMode::resolved_previous_window,
                 ControlMode::robust_warmup})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown control mode '" + s + "'");
}

class AssumptionViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ControlDecision {
  Vector u;
  Matrix K;
  Matrix P;
  double gamma = 0.0;
  ControlMode mode = ControlMode::solved_fresh;
  double lyapunov = 0.0;  // x_k^T P x_k
  int iterations = 0;     // summed over every solve attempted this step
  double solve_seconds = 0.0;
};

struct ControllerState {
  std::vector<ConsistencyGram> offline_grams;
  RollingWindow window{1};
  std::optional<SynthesisSolution> last_solution;
  std::optional<RollingWindow> last_window;  // window of the last successful adaptive solve
  CostWeights weights;
  ConstraintPolytope polytope;
  SynthesisOptions options;
  std::vector<ControlMode> modes;
  double inconsistency_tol = 1e-6;  // relative least-squares residual beyond which the window is empty
  bool force_reuse = false;         // test hook: skip every solve once a solution exists
  std::optional<Vector> pending_x;  // (x_{k-1}, u_{k-1}) waiting for x_k
  std::optional<Vector> pending_u;

  static ControllerState make(std::vector<ConsistencyGram> grams, int window_length, CostWeights weights,
                              ConstraintPolytope polytope, SynthesisOptions options = {}) {
    if (grams.empty()) throw std::invalid_argument("ControllerState: no offline datasets");
    if (window_length < 1) throw std::invalid_argument("ControllerState: window length must be at least 1");
    ControllerState s;
    s.offline_grams = std::move(grams);
    s.window = RollingWindow(window_length);
    s.weights = std::move(weights);
    s.polytope = std::move(polytope);
    s.options = options;
    return s;
  }
};

namespace detail {

struct Normalized {
  double scale;
  Vector x;
  ConstraintPolytope polytope;
};

// x = s * x_hat with ||x_hat|| = 1; every block is homogeneous in (H, L, gamma, eps),
// so (s^2 H, s^2 L, s^2 gamma) solves the original problem and K, P are unchanged.
inline Normalized normalize(const Vector& x, const ConstraintPolytope& poly) {
  const double s = x.norm();
  if (s == 0.0) return {1.0, x, poly};
  return {s, x / s, poly.scaled(s)};
}

inline void unnormalize(SynthesisSolution& sol, double s) {
  const double s2 = s * s;
  sol.H *= s2;
  sol.L *= s2;
  sol.gamma *= s2;
  for (auto& e : sol.eps_v) e *= s2;
  for (auto& e : sol.eps_performance) e *= s2;
  if (sol.eps_o) *sol.eps_o *= s2;
  sol.objective *= s2;
}

template <class Pose>
SynthesisSolution timed_solve(const Vector& x, const ConstraintPolytope& poly, const SynthesisOptions& opt,
                              Pose&& pose, ControlDecision& d) {
  const auto t0 = std::chrono::steady_clock::now();
  const Normalized nz = normalize(x, poly);
  SynthesisSolution sol = solve(pose(nz.x, nz.polytope), opt.solver);
  if (sol.ok()) unnormalize(sol, nz.scale);
  d.iterations += sol.report.iterations;
  d.solve_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

inline ControlDecision decide(const Vector& x, const SynthesisSolution& sol, ControlMode mode, ControlDecision d) {
  d.K = sol.K;
  d.P = sol.P;
  d.gamma = sol.gamma;
  d.mode = mode;
  d.u = sol.K * x;
  d.lyapunov = x.dot(sol.P * x);
  return d;
}

inline void absorb_sample(ControllerState& s, const Vector& x) {
  if (s.pending_x && s.pending_u) s.window = s.window.pushed(*s.pending_x, *s.pending_u, x);
}

inline void record(ControllerState& s, const Vector& x, const ControlDecision& d) {
  s.pending_x = x;
  s.pending_u = d.u;
  s.modes.push_back(d.mode);
}

inline ControlDecision reuse_or_throw(const ControllerState& s, const Vector& x, ControlDecision d,
                                      const std::string& why) {
  if (!s.last_solution) throw AssumptionViolated("no prior solution and every solve failed: " + why);
  return decide(x, *s.last_solution, ControlMode::reused_gain, d);
}

inline SynthesisSolution robust_solve(const ControllerState& s, const Vector& x, ControlDecision& d) {
  return timed_solve(x, s.polytope, s.options,
                     [&](const Vector& xn, const ConstraintPolytope& pn) {
                       return pose_robust(s.offline_grams, s.weights, xn, pn, s.options);
                     },
                     d);
}

// Empty consistency class (mixed pre/post-jump samples) or a failed solve both yield nullopt.
inline std::optional<SynthesisSolution> adaptive_solve(const ControllerState& s, const RollingWindow& w,
                                                       const Vector& x, ControlDecision& d) {
  const TrajectoryDataset ds = w.dataset();
  if (relative_fit_residual(ds) > s.inconsistency_tol) return std::nullopt;
  const ConsistencyGram g = consistency_gram(ds);
  SynthesisSolution sol = timed_solve(x, s.polytope, s.options,
                                      [&](const Vector& xn, const ConstraintPolytope& pn) {
                                        return pose_adaptive(s.offline_grams, g, s.weights, xn, pn, s.options);
                                      },
                                      d);
  if (!sol.ok()) return std::nullopt;
  return sol;
}

}  // namespace detail

/// One step of the adaptive law at x_k. The sample (x_{k-1}, u_{k-1}, x_k) enters the window first.
inline std::pair<ControlDecision, ControllerState> adaptive_step(ControllerState state, const Vector& x) {
  detail::absorb_sample(state, x);
  ControlDecision d;
  if (state.force_reuse && state.last_solution) {
    d = detail::decide(x, *state.last_solution, ControlMode::reused_gain, d);
  } else if (!state.window.full()) {
    SynthesisSolution sol = detail::robust_solve(state, x, d);
    if (sol.ok()) {
      d = detail::decide(x, sol, ControlMode::robust_warmup, d);
      state.last_solution = std::move(sol);
    } else {
      d = detail::reuse_or_throw(state, x, d, sol.report.message);
    }
  } else if (auto fresh = detail::adaptive_solve(state, state.window, x, d)) {
    d = detail::decide(x, *fresh, ControlMode::solved_fresh, d);
    state.last_solution = std::move(*fresh);
    state.last_window = state.window;
  } else if (auto prev = state.last_window ? detail::adaptive_solve(state, *state.last_window, x, d) : std::nullopt) {
    d = detail::decide(x, *prev, ControlMode::resolved_previous_window, d);
    state.last_solution = std::move(*prev);
  } else {
    d = detail::reuse_or_throw(state, x, d, "adaptive problem infeasible on the current and previous window");
  }
  detail::record(state, x, d);
  return {std::move(d), std::move(state)};
}

/// The robust baseline: cost bound over every vertex class, no online data.
inline std::pair<ControlDecision, ControllerState> robust_step(ControllerState state, const Vector& x) {
  detail::absorb_sample(state, x);
  ControlDecision d;
  if (state.force_reuse && state.last_solution) {
    d = detail::decide(x, *state.last_solution, ControlMode::reused_gain, d);
  } else {
    SynthesisSolution sol = detail::robust_solve(state, x, d);
    if (sol.ok()) {
      d = detail::decide(x, sol, ControlMode::solved_fresh, d);
      state.last_solution = std::move(sol);
    } else {
      d = detail::reuse_or_throw(state, x, d, sol.report.message);
    }
  }
  detail::record(state, x, d);
  return {std::move(d), std::move(state)};
}

struct DecreaseReport {
  std::vector<double> system_margins;       // lambda_min(P - A_cl^T P A_cl) per supplied system
  std::vector<double> combination_margins;  // same, at random convex combinations
  bool all_positive() const {
    for (double v : system_margins)
      if (!(v > 0.0)) return false;
    for (double v : combination_margins)
      if (!(v > 0.0)) return false;
    return true;
  }
};

inline DecreaseReport certify_decrease(const Matrix& K, const Matrix& P, const std::vector<SystemPair>& systems,
                                       int n_grid = 100, std::uint64_t seed = 0) {
  DecreaseReport r;
  auto margin = [&](const SystemPair& s) {
    const Matrix acl = s.closed_loop(K);
    return min_eigenvalue(symmetrize(P - acl.transpose() * P * acl));
  };
  for (const auto& s : systems) r.system_margins.push_back(margin(s));
  if (systems.size() < 2) return r;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> ex(1.0);
  for (int g = 0; g < n_grid; ++g) {
    Vector w(static_cast<Eigen::Index>(systems.size()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = ex(rng);
    w /= w.sum();
    SystemPair mix{Matrix::Zero(systems[0].A.rows(), systems[0].A.cols()),
                   Matrix::Zero(systems[0].B.rows(), systems[0].B.cols())};
    for (std::size_t v = 0; v < systems.size(); ++v) {
      mix.A += w(static_cast<Eigen::Index>(v)) * systems[v].A;
      mix.B += w(static_cast<Eigen::Index>(v)) * systems[v].B;
    }
    r.combination_margins.push_back(margin(mix));
  }
  return r;
}

inline DecreaseReport certify_decrease(const SynthesisSolution& sol, const std::vector<SystemPair>& systems,
                                       int n_grid = 100, std::uint64_t seed = 0) {
  return certify_decrease(sol.K, sol.P, systems, n_grid, seed);
}

struct TraceRow {
  int k = 0;
  Vector x;
  Vector u;
  double gamma = 0.0;
  ControlMode mode = ControlMode::solved_fresh;
  double lyapunov = 0.0;
  int iterations = 0;
  double solve_seconds = 0.0;
  Matrix K;
  Matrix P;
};

/// k, x1..xn, u1..um, gamma, mode, V, iterations, then K row-major and P row-major.
/// Wall-clock time is left out so that identical inputs give identical files.
inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  if (rows.empty()) {
    os << "k\n";
    return;
  }
  const auto n = rows.front().x.size(), m = rows.front().u.size();
  os << "k";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u" << i + 1;
  os << ",gamma,mode,V,iterations";
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) os << ",K" << i + 1 << j + 1;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) os << ",P" << i + 1 << j + 1;
  os << "\n";
  for (const auto& r : rows) {
    os << r.k;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << io::format_double(r.x(i));
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << io::format_double(r.u(i));
    os << ',' << io::format_double(r.gamma) << ',' << to_string(r.mode) << ',' << io::format_double(r.lyapunov) << ','
       << r.iterations;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) os << ',' << io::format_double(r.K(i, j));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) os << ',' << io::format_double(r.P(i, j));
    os << "\n";
  }
}

/// Inverse of write_trace_csv for the given dimensions.
inline std::vector<TraceRow> read_trace_csv(std::istream& is, int n, int m) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("trace CSV: missing header");
  std::vector<TraceRow> rows;
  const std::size_t expected = static_cast<std::size_t>(1 + n + m + 4 + m * n + n * n);
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split(line, ',');
    if (f.size() != expected) throw DimensionError("trace CSV: wrong field count", lineno);
    TraceRow r;
    std::size_t c = 0;
    r.k = static_cast<int>(io::parse_long(f[c++]));
    r.x.resize(n);
    for (int i = 0; i < n; ++i) r.x(i) = io::parse_double(f[c++]);
    r.u.resize(m);
    for (int i = 0; i < m; ++i) r.u(i) = io::parse_double(f[c++]);
    r.gamma = io::parse_double(f[c++]);
    r.mode = control_mode_from_string(std::string(f[c++]));
    r.lyapunov = io::parse_double(f[c++]);
    r.iterations = static_cast<int>(io::parse_long(f[c++]));
    r.K.resize(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) r.K(i, j) = io::parse_double(f[c++]);
    r.P.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r.P(i, j) = io::parse_double(f[c++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace datalmi
