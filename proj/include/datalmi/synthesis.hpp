#pragma once

// Data-driven LMI blocks for robust stabilization, the online cost bound and
// the ellipsoidal constraint certificates, plus gain recovery.
//
// Decision variables are ordered H (upper triangle, row-major), L (row-major),
// gamma, then the Finsler multipliers in the order they were declared.

#include <datalmi/conic.hpp>
#include <datalmi/dataset.hpp>
#include <datalmi/linalg.hpp>
#include <datalmi/sdp_solver.hpp>

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace datalmi {

inline constexpr double kRelativeStrictMargin = 1e-7;
inline constexpr double kPositivityFloor = 1e-6;

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CostWeights {
  Matrix Q;
  Matrix R;
  Matrix q_factor;  // q_factor^T q_factor = Q
  Matrix r_factor;  // r_factor^T r_factor = R

  static CostWeights make(const Matrix& Q, const Matrix& R) {
    if (Q.rows() != Q.cols() || R.rows() != R.cols()) throw DimensionError("CostWeights: Q and R must be square");
    if ((Q - Q.transpose()).norm() > 1e-12 * std::max(1.0, Q.norm()) ||
        (R - R.transpose()).norm() > 1e-12 * std::max(1.0, R.norm()))
      throw std::invalid_argument("CostWeights: Q and R must be symmetric");
    if (min_eigenvalue(Q) < -1e-12 * std::max(1.0, Q.norm()))
      throw std::invalid_argument("CostWeights: Q must be positive semidefinite");
    if (min_eigenvalue(R) <= 0.0) throw std::invalid_argument("CostWeights: R must be positive definite");
    return {Q, R, psd_sqrt(Q), psd_sqrt(R)};
  }

  int state_dim() const { return static_cast<int>(Q.rows()); }
  int input_dim() const { return static_cast<int>(R.rows()); }
  double stage_cost(const Vector& x, const Vector& u) const { return x.dot(Q * x) + u.dot(R * u); }
};

/// W_x x <= 1, W_u u <= 1, row by row. Either matrix may have zero rows.
struct ConstraintPolytope {
  Matrix W_x;
  Matrix W_u;

  ConstraintPolytope() = default;
  ConstraintPolytope(Matrix wx, Matrix wu) : W_x(std::move(wx)), W_u(std::move(wu)) {
    for (int i = 0; i < W_x.rows(); ++i)
      if (W_x.row(i).norm() == 0.0) throw std::invalid_argument("ConstraintPolytope: zero state row");
    for (int i = 0; i < W_u.rows(); ++i)
      if (W_u.row(i).norm() == 0.0) throw std::invalid_argument("ConstraintPolytope: zero input row");
  }

  /// |u_i| <= bound_i for every input, no state constraints.
  static ConstraintPolytope symmetric_input_box(int n, const Vector& bound) {
    const auto m = bound.size();
    Matrix wu = Matrix::Zero(2 * m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      wu(2 * i, i) = 1.0 / bound(i);
      wu(2 * i + 1, i) = -1.0 / bound(i);
    }
    return {Matrix::Zero(0, n), wu};
  }

  int state_rows() const { return static_cast<int>(W_x.rows()); }
  int input_rows() const { return static_cast<int>(W_u.rows()); }

  ConstraintPolytope scaled(double s) const { return {s * W_x, s * W_u}; }
};

struct EllipsoidalSet {
  Matrix P;
  double gamma = 1.0;

  bool contains(const Vector& x, double rel_tol = 0.0) const { return x.dot(P * x) <= gamma * (1.0 + rel_tol); }

  /// Points with x^T P x = gamma, direction uniform on the sphere in P-whitened coordinates.
  std::vector<Vector> boundary_samples(int count, std::mt19937_64& rng) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(P));
    const Matrix p_inv_sqrt =
        es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    std::normal_distribution<double> nd;
    std::vector<Vector> out;
    for (int k = 0; k < count; ++k) {
      Vector v(P.rows());
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nd(rng);
      v /= v.norm();
      out.push_back(std::sqrt(gamma) * p_inv_sqrt * v);
    }
    return out;
  }
};

class VariableLayout {
 public:
  VariableLayout(int n, int m, bool with_gamma, std::vector<std::string> multipliers)
      : n_(n), m_(m), with_gamma_(with_gamma), multipliers_(std::move(multipliers)) {
    if (n < 1 || m < 1) throw DimensionError("VariableLayout: n and m must be positive");
  }

  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  bool has_gamma() const { return with_gamma_; }
  const std::vector<std::string>& multipliers() const { return multipliers_; }

  int num_h() const { return n_ * (n_ + 1) / 2; }
  int num_l() const { return m_ * n_; }
  int size() const { return num_h() + num_l() + (with_gamma_ ? 1 : 0) + static_cast<int>(multipliers_.size()); }

  int h_index(int i, int j) const {
    if (i > j) std::swap(i, j);
    // row-major upper triangle: rows before i contribute n + (n-1) + ... entries
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }
  int l_index(int i, int j) const { return num_h() + i * n_ + j; }
  int gamma_index() const {
    if (!with_gamma_) throw std::logic_error("layout has no gamma");
    return num_h() + num_l();
  }
  int multiplier_index(const std::string& name) const {
    for (std::size_t k = 0; k < multipliers_.size(); ++k)
      if (multipliers_[k] == name) return num_h() + num_l() + (with_gamma_ ? 1 : 0) + static_cast<int>(k);
    throw std::out_of_range("layout has no multiplier '" + name + "'");
  }
  bool has_multiplier(const std::string& name) const {
    for (const auto& mname : multipliers_)
      if (mname == name) return true;
    return false;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) out.push_back("h" + std::to_string(i + 1) + std::to_string(j + 1));
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j) out.push_back("l" + std::to_string(i + 1) + std::to_string(j + 1));
    if (with_gamma_) out.push_back("gamma");
    for (const auto& mname : multipliers_) out.push_back(mname);
    return out;
  }

  AffineMatrix H() const {
    AffineMatrix h(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        Matrix e = Matrix::Zero(n_, n_);
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        h += AffineMatrix::variable(n_, n_, h_index(i, j), e);
      }
    return h;
  }

  AffineMatrix L() const {
    AffineMatrix l(m_, n_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j) {
        Matrix e = Matrix::Zero(m_, n_);
        e(i, j) = 1.0;
        l += AffineMatrix::variable(m_, n_, l_index(i, j), e);
      }
    return l;
  }

  AffineMatrix scalar_times_identity(int index, int dim) const {
    return AffineMatrix::variable(dim, dim, index, Matrix::Identity(dim, dim));
  }

  Matrix h_value(const Vector& y) const { return H().evaluate(y); }
  Matrix l_value(const Vector& y) const { return L().evaluate(y); }

 private:
  int n_;
  int m_;
  bool with_gamma_;
  std::vector<std::string> multipliers_;
};

inline std::string vertex_multiplier(int v) { return "eps" + std::to_string(v + 1); }

namespace detail {

// Zero-padded, unit-Frobenius Gramian placed in the top-left corner.
inline Matrix padded_unit_gram(const ConsistencyGram& g, int total) {
  Matrix out = Matrix::Zero(total, total);
  const double nrm = g.gram.norm();
  out.topLeftCorner(g.size(), g.size()) = nrm > 0.0 ? Matrix(g.gram / nrm) : g.gram;
  return out;
}

// Exposing vectors [0; z_x; z_u; tail(z_x)] for each z in the data's left null space.
inline Matrix face_vectors(const ConsistencyGram& g, int total, bool copy_into_slack) {
  const int n = g.state_dim, m = g.input_dim;
  const Matrix& z = g.null_directions;
  Matrix w = Matrix::Zero(total, z.cols());
  if (z.cols() == 0) return w;
  w.middleRows(n, n + m) = z;
  if (copy_into_slack) w.middleRows(2 * n + m, n) = z.topRows(n);
  return w;
}

inline void check_gram(const VariableLayout& layout, const ConsistencyGram& g) {
  if (g.size() != 2 * layout.state_dim() + layout.input_dim())
    throw DimensionError("Gramian size " + std::to_string(g.size()) + " does not match 2n+m = " +
                         std::to_string(2 * layout.state_dim() + layout.input_dim()));
}

}  // namespace detail

/// One block per vertex dataset:
///
///   [ H   0    0   0 ]
///   [ 0  -H  -L^T  0 ]  - eps_v * N_v  >= margin * diag(I_n, 0, 0, 0)
///   [ 0  -L   0    L ]
///   [ 0   0   L^T  H ]
///
/// with rows ordered (I, A^T, B^T, slack). The Gramian enters normalized to
/// unit Frobenius norm, so eps_v is the multiplier of N_v / ||N_v||_F.
/// The margin only covers the leading block: a vertex dataset that cannot
/// identify its system pins z^T [H; L] = 0 for every z with z^T [X-; U-] = 0,
/// and [0; z_x; z_u; z_x] then lies in the kernel of the block. Those vectors
/// are attached as the block's face.
inline std::vector<LmiBlock> robust_stabilization_blocks(const VariableLayout& layout,
                                                         const std::vector<ConsistencyGram>& grams,
                                                         double relative_margin = kRelativeStrictMargin) {
  if (grams.empty()) throw DimensionError("robust_stabilization_blocks: no vertex Gramians");
  const int n = layout.state_dim(), m = layout.input_dim();
  const AffineMatrix h = layout.H(), l = layout.L();
  std::vector<LmiBlock> out;
  for (std::size_t v = 0; v < grams.size(); ++v) {
    detail::check_gram(layout, grams[v]);
    if (grams[v].size() != grams.front().size())
      throw DimensionError("robust_stabilization_blocks: Gramians differ in size", static_cast<long>(v));
    BlockBuilder bb({n, n, m, n});
    bb.set(0, 0, h).set(1, 1, -h).set(2, 1, -l).set(2, 3, l).set(3, 3, h);
    const int total = bb.size();
    const int eps = layout.multiplier_index(vertex_multiplier(static_cast<int>(v)));
    LmiBlock blk = bb.build("robust_v" + std::to_string(v + 1));
    blk.coefficients.emplace_back(eps, -detail::padded_unit_gram(grams[v], total));
    std::sort(blk.coefficients.begin(), blk.coefficients.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    blk.margin = relative_margin * blk.scale();
    blk.margin_mask = Vector::Zero(total);
    blk.margin_mask.head(n).setOnes();
    blk.face = detail::face_vectors(grams[v], total, true);
    out.push_back(std::move(blk));
  }
  return out;
}

/// The cost-bound pair: M_Phi - eps * N >= 0 with rows (I, A^T, B^T, slack, Phi-slack)
///
///   [ H  0  0   0    0  ]
///   [ 0  0  0   H    0  ]
///   [ 0  0  0   L    0  ]
///   [ 0  H  L^T H  Phi^T]
///   [ 0  0  0  Phi gamma I]
///
/// and [[H, Phi^T], [Phi, gamma I]] >= 0, with Phi = [Qf H; Rf L].
inline std::vector<LmiBlock> performance_block(const VariableLayout& layout, const ConsistencyGram& gram,
                                               const CostWeights& weights, const std::string& multiplier,
                                               const std::string& tag = "o") {
  detail::check_gram(layout, gram);
  const int n = layout.state_dim(), m = layout.input_dim();
  if (weights.state_dim() != n || weights.input_dim() != m)
    throw DimensionError("performance_block: weights do not match the layout");
  const AffineMatrix h = layout.H(), l = layout.L();
  const AffineMatrix phi = AffineMatrix::vstack(weights.q_factor * h, weights.r_factor * l);
  const int np = n + m;
  const AffineMatrix g_id = layout.scalar_times_identity(layout.gamma_index(), np);

  BlockBuilder bb({n, n, m, n, np});
  bb.set(0, 0, h).set(1, 3, h).set(2, 3, l).set(3, 3, h).set(4, 3, phi).set(4, 4, g_id);
  LmiBlock perf = bb.build("performance_" + tag);
  perf.coefficients.emplace_back(layout.multiplier_index(multiplier), -detail::padded_unit_gram(gram, bb.size()));
  std::sort(perf.coefficients.begin(), perf.coefficients.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  perf.face = detail::face_vectors(gram, bb.size(), false);

  BlockBuilder sb({n, np});
  sb.set(0, 0, h).set(1, 0, phi).set(1, 1, g_id);
  return {std::move(perf), sb.build("cost_schur_" + tag)};
}

/// [[1, x^T], [x, H]], then one [[1, w H], [(w H)^T, H]] per state row and
/// one [[1, w L], [(w L)^T, H]] per input row, each >= margin * I.
inline std::vector<LmiBlock> constraint_blocks(const VariableLayout& layout, const Vector& x,
                                               const ConstraintPolytope& poly,
                                               double relative_margin = kRelativeStrictMargin) {
  const int n = layout.state_dim(), m = layout.input_dim();
  if (x.size() != n) throw DimensionError("constraint_blocks: state has the wrong dimension");
  if ((poly.W_x.rows() > 0 && poly.W_x.cols() != n) || (poly.W_u.rows() > 0 && poly.W_u.cols() != m))
    throw DimensionError("constraint_blocks: polytope does not match the layout");
  const AffineMatrix h = layout.H(), l = layout.L();
  std::vector<LmiBlock> out;
  auto finish = [&](BlockBuilder& bb, std::string label) {
    LmiBlock b = bb.build(std::move(label));
    b.margin = relative_margin * b.scale();
    b.margin_mask = Vector::Ones(b.size());
    out.push_back(std::move(b));
  };
  {
    BlockBuilder bb({1, n});
    bb.set(0, 0, AffineMatrix(Matrix::Ones(1, 1))).set(1, 0, AffineMatrix(Matrix(x))).set(1, 1, h);
    finish(bb, "ellipsoid_contains_x");
  }
  for (int i = 0; i < poly.state_rows(); ++i) {
    BlockBuilder bb({1, n});
    bb.set(0, 0, AffineMatrix(Matrix::Ones(1, 1))).set(0, 1, Matrix(poly.W_x.row(i)) * h).set(1, 1, h);
    finish(bb, "state_row_" + std::to_string(i + 1));
  }
  for (int j = 0; j < poly.input_rows(); ++j) {
    BlockBuilder bb({1, n});
    bb.set(0, 0, AffineMatrix(Matrix::Ones(1, 1))).set(0, 1, Matrix(poly.W_u.row(j)) * l).set(1, 1, h);
    finish(bb, "input_row_" + std::to_string(j + 1));
  }
  return out;
}

enum class ObjectiveKind { minimize_gamma, feasibility };

/// Adds gamma >= floor and eps >= floor for every declared scalar and fixes the objective.
inline ConicProblem assemble(const VariableLayout& layout, std::vector<LmiBlock> blocks, ObjectiveKind objective,
                             double positivity_floor = kPositivityFloor) {
  if (blocks.empty()) throw std::invalid_argument("assemble: empty block list");
  ConicProblem p;
  p.variable_names = layout.names();
  const int nv = layout.size();
  for (const auto& b : blocks) {
    if (b.constant.rows() != b.constant.cols()) throw DimensionError("assemble: block '" + b.label + "' is not square");
    for (const auto& [i, c] : b.coefficients) {
      if (i < 0 || i >= nv) throw DimensionError("assemble: block '" + b.label + "' references an unknown variable");
      if (c.rows() != b.constant.rows() || c.cols() != b.constant.cols())
        throw DimensionError("assemble: block '" + b.label + "' has inconsistent coefficient sizes");
    }
  }
  p.blocks = std::move(blocks);
  auto floor_block = [&](int idx, const std::string& name) {
    LmiBlock b;
    b.label = "positive_" + name;
    b.constant = Matrix::Constant(1, 1, -positivity_floor);
    b.coefficients.emplace_back(idx, Matrix::Ones(1, 1));
    p.blocks.push_back(std::move(b));
  };
  if (layout.has_gamma()) floor_block(layout.gamma_index(), "gamma");
  for (const auto& mname : layout.multipliers()) floor_block(layout.multiplier_index(mname), mname);

  p.objective = Vector::Zero(nv);
  if (objective == ObjectiveKind::minimize_gamma) {
    if (!layout.has_gamma()) throw std::invalid_argument("assemble: cannot minimize gamma without a gamma variable");
    p.objective(layout.gamma_index()) = 1.0;
  }
  return p;
}

struct GainPair {
  Matrix K;
  Matrix P;
};

/// K = L H^-1, P = gamma H^-1.
inline GainPair recover_gain(const Matrix& H, const Matrix& L, double gamma = 1.0) {
  Eigen::LLT<Matrix> llt(symmetrize(H));
  if (llt.info() != Eigen::Success) throw NumericalFailure("recover_gain: H is not positive definite");
  const Eigen::JacobiSVD<Matrix> svd(H);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-14 * sv(0)) throw NumericalFailure("recover_gain: H is numerically singular");
  const Matrix h_inv = symmetrize(llt.solve(Matrix::Identity(H.rows(), H.cols())));
  return {llt.solve(L.transpose()).transpose(), symmetrize(gamma * h_inv)};
}

struct SynthesisSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Matrix H;
  Matrix L;
  double gamma = 1.0;
  std::vector<double> eps_v;
  std::optional<double> eps_o;
  std::vector<double> eps_performance;  // per-vertex cost multipliers of the robust baseline
  Matrix K;
  Matrix P;
  double objective = 0.0;
  double strict_margin = 0.0;     // largest margin imposed on a strict block
  double nonstrict_margin = 0.0;  // cost-bound blocks carry none
  SolveResult report;

  bool ok() const { return status == SolveStatus::optimal; }
  EllipsoidalSet invariant_set() const { return {P, gamma}; }
};

/// Reads (H, L, gamma, eps) out of a solver result and recovers (K, P).
inline SynthesisSolution extract_solution(const VariableLayout& layout, const ConicProblem& problem,
                                          const SolveResult& result) {
  SynthesisSolution sol;
  sol.report = result;
  sol.status = result.status;
  for (const auto& b : problem.blocks) sol.strict_margin = std::max(sol.strict_margin, b.margin);
  if (!result.ok()) return sol;
  const Vector& y = result.y;
  sol.H = symmetrize(layout.h_value(y));
  sol.L = layout.l_value(y);
  sol.gamma = layout.has_gamma() ? y(layout.gamma_index()) : 1.0;
  for (const auto& mname : layout.multipliers()) {
    const double v = y(layout.multiplier_index(mname));
    if (mname == "eps_o")
      sol.eps_o = v;
    else if (mname.rfind("eps_p", 0) == 0)
      sol.eps_performance.push_back(v);
    else
      sol.eps_v.push_back(v);
  }
  sol.objective = result.primal_objective;
  try {
    auto g = recover_gain(sol.H, sol.L, sol.gamma);
    sol.K = std::move(g.K);
    sol.P = std::move(g.P);
  } catch (const NumericalFailure& e) {
    sol.status = SolveStatus::numerical_failure;
    sol.report.message = e.what();
  }
  return sol;
}

struct SynthesisOptions {
  SolverTolerances solver;
  double relative_margin = kRelativeStrictMargin;
  double positivity_floor = kPositivityFloor;
};

struct PosedProblem {
  VariableLayout layout;
  ConicProblem problem;
};

/// Robust stabilization over every vertex class, nothing else (feasibility).
inline PosedProblem pose_stabilization(const std::vector<ConsistencyGram>& vertex_grams,
                                       const SynthesisOptions& opt = {}) {
  if (vertex_grams.empty()) throw DimensionError("pose_stabilization: no vertex Gramians");
  const int n = vertex_grams.front().state_dim, m = vertex_grams.front().input_dim;
  std::vector<std::string> mult;
  for (std::size_t v = 0; v < vertex_grams.size(); ++v) mult.push_back(vertex_multiplier(static_cast<int>(v)));
  VariableLayout layout(n, m, false, mult);
  auto blocks = robust_stabilization_blocks(layout, vertex_grams, opt.relative_margin);
  auto prob = assemble(layout, std::move(blocks), ObjectiveKind::feasibility, opt.positivity_floor);
  return {std::move(layout), std::move(prob)};
}

/// Robust stabilization blocks + cost bound over the online class + constraint blocks; minimize gamma.
inline PosedProblem pose_adaptive(const std::vector<ConsistencyGram>& vertex_grams, const ConsistencyGram& online_gram,
                                  const CostWeights& weights, const Vector& x, const ConstraintPolytope& poly,
                                  const SynthesisOptions& opt = {}) {
  if (vertex_grams.empty()) throw DimensionError("pose_adaptive: no vertex Gramians");
  const int n = vertex_grams.front().state_dim, m = vertex_grams.front().input_dim;
  std::vector<std::string> mult;
  for (std::size_t v = 0; v < vertex_grams.size(); ++v) mult.push_back(vertex_multiplier(static_cast<int>(v)));
  mult.push_back("eps_o");
  VariableLayout layout(n, m, true, mult);
  auto blocks = robust_stabilization_blocks(layout, vertex_grams, opt.relative_margin);
  for (auto& b : performance_block(layout, online_gram, weights, "eps_o", "o")) blocks.push_back(std::move(b));
  for (auto& b : constraint_blocks(layout, x, poly, opt.relative_margin)) blocks.push_back(std::move(b));
  auto prob = assemble(layout, std::move(blocks), ObjectiveKind::minimize_gamma, opt.positivity_floor);
  return {std::move(layout), std::move(prob)};
}

/// The cost bound alone over one class plus constraint blocks (no robust blocks).
inline PosedProblem pose_performance_only(const ConsistencyGram& gram, const CostWeights& weights, const Vector& x,
                                          const ConstraintPolytope& poly, const SynthesisOptions& opt = {}) {
  VariableLayout layout(gram.state_dim, gram.input_dim, true, {"eps_o"});
  auto blocks = performance_block(layout, gram, weights, "eps_o", "o");
  for (auto& b : constraint_blocks(layout, x, poly, opt.relative_margin)) blocks.push_back(std::move(b));
  auto prob = assemble(layout, std::move(blocks), ObjectiveKind::minimize_gamma, opt.positivity_floor);
  return {std::move(layout), std::move(prob)};
}

/// Robust baseline: the cost bound is enforced over every vertex class instead of the online one.
inline PosedProblem pose_robust(const std::vector<ConsistencyGram>& vertex_grams, const CostWeights& weights,
                                const Vector& x, const ConstraintPolytope& poly, const SynthesisOptions& opt = {}) {
  if (vertex_grams.empty()) throw DimensionError("pose_robust: no vertex Gramians");
  const int n = vertex_grams.front().state_dim, m = vertex_grams.front().input_dim;
  std::vector<std::string> mult;
  for (std::size_t v = 0; v < vertex_grams.size(); ++v) mult.push_back(vertex_multiplier(static_cast<int>(v)));
  for (std::size_t v = 0; v < vertex_grams.size(); ++v) mult.push_back("eps_p" + std::to_string(v + 1));
  VariableLayout layout(n, m, true, mult);
  auto blocks = robust_stabilization_blocks(layout, vertex_grams, opt.relative_margin);
  for (std::size_t v = 0; v < vertex_grams.size(); ++v)
    for (auto& b : performance_block(layout, vertex_grams[v], weights, "eps_p" + std::to_string(v + 1),
                                     "v" + std::to_string(v + 1)))
      blocks.push_back(std::move(b));
  for (auto& b : constraint_blocks(layout, x, poly, opt.relative_margin)) blocks.push_back(std::move(b));
  auto prob = assemble(layout, std::move(blocks), ObjectiveKind::minimize_gamma, opt.positivity_floor);
  return {std::move(layout), std::move(prob)};
}

inline SynthesisSolution solve(const PosedProblem& posed, const SolverTolerances& tol = {}) {
  return extract_solution(posed.layout, posed.problem, solve_sdp(posed.problem, tol));
}

}  // namespace datalmi
