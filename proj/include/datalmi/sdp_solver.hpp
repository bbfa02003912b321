#pragma once

// Primal-dual interior-point method for
//
//   minimize c^T y   s.t.  S_b(y) = C_b + sum_i y_i A_bi  >= 0   for every block b,
//
// whose Lagrange dual is  maximize -sum_b C_b . Z_b  s.t.  sum_b A_bi . Z_b = c_i, Z_b >= 0.
// Infeasible-start path following with the HKM search direction and a
// Mehrotra predictor-corrector step. Problem sizes here are tiny (tens of
// variables, blocks of order ten), so everything is dense.

#include <datalmi/conic.hpp>
#include <datalmi/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace datalmi {

struct SolverTolerances {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iterations = 200;
  // Every solve adds |y_i| <= variable_bound. It keeps the Finsler
  // multipliers finite when the infimum is only approached as they grow.
  double variable_bound = 1e6;
  // Iterates that stall above feas_tol/gap_tol but below this threshold are
  // returned as optimal with `reduced_accuracy` set.
  double accept_tol = 1e-6;
  // Failing that, the lowest-objective primal-feasible iterate whose relative
  // gap is below this is returned, also flagged `reduced_accuracy`. Saturated
  // multipliers make the slack ill-conditioned and mostly hurt the dual side.
  double accept_gap = 1e-2;
  // One line per iteration on stderr.
  bool verbose = false;
};

enum class SolveStatus { optimal, infeasible, numerical_failure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_failure;
  Vector y;
  int iterations = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double relative_gap = 0.0;
  double min_slack = 0.0;  // smallest eigenvalue of any block minus its margin, at y
  bool reduced_accuracy = false;
  std::string message;

  bool ok() const { return status == SolveStatus::optimal; }
};

namespace detail {

struct SolverBlock {
  Matrix c;
  std::vector<std::pair<int, Matrix>> a;
  double scale = 1.0;
  int size() const { return static_cast<int>(c.rows()); }
};

inline double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

// Largest alpha with X + alpha dX >= 0 (infinity if dX >= 0 along the whole ray).
inline double max_step(const Matrix& x, const Matrix& dx) {
  Eigen::LLT<Matrix> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const Matrix l = llt.matrixL();
  Matrix t = l.triangularView<Eigen::Lower>().solve(dx);
  t = l.triangularView<Eigen::Lower>().solve(t.transpose()).transpose();
  const double lmin = min_eigenvalue(t);
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

struct CoreResult {
  SolveStatus status = SolveStatus::numerical_failure;
  Vector y;
  int iterations = 0;
  double pobj = 0.0, dobj = 0.0, pinf = 0.0, dinf = 0.0, gap = 0.0;
  double best_merit = std::numeric_limits<double>::infinity();
  bool primal_fallback = false;
  std::string message;
};

// The path-following loop on already scaled blocks.
inline CoreResult interior_point(const std::vector<SolverBlock>& blocks, const Vector& c, const SolverTolerances& tol) {
  const int p = static_cast<int>(c.size());
  CoreResult result;
  const auto nb = blocks.size();
  int total_dim = 0;
  double c_norm = 0.0;
  for (const auto& b : blocks) {
    total_dim += b.size();
    c_norm += b.c.squaredNorm();
  }
  c_norm = std::sqrt(c_norm);
  const double obj_norm = c.norm();

  std::vector<Matrix> s(nb), z(nb), rp(nb), s_inv(nb);
  Vector y = Vector::Zero(p);
  for (std::size_t b = 0; b < nb; ++b) {
    const int n = blocks[b].size();
    s[b] = 10.0 * Matrix::Identity(n, n);
    z[b] = 10.0 * Matrix::Identity(n, n);
  }

  auto primal_residuals = [&]() {
    double nrm = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      rp[b] = blocks[b].c - s[b];
      for (const auto& [i, a] : blocks[b].a) rp[b] += y(i) * a;
      nrm += rp[b].squaredNorm();
    }
    return std::sqrt(nrm);
  };
  auto dual_map = [&]() {
    Vector az = Vector::Zero(p);
    for (std::size_t b = 0; b < nb; ++b)
      for (const auto& [i, a] : blocks[b].a) az(i) += inner(a, z[b]);
    return az;
  };

  const double tau = 0.95;
  int stall = 0;
  int stagnant = 0;  // iterations since any of pinf, dinf, gap last reached a new low by 1%
  Eigen::Vector3d lows = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  double best_merit = std::numeric_limits<double>::infinity();
  Vector best_y = y;
  std::optional<Vector> feas_y;
  double feas_pobj = std::numeric_limits<double>::infinity(), feas_dobj = 0, feas_pinf = 0, feas_dinf = 0, feas_gap = 0;
  double best_pinf = 0, best_dinf = 0, best_gap = 0, best_pobj = 0, best_dobj = 0;

  for (int iter = 0;; ++iter) {
    const double pinf_abs = primal_residuals();
    const Vector az = dual_map();
    const double pinf = pinf_abs / (1.0 + c_norm);
    const double dinf = (c - az).norm() / (1.0 + obj_norm);
    double cz = 0.0, sz = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      cz += inner(blocks[b].c, z[b]);
      sz += inner(s[b], z[b]);
    }
    const double pobj = c.dot(y);
    const double dobj = -cz;
    const double gap = std::max(sz, std::abs(pobj - dobj)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double mu = sz / total_dim;

    result.iterations = iter;
    if (tol.verbose)
      std::fprintf(stderr, "%3d pobj %+.9e dobj %+.9e pinf %.2e dinf %.2e gap %.2e mu %.2e |y| %.2e\n", iter, pobj,
                   dobj, pinf, dinf, gap, mu, y.norm());
    const double merit = std::max({pinf, dinf, gap});
    const Eigen::Vector3d parts(pinf, dinf, gap);
    if ((parts.array() < 0.99 * lows.array()).any()) stagnant = 0;
    else ++stagnant;
    lows = lows.cwiseMin(parts);
    if (merit < best_merit) {
      best_merit = merit;
      best_y = y;
      best_pinf = pinf;
      best_dinf = dinf;
      best_gap = gap;
      best_pobj = pobj;
      best_dobj = dobj;
    }

    if (pinf <= tol.feas_tol && gap <= tol.accept_gap && pobj < feas_pobj) {
      feas_y = y;
      feas_pobj = pobj;
      feas_dobj = dobj;
      feas_pinf = pinf;
      feas_dinf = dinf;
      feas_gap = gap;
    }

    if (pinf <= tol.feas_tol && dinf <= tol.feas_tol && gap <= tol.gap_tol) {
      result.status = SolveStatus::optimal;
      result.message = "converged";
      break;
    }
    // Farkas ray: Z >= 0 with A(Z) ~ 0 and -C.Z > 0 rules out any feasible y.
    if (dobj > 0.0 && az.norm() <= tol.feas_tol * dobj && dobj > 1.0) {
      result.status = SolveStatus::infeasible;
      result.message = "dual ray certifies primal infeasibility";
      break;
    }
    if (!y.allFinite() || y.norm() > 1e15) {
      result.status = SolveStatus::numerical_failure;
      result.message = "iterates diverged";
      break;
    }
    if (iter >= tol.max_iterations || stall >= 8 || stagnant >= 15) {
      result.status = SolveStatus::numerical_failure;
      result.message = iter >= tol.max_iterations ? "iteration limit" : "no progress";
      break;
    }

    // Schur complement system.
    Matrix schur = Matrix::Zero(p, p);
    std::vector<std::vector<Matrix>> g(nb);
    bool chol_ok = true;
    for (std::size_t b = 0; b < nb; ++b) {
      Eigen::LLT<Matrix> llt(s[b]);
      if (llt.info() != Eigen::Success) {
        chol_ok = false;
        break;
      }
      s_inv[b] = llt.solve(Matrix::Identity(s[b].rows(), s[b].cols()));
      s_inv[b] = symmetrize(s_inv[b]);
      const auto& a = blocks[b].a;
      g[b].resize(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) g[b][k] = s_inv[b] * a[k].second * z[b];
      for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t l = k; l < a.size(); ++l) {
          const double v = inner(a[l].second, g[b][k]);
          schur(a[k].first, a[l].first) += v;
          if (l != k) schur(a[l].first, a[k].first) += v;
        }
    }
    if (!chol_ok) {
      result.status = SolveStatus::numerical_failure;
      result.message = "slack lost definiteness";
      break;
    }
    schur = symmetrize(schur);
    // Jacobi equilibration: the multipliers may sit many orders of magnitude above H and L.
    Vector dscale(p);
    for (int i = 0; i < p; ++i) dscale(i) = schur(i, i) > 0.0 ? 1.0 / std::sqrt(schur(i, i)) : 1.0;
    const Matrix schur_eq = dscale.asDiagonal() * schur * dscale.asDiagonal();
    Eigen::LDLT<Matrix> ldlt(schur_eq);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
      ldlt.compute(schur_eq + 1e-14 * Matrix::Identity(p, p));
    // Two rounds of iterative refinement against the unregularized system.
    auto schur_solve = [&](const Vector& rhs) {
      Vector x = dscale.asDiagonal() * ldlt.solve(dscale.asDiagonal() * rhs);
      for (int r = 0; r < 2; ++r) {
        const Vector res = rhs - schur * x;
        x += dscale.asDiagonal() * ldlt.solve(dscale.asDiagonal() * res);
      }
      return x;
    };

    // Direction for a given complementarity target R_b (S dZ + dS Z = R_b - S Z).
    std::vector<Matrix> ds(nb), dz(nb);
    auto direction = [&](const std::vector<Matrix>& target, Vector& dy) {
      Vector rhs = -c;
      std::vector<Matrix> w(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        w[b] = s_inv[b] * (target[b] - rp[b] * z[b]);
        for (const auto& [i, a] : blocks[b].a) rhs(i) += inner(a, w[b]);
      }
      dy = schur_solve(rhs);
      for (std::size_t b = 0; b < nb; ++b) {
        ds[b] = rp[b];
        for (const auto& [i, a] : blocks[b].a) ds[b] += dy(i) * a;
        dz[b] = symmetrize(s_inv[b] * (target[b] - ds[b] * z[b]) - z[b]);
      }
    };
    auto step_lengths = [&]() {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (std::size_t b = 0; b < nb; ++b) {
        ap = std::min(ap, detail::max_step(s[b], ds[b]));
        ad = std::min(ad, detail::max_step(z[b], dz[b]));
      }
      return std::pair{std::min(1.0, tau * ap), std::min(1.0, tau * ad)};
    };

    // Predictor (affine scaling).
    std::vector<Matrix> target(nb);
    for (std::size_t b = 0; b < nb; ++b) target[b] = Matrix::Zero(s[b].rows(), s[b].cols());
    Vector dy;
    direction(target, dy);
    auto [ap_a, ad_a] = step_lengths();
    double mu_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b) mu_aff += inner(s[b] + ap_a * ds[b], z[b] + ad_a * dz[b]);
    mu_aff /= total_dim;
    const double ratio = mu > 0.0 ? std::clamp(mu_aff / mu, 0.0, 1.0) : 0.0;
    double sigma = ratio * ratio * ratio;
    // Keep centering while far from feasibility.
    if (pinf > 1e3 * tol.feas_tol) sigma = std::max(sigma, 0.1 * std::min(1.0, pinf));

    // Corrector.
    for (std::size_t b = 0; b < nb; ++b) {
      const int n = s[b].rows();
      target[b] = sigma * mu * Matrix::Identity(n, n) - ds[b] * dz[b];
    }
    direction(target, dy);
    auto [ap, ad] = step_lengths();

    if (ap < 1e-10 && ad < 1e-10)
      ++stall;
    else
      stall = 0;

    y += ap * dy;
    for (std::size_t b = 0; b < nb; ++b) {
      s[b] = symmetrize(s[b] + ap * ds[b]);
      z[b] = symmetrize(z[b] + ad * dz[b]);
    }
  }

  result.y = result.status == SolveStatus::optimal ? y : best_y;
  result.best_merit = best_merit;
  result.pobj = best_pobj;
  result.dobj = best_dobj;
  result.pinf = best_pinf;
  result.dinf = best_dinf;
  result.gap = best_gap;
  if (result.status == SolveStatus::numerical_failure && best_merit > tol.accept_tol && feas_y) {
    result.primal_fallback = true;
    result.y = *feas_y;
    result.pobj = feas_pobj;
    result.dobj = feas_dobj;
    result.pinf = feas_pinf;
    result.dinf = feas_dinf;
    result.gap = feas_gap;
  }
  if (result.status == SolveStatus::optimal) {
    double cz = 0.0;
    for (std::size_t b = 0; b < nb; ++b) cz += inner(blocks[b].c, z[b]);
    result.pobj = c.dot(y);
    result.dobj = -cz;
  }
  return result;
}

struct Reduction {
  Matrix basis;  // y = offset + basis * t
  Vector offset;
  bool consistent = true;
};

// Orthonormal basis of the complement of range(w).
inline Matrix complement_basis(const Matrix& w, int n) {
  if (w.cols() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  int r = 0;
  while (r < sv.size() && sv(r) > 1e-12 * std::max(1.0, sv(0))) ++r;
  return svd.matrixU().rightCols(n - r);
}

// Every face vector w of a block forces block(y) w = 0; those equalities
// define an affine subspace for y, parameterized here.
inline Reduction face_equalities(const ConicProblem& problem, const std::vector<Matrix>& constants) {
  const int p = problem.num_variables();
  std::vector<Matrix> rows_e;
  std::vector<Vector> rows_f;
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const auto& blk = problem.blocks[b];
    if (blk.face.cols() == 0) continue;
    const Matrix& w = blk.face;
    const double scale = std::max(1.0, blk.scale());
    auto check = [&](const Matrix& a, const char* what) {
      if ((w.transpose() * a * w).norm() > 1e-8 * scale * std::max(1.0, w.squaredNorm()))
        throw std::invalid_argument(std::string("solve_sdp: face of block '") + blk.label + "' does not expose " +
                                    what);
    };
    check(constants[b], "the constant");
    for (const auto& [i, a] : blk.coefficients) check(a, "a coefficient");
    const auto len = w.rows() * w.cols();
    Matrix e = Matrix::Zero(len, p);
    for (const auto& [i, a] : blk.coefficients) e.col(i) += (a * w).reshaped();
    rows_e.push_back(std::move(e));
    rows_f.push_back(-(constants[b] * w).reshaped());
  }
  Reduction red;
  if (rows_e.empty()) {
    red.basis = Matrix::Identity(p, p);
    red.offset = Vector::Zero(p);
    return red;
  }
  Eigen::Index total = 0;
  for (const auto& e : rows_e) total += e.rows();
  Matrix e(total, p);
  Vector f(total);
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < rows_e.size(); ++k) {
    e.middleRows(at, rows_e[k].rows()) = rows_e[k];
    f.segment(at, rows_f[k].size()) = rows_f[k];
    at += rows_e[k].rows();
  }
  // Variables absent from every equality keep their own coordinate.
  std::vector<int> involved, free_vars;
  for (int i = 0; i < p; ++i) (e.col(i).cwiseAbs().maxCoeff() > 0.0 ? involved : free_vars).push_back(i);
  Matrix ei(total, static_cast<Eigen::Index>(involved.size()));
  for (std::size_t k = 0; k < involved.size(); ++k) ei.col(static_cast<Eigen::Index>(k)) = e.col(involved[k]);
  Eigen::JacobiSVD<Matrix> svd(ei, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int r = 0;
  while (r < sv.size() && sv(r) > 1e-10 * std::max(1.0, sv(0))) ++r;
  Vector sub = Vector::Zero(ei.cols());
  for (int k = 0; k < r; ++k) sub += (svd.matrixU().col(k).dot(f) / sv(k)) * svd.matrixV().col(k);
  const Matrix null_sub = svd.matrixV().rightCols(ei.cols() - r);
  red.offset = Vector::Zero(p);
  for (std::size_t k = 0; k < involved.size(); ++k) red.offset(involved[k]) = sub(static_cast<Eigen::Index>(k));
  red.basis = Matrix::Zero(p, null_sub.cols() + static_cast<Eigen::Index>(free_vars.size()));
  for (std::size_t k = 0; k < involved.size(); ++k) red.basis.row(involved[k]).head(null_sub.cols()) = null_sub.row(static_cast<Eigen::Index>(k));
  for (std::size_t k = 0; k < free_vars.size(); ++k) red.basis(free_vars[k], null_sub.cols() + static_cast<Eigen::Index>(k)) = 1.0;
  red.consistent = (e * red.offset - f).norm() <= 1e-8 * std::max(1.0, f.norm());
  return red;
}

}  // namespace detail

inline SolveResult solve_sdp(const ConicProblem& problem, const SolverTolerances& tol = {}) {
  using detail::SolverBlock;

  const int p = problem.num_variables();
  SolveResult result;
  result.y = Vector::Zero(p);
  if (problem.blocks.empty()) {
    result.message = "problem has no blocks";
    return result;
  }
  const Vector c = problem.objective.size() == p ? problem.objective : Vector::Zero(p);

  std::vector<Matrix> constants;
  for (const auto& b : problem.blocks) constants.push_back(b.effective_constant());
  const detail::Reduction red = detail::face_equalities(problem, constants);
  if (!red.consistent) {
    result.status = SolveStatus::infeasible;
    result.message = "equalities implied by the block faces are inconsistent";
    result.min_slack = problem.min_slack(result.y);
    return result;
  }
  const int q = static_cast<int>(red.basis.cols());

  // Reduced copy in t: faces projected out, margins folded in, every block scaled to unit size.
  std::vector<SolverBlock> blocks;
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const auto& blk = problem.blocks[b];
    const Matrix v = detail::complement_basis(blk.face, blk.size());
    if (v.cols() == 0) continue;
    Matrix c0 = constants[b];
    for (const auto& [i, a] : blk.coefficients) c0 += red.offset(i) * a;
    SolverBlock sb;
    sb.c = symmetrize(v.transpose() * c0 * v);
    double s = sb.c.norm();
    for (int j = 0; j < q; ++j) {
      Matrix aj = Matrix::Zero(blk.size(), blk.size());
      for (const auto& [i, a] : blk.coefficients) aj += red.basis(i, j) * a;
      aj = symmetrize(v.transpose() * aj * v);
      const double nrm = aj.norm();
      if (nrm <= 1e-14 * std::max(1.0, blk.scale())) continue;
      s = std::max(s, nrm);
      sb.a.emplace_back(j, std::move(aj));
    }
    sb.scale = s > 0.0 ? s : 1.0;
    sb.c /= sb.scale;
    for (auto& [i, m] : sb.a) m /= sb.scale;
    blocks.push_back(std::move(sb));
  }
  if (tol.variable_bound > 0.0) {
    // R -+ y_i >= 0 for every original variable, in the reduced coordinates.
    const double r = tol.variable_bound;
    for (int i = 0; i < p; ++i)
      for (double sign : {1.0, -1.0}) {
        SolverBlock sb;
        sb.c = Matrix::Constant(1, 1, 1.0 - sign * red.offset(i) / r);
        for (int j = 0; j < q; ++j)
          if (red.basis(i, j) != 0.0) sb.a.emplace_back(j, Matrix::Constant(1, 1, -sign * red.basis(i, j) / r));
        if (!sb.a.empty()) blocks.push_back(std::move(sb));
      }
  }

  const Vector cr = red.basis.transpose() * c;
  const double offset_obj = c.dot(red.offset);
  if (q == 0) {
    // Fully determined by the face equalities.
    result.y = red.offset;
    result.min_slack = problem.min_slack(result.y);
    result.primal_objective = result.dual_objective = offset_obj;
    result.status = result.min_slack >= -tol.feas_tol ? SolveStatus::optimal : SolveStatus::infeasible;
    result.message = "determined by face equalities";
    return result;
  }

  const detail::CoreResult core = detail::interior_point(blocks, cr, tol);
  result.status = core.status;
  result.message = core.message;
  result.iterations = core.iterations;
  result.y = red.offset + red.basis * core.y;
  result.primal_objective = core.pobj + offset_obj;
  result.dual_objective = core.dobj + offset_obj;
  result.primal_infeasibility = core.pinf;
  result.dual_infeasibility = core.dinf;
  result.relative_gap = core.gap;
  result.min_slack = problem.min_slack(result.y);

  if (result.status == SolveStatus::numerical_failure && core.best_merit <= tol.accept_tol) {
    result.status = SolveStatus::optimal;
    result.reduced_accuracy = true;
    result.message += " (accepted at reduced accuracy)";
  } else if (result.status == SolveStatus::numerical_failure && core.primal_fallback) {
    result.status = SolveStatus::optimal;
    result.reduced_accuracy = true;
    result.message += " (primal-feasible iterate accepted, dual side inaccurate)";
  }
  return result;
}

}  // namespace datalmi
