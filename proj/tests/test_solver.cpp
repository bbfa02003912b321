#include <datalmi/sdp_solver.hpp>
#include <datalmi/synthesis.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace datalmi;

namespace {

LmiBlock block(Matrix constant, std::vector<std::pair<int, Matrix>> coeffs, std::string label = "b") {
  LmiBlock b;
  b.label = std::move(label);
  b.constant = std::move(constant);
  b.coefficients = std::move(coeffs);
  return b;
}

ConicProblem problem(std::vector<std::string> names, Vector objective, std::vector<LmiBlock> blocks) {
  ConicProblem p;
  p.variable_names = std::move(names);
  p.objective = std::move(objective);
  p.blocks = std::move(blocks);
  return p;
}

Matrix m2(double a, double b, double c, double d) { return (Matrix(2, 2) << a, b, c, d).finished(); }

}  // namespace

TEST(Solver, SchurComplementMinimum) {
  // [[t, 1], [1, 1]] >= 0 iff t >= 1.
  const auto p = problem({"t"}, Vector::Ones(1), {block(m2(0, 1, 1, 1), {{0, m2(1, 0, 0, 0)}})});
  const SolveResult r = solve_sdp(p);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_NEAR(r.y(0), 1.0, 1e-6);
}

TEST(Solver, LargestEigenvalueMatchesEigenSolver) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    const Matrix m = symmetrize(oracle::random_matrix(rng, n, n));
    const auto p = problem({"t"}, Vector::Ones(1), {block(-m, {{0, Matrix::Identity(n, n)}})});
    const SolveResult r = solve_sdp(p);
    ASSERT_TRUE(r.ok()) << r.message;
    const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().maxCoeff();
    EXPECT_NEAR(r.y(0), lmax, 1e-6 * std::max(1.0, std::abs(lmax)));
  }
}

TEST(Solver, DiagonalBlocksDecouple) {
  Matrix a0 = Matrix::Zero(2, 2), a1 = Matrix::Zero(2, 2);
  a0(0, 0) = 1.0;
  a1(1, 1) = 1.0;
  const auto p = problem({"a", "b"}, Vector::Ones(2), {block(m2(-1, 0, 0, -2), {{0, a0}, {1, a1}})});
  const SolveResult r = solve_sdp(p);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_NEAR(r.y(0), 1.0, 1e-6);
  EXPECT_NEAR(r.y(1), 2.0, 1e-6);
  EXPECT_NEAR(r.primal_objective, 3.0, 1e-6);
}

TEST(Solver, ContradictoryBoundsAreInfeasible) {
  // y >= 1 and -y >= 0.
  const Matrix one = Matrix::Ones(1, 1);
  const auto p = problem({"y"}, Vector::Zero(1), {block(-one, {{0, one}}, "lo"), block(Matrix::Zero(1, 1), {{0, -one}}, "hi")});
  const SolveResult r = solve_sdp(p);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.status, SolveStatus::infeasible) << r.message;
}

TEST(Solver, NegativeDefiniteConstantIsInfeasible) {
  // -I + y * 0 can never be PSD.
  const auto p = problem({"y"}, Vector::Zero(1),
                         {block(-Matrix::Identity(2, 2), {{0, Matrix::Zero(2, 2)}}),
                          block(Matrix::Ones(1, 1), {{0, Matrix::Ones(1, 1)}}, "aux")});
  EXPECT_FALSE(solve_sdp(p).ok());
}

TEST(Solver, ResultIsDeterministic) {
  std::mt19937_64 rng(12);
  const Matrix m = symmetrize(oracle::random_matrix(rng, 4, 4));
  const auto p = problem({"t"}, Vector::Ones(1), {block(-m, {{0, Matrix::Identity(4, 4)}})});
  const SolveResult a = solve_sdp(p), b = solve_sdp(p);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.primal_objective, b.primal_objective);
}

TEST(Solver, FaceVectorsPinTheSolution) {
  // [[a, b], [b, 0]] >= 0 forces b = 0; the face e2 says so up front.
  Matrix ea = Matrix::Zero(2, 2), eb = m2(0, 1, 1, 0);
  ea(0, 0) = 1.0;
  LmiBlock b = block(Matrix::Zero(2, 2), {{0, ea}, {1, eb}});
  b.face = (Matrix(2, 1) << 0.0, 1.0).finished();
  const Matrix one = Matrix::Ones(1, 1);
  const auto p = problem({"a", "b"}, (Vector(2) << 1.0, 0.0).finished(),
                         {b, block(-one, {{0, one}}, "a_ge_1")});
  const SolveResult r = solve_sdp(p);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_NEAR(r.y(0), 1.0, 1e-6);
  EXPECT_NEAR(r.y(1), 0.0, 1e-9);
}

TEST(Solver, FaceThatDoesNotExposeTheBlockThrows) {
  LmiBlock b = block(Matrix::Identity(2, 2), {{0, Matrix::Identity(2, 2)}});
  b.face = (Matrix(2, 1) << 1.0, 0.0).finished();  // e1^T I e1 != 0
  const auto p = problem({"y"}, Vector::Ones(1), {b});
  EXPECT_THROW(solve_sdp(p), std::invalid_argument);
}

TEST(Solver, ScalarStabilizationFromData) {
  // x+ = 0.5 x + u; the stabilizing gains form (-1.5, 0.5).
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int T = 2 + trial % 3;
    const Matrix xm = oracle::random_matrix(rng, 1, T), um = oracle::random_matrix(rng, 1, T);
    const TrajectoryDataset ds(0.5 * xm + um, xm, um);
    const SynthesisSolution sol = solve(pose_stabilization({consistency_gram(ds)}));
    ASSERT_TRUE(sol.ok()) << sol.report.message;
    double best = 1e9;  // grid oracle: nearest stabilizing gain
    for (int i = 0; i <= 2000; ++i) {
      const double k = -1.5 + 2.0 * i / 2000.0;
      if (std::abs(0.5 + k) < 1.0) best = std::min(best, std::abs(k - sol.K(0, 0)));
    }
    EXPECT_LT(std::abs(0.5 + sol.K(0, 0)), 1.0);
    EXPECT_LT(best, 1e-3);
  }
}

TEST(Solver, StatusNames) {
  EXPECT_STREQ(to_string(SolveStatus::optimal), "optimal");
  EXPECT_STREQ(to_string(SolveStatus::infeasible), "infeasible");
  EXPECT_STREQ(to_string(SolveStatus::numerical_failure), "numerical_failure");
}
