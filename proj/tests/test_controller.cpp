#include <datalmi/controller.hpp>
#include <datalmi/plant.hpp>

#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace datalmi;

namespace {

std::vector<ConsistencyGram> benchmark_grams() {
  const Vector x0 = (Vector(2) << 0.95, 0.0).finished();
  return {consistency_gram(generate_offline_data(benchmark_system(0.1), 3, x0, -1, 1, derive_seed(4, 0))),
          consistency_gram(generate_offline_data(benchmark_system(10.0), 2, x0, -1, 1, derive_seed(4, 1)))};
}

ControllerState benchmark_state(double input_bound = 1.0) {
  return ControllerState::make(benchmark_grams(), 5, CostWeights::make(Matrix::Identity(2, 2), Matrix::Constant(1, 1, 0.01)),
                               ConstraintPolytope::symmetric_input_box(2, Vector::Constant(1, input_bound)));
}

struct Loop {
  std::vector<ControlDecision> decisions;
  std::vector<Vector> states;
};

using Step = std::pair<ControlDecision, ControllerState> (*)(ControllerState, const Vector&);

Loop run(ControllerState state, const DeltaSchedule& schedule, int steps, Step step = adaptive_step) {
  BenchmarkPlant bp;
  bp.schedule = schedule;
  PlantModel plant = bp.make((Vector(2) << 0.95, 0.0).finished());
  Loop out;
  for (int k = 0; k < steps; ++k) {
    out.states.push_back(plant.state());
    auto [d, next] = step(std::move(state), plant.state());
    state = std::move(next);
    plant.step(d.u);
    out.decisions.push_back(d);
  }
  out.states.push_back(plant.state());
  return out;
}

// Shared across tests: the nominal closed loop is the expensive part.
const Loop& nominal() {
  static const Loop loop = run(benchmark_state(), DeltaSchedule({{0, 0.15}, {15, 0.30}}), 30);
  return loop;
}

}  // namespace

TEST(Controller, WarmupUntilWindowFillsThenSolvedFresh) {
  const Loop& l = nominal();
  for (int k = 0; k < 5; ++k) EXPECT_EQ(l.decisions[static_cast<std::size_t>(k)].mode, ControlMode::robust_warmup) << k;
  EXPECT_EQ(l.decisions[5].mode, ControlMode::solved_fresh);
}

TEST(Controller, InputIsLinearFeedbackWithinBox) {
  for (std::size_t k = 0; k < nominal().decisions.size(); ++k) {
    const auto& d = nominal().decisions[k];
    const Vector& x = nominal().states[k];
    EXPECT_LT((d.u - d.K * x).norm(), 1e-12 * std::max(1.0, x.norm())) << k;
    EXPECT_LE(std::abs(d.u(0)), 1.0 + 1e-8) << k;
    EXPECT_NEAR(d.lyapunov, x.dot(d.P * x), 1e-12 * std::max(1.0, d.lyapunov));
  }
}

TEST(Controller, LyapunovValueDecreasesUnderEachGain) {
  for (std::size_t k = 0; k < nominal().decisions.size(); ++k) {
    const auto& d = nominal().decisions[k];
    const Vector& x = nominal().states[k];
    const Vector& xn = nominal().states[k + 1];
    if (x.dot(d.P * x) > 1e-10) EXPECT_LT(xn.dot(d.P * xn), x.dot(d.P * x)) << k;
  }
}

TEST(Controller, JumpInsideWindowLeavesSolvedFresh) {
  // delta jumps at step 15; windows ending in 16..19 mix both regimes.
  const Loop& l = nominal();
  int other = 0;
  for (int k = 16; k < 20; ++k)
    if (l.decisions[static_cast<std::size_t>(k)].mode != ControlMode::solved_fresh) ++other;
  EXPECT_GE(other, 1);
}

TEST(Controller, RobustBaselineAlwaysSolvesFresh) {
  const Loop l = run(benchmark_state(), DeltaSchedule::constant(0.15), 8, robust_step);
  for (const auto& d : l.decisions) EXPECT_EQ(d.mode, ControlMode::solved_fresh);
  EXPECT_LT(l.states.back().norm(), l.states.front().norm());
}

TEST(Controller, ForceReuseKeepsFirstGain) {
  ControllerState s = benchmark_state();
  s.force_reuse = true;
  const Loop l = run(std::move(s), DeltaSchedule::constant(0.15), 8);
  EXPECT_EQ(l.decisions[0].mode, ControlMode::robust_warmup);
  for (std::size_t k = 1; k < l.decisions.size(); ++k) {
    EXPECT_EQ(l.decisions[k].mode, ControlMode::reused_gain);
    EXPECT_EQ(l.decisions[k].K, l.decisions[0].K);
  }
}

TEST(Controller, NoPriorSolutionAndInfeasibleThrows) {
  // |K x0| <= 1e-6 at x0 = e1 leaves the integrator mode unstabilized.
  ControllerState s = benchmark_state(1e-6);
  EXPECT_THROW(adaptive_step(s, (Vector(2) << 1.0, 0.0).finished()), AssumptionViolated);
  EXPECT_THROW(robust_step(s, (Vector(2) << 1.0, 0.0).finished()), AssumptionViolated);
}

TEST(Controller, FailedSolveReusesPreviousGain) {
  ControllerState s = benchmark_state();
  auto [d0, s1] = robust_step(std::move(s), (Vector(2) << 0.95, 0.0).finished());
  ASSERT_EQ(d0.mode, ControlMode::solved_fresh);
  s1.polytope = ConstraintPolytope::symmetric_input_box(2, Vector::Constant(1, 1e-6));
  auto [d1, s2] = robust_step(std::move(s1), (Vector(2) << 1.0, 0.0).finished());
  EXPECT_EQ(d1.mode, ControlMode::reused_gain);
  EXPECT_EQ(d1.K, d0.K);
}

TEST(Controller, MakeValidatesArguments) {
  const auto w = CostWeights::make(Matrix::Identity(2, 2), Matrix::Constant(1, 1, 0.01));
  EXPECT_THROW(ControllerState::make({}, 5, w, {}), std::invalid_argument);
  EXPECT_THROW(ControllerState::make(benchmark_grams(), 0, w, {}), std::invalid_argument);
}

TEST(Controller, ZeroStateGivesZeroInput) {
  auto [d, s] = robust_step(benchmark_state(), Vector::Zero(2));
  EXPECT_EQ(d.u.norm(), 0.0);
  EXPECT_EQ(d.lyapunov, 0.0);
}

TEST(CertifyDecrease, MatchesLyapunovOracle) {
  const SystemPair s = benchmark_system(0.15);
  const Matrix stable = (Matrix(1, 2) << -0.5, -0.6).finished();
  ASSERT_LT(spectral_radius(s.closed_loop(stable)), 1.0);
  const Matrix P = oracle::lyapunov(s.closed_loop(stable), Matrix::Identity(2, 2));
  const DecreaseReport good = certify_decrease(stable, P, {s});
  ASSERT_EQ(good.system_margins.size(), 1u);
  EXPECT_NEAR(good.system_margins[0], 1.0, 1e-9);  // P - Acl^T P Acl = I
  EXPECT_TRUE(good.all_positive());

  const Matrix unstable = (Matrix(1, 2) << 0.5, 0.0).finished();
  EXPECT_FALSE(certify_decrease(unstable, P, {s}).all_positive());
}

TEST(CertifyDecrease, CombinationsAreSampled) {
  const DecreaseReport r = certify_decrease((Matrix(1, 2) << -0.3, -0.4).finished(), Matrix::Identity(2, 2),
                                            {benchmark_system(0.1), benchmark_system(10.0)}, 25, 3);
  EXPECT_EQ(r.system_margins.size(), 2u);
  EXPECT_EQ(r.combination_margins.size(), 25u);
}

TEST(TraceCsv, RoundTrip) {
  std::vector<TraceRow> rows;
  for (std::size_t k = 0; k < 8; ++k) {
    const auto& d = nominal().decisions[k];
    rows.push_back({static_cast<int>(k), nominal().states[k], d.u, d.gamma, d.mode, d.lyapunov, d.iterations, 0.0, d.K, d.P});
  }
  std::ostringstream os;
  write_trace_csv(os, rows);
  std::istringstream is(os.str());
  const auto back = read_trace_csv(is, 2, 1);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(back[k].k, rows[k].k);
    EXPECT_EQ(back[k].x, rows[k].x);
    EXPECT_EQ(back[k].u, rows[k].u);
    EXPECT_EQ(back[k].gamma, rows[k].gamma);
    EXPECT_EQ(back[k].mode, rows[k].mode);
    EXPECT_EQ(back[k].K, rows[k].K);
    EXPECT_EQ(back[k].P, rows[k].P);
  }
  std::ostringstream again;
  write_trace_csv(again, back);
  EXPECT_EQ(again.str(), os.str());
}

TEST(TraceCsv, WrongFieldCountIsRejected) {
  std::istringstream is("k,x1\n0,1,2\n");
  EXPECT_THROW(read_trace_csv(is, 2, 1), DimensionError);
}

TEST(ControlMode, NamesRoundTrip) {
  for (ControlMode m : {ControlMode::solved_fresh, ControlMode::reused_gain, ControlMode::resolved_previous_window,
                        ControlMode::robust_warmup})
    EXPECT_EQ(control_mode_from_string(to_string(m)), m);
  EXPECT_THROW(control_mode_from_string("bogus"), std::invalid_argument);
}
