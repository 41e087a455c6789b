/*
 Copyright 2026 The zsgames Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "zsgames/lq_kernel.hpp"
#include "zsgames/problems.hpp"

using namespace zsg;

namespace {

// SG1 as explicit LQ data: x' = x + u1 + u2, cost u1^2 - 4 u2^2, terminal x^2.
std::pair<std::vector<LqStage>, ValueQuadratic> sg1_data(int K = 1) {
  std::vector<LqStage> stages(K);
  for (auto& s : stages) {
    s.A = Matrix::Constant(1, 1, 1.0);
    s.B1 = Matrix::Constant(1, 1, 1.0);
    s.B2 = Matrix::Constant(1, 1, 1.0);
    s.c = Vector::Zero(1);
    s.H = Matrix::Zero(3, 3);
    s.H(1, 1) = 2.0;
    s.H(2, 2) = -8.0;
    s.g = Vector::Zero(3);
  }
  ValueQuadratic terminal;
  terminal.V2 = Matrix::Constant(1, 1, 2.0);
  terminal.V1 = Vector::Zero(1);
  return {stages, terminal};
}

}  // namespace

TEST_CASE("feedback recursion solves SG1") {
  auto [stages, terminal] = sg1_data();
  const LqFeedbackSolution sol = solve_lq_feedback(stages, terminal);
  const Vector x1 = Vector::Constant(1, 1.0);
  CHECK(sol.policy1.at(1)(x1)(0) == doctest::Approx(-4.0 / 7.0).epsilon(1e-12));
  CHECK(sol.policy2.at(1)(x1)(0) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(sol.values[0](x1) == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
  CHECK(sol.saddle_ok);
  CHECK(sol.diagnostics[0].min_eig_u1u1 > 0.0);
  CHECK(sol.diagnostics[0].max_eig_u2u2 < 0.0);
}

TEST_CASE("decoupled game reduces to single-agent LQR") {
  // Agent 2 has no dynamics influence and pays -u2^2; agent 1 faces a plain
  // LQR problem that an independent Riccati recursion can solve.
  const int K = 6, n = 2, m = 1;
  Matrix A(2, 2), B(2, 1);
  A << 1.0, 0.1, 0.0, 1.0;
  B << 0.0, 0.1;
  const Matrix Q = 0.5 * Matrix::Identity(2, 2);
  const Matrix R = Matrix::Constant(1, 1, 1.0);
  const Matrix Qf = 2.0 * Matrix::Identity(2, 2);

  std::vector<LqStage> stages(K);
  for (auto& s : stages) {
    s.A = A;
    s.B1 = B;
    s.B2 = Matrix::Zero(n, m);
    s.c = Vector::Zero(n);
    s.H = Matrix::Zero(n + 2 * m, n + 2 * m);
    s.H.topLeftCorner(n, n) = 2.0 * Q;
    s.H(n, n) = 2.0 * R(0, 0);
    s.H(n + m, n + m) = -2.0;
    s.g = Vector::Zero(n + 2 * m);
  }
  ValueQuadratic terminal;
  terminal.V2 = 2.0 * Qf;
  terminal.V1 = Vector::Zero(n);

  const LqFeedbackSolution sol = solve_lq_feedback(stages, terminal);
  for (int t = 1; t <= K; ++t) {
    CHECK(sol.policy2.at(t).gain.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    CHECK(sol.policy2.at(t).u_ref.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  }
  const Matrix lqr = testing::lqr_gain_stage1(A, B, Q, R, Qf, K);
  CHECK((sol.policy1.at(1).gain + lqr).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("zero game gives zero policies and zero value") {
  auto [stages, terminal] = sg1_data(3);
  for (auto& s : stages) s.H.setZero();
  terminal.V2.setZero();
  const LqFeedbackSolution sol = solve_lq_feedback(stages, terminal);
  for (int t = 1; t <= 3; ++t) {
    CHECK(sol.policy1.at(t).gain.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(sol.policy1.at(t).u_ref.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(sol.values[t - 1].V2.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(sol.values[t - 1].V1.lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("singular stacked stationarity matrix raises SaddleSingular") {
  auto [stages, terminal] = sg1_data();
  stages[0].H(1, 1) = -2.0;  // makes Zuu = [[0, 2], [2, -6]]? keep simple: zero out
  stages[0].H(1, 1) = 0.0;
  stages[0].H(2, 2) = 0.0;
  terminal.V2(0, 0) = 0.0;
  stages[0].g(1) = 1.0;  // nonzero gradient with zero curvature: singular solve
  CHECK_THROWS_AS(solve_lq_feedback(stages, terminal), SaddleSingularError);
}

TEST_CASE("open-loop one-shot solve on SG1") {
  auto [stages, terminal] = sg1_data();
  const LqOpenLoopSolution sol = solve_lq_openloop(stages, terminal, Vector::Constant(1, 1.0));
  CHECK(sol.trajectory.u1(1)(0) == doctest::Approx(-4.0 / 7.0).epsilon(1e-12));
  CHECK(sol.trajectory.u2(1)(0) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(sol.lambda1[0](0) == doctest::Approx(8.0 / 7.0).epsilon(1e-12));
  CHECK(sol.lambda2[0](0) == doctest::Approx(-8.0 / 7.0).epsilon(1e-12));
  CHECK(sol.kkt_residual < 1e-12);
}

TEST_CASE("open-loop costates negate across agents on a K-stage game") {
  auto [stages, terminal] = sg1_data(7);
  const LqOpenLoopSolution sol = solve_lq_openloop(stages, terminal, Vector::Constant(1, 1.0));
  for (int t = 0; t < 7; ++t)
    CHECK((sol.lambda1[t] + sol.lambda2[t]).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("zero-cost open-loop game returns the drift trajectory") {
  auto [stages, terminal] = sg1_data(4);
  for (auto& s : stages) {
    s.H.setZero();
    s.c = Vector::Constant(1, 0.25);
  }
  terminal.V2.setZero();
  const LqOpenLoopSolution sol = solve_lq_openloop(stages, terminal, Vector::Constant(1, 1.0));
  for (int t = 1; t <= 4; ++t) {
    CHECK(sol.trajectory.u1(t)(0) == 0.0);
    CHECK(sol.lambda1[t - 1](0) == 0.0);
    CHECK(sol.trajectory.x(t + 1)(0) == doctest::Approx(1.0 + 0.25 * t));
  }
}

TEST_CASE("feedback and open-loop trajectories coincide on LQ games") {
  // Scalar game with several stages and the double-integrator pursuit.
  for (int K : {1, 2, 5}) {
    auto [stages, terminal] = sg1_data(K);
    const Vector x1 = Vector::Constant(1, 1.0);
    const LqFeedbackSolution fb = solve_lq_feedback(stages, terminal);
    const LqOpenLoopSolution ol = solve_lq_openloop(stages, terminal, x1);
    REQUIRE(fb.saddle_ok);

    // Closed-loop rollout of the feedback policies through the LQ dynamics.
    Vector x = x1;
    for (int t = 1; t <= K; ++t) {
      const Vector u1 = fb.policy1.at(t)(x);
      const Vector u2 = fb.policy2.at(t)(x);
      x = stages[t - 1].A * x + stages[t - 1].B1 * u1 + stages[t - 1].B2 * u2 +
          stages[t - 1].c;
      CHECK((u1 - ol.trajectory.u1(t)).lpNorm<Eigen::Infinity>() < 1e-8);
      CHECK((u2 - ol.trajectory.u2(t)).lpNorm<Eigen::Infinity>() < 1e-8);
      CHECK((x - ol.trajectory.x(t + 1)).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }

  const GameDefinition game = make_double_integrator_pursuit({.K = 8});
  auto [stages, terminal] = testing::lq_data(game);
  const LqFeedbackSolution fb = solve_lq_feedback(stages, terminal);
  REQUIRE(fb.saddle_ok);
  const LqOpenLoopSolution ol = solve_lq_openloop(stages, terminal, game.initial_state);
  const Trajectory closed = rollout_policy(game, fb.policy1, fb.policy2);
  for (int t = 1; t <= game.horizon + 1; ++t)
    CHECK((closed.x(t) - ol.trajectory.x(t)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("value at the root matches the rolled-out cost") {
  const GameDefinition game = make_double_integrator_pursuit({.K = 6});
  auto [stages, terminal] = testing::lq_data(game);
  const LqFeedbackSolution fb = solve_lq_feedback(stages, terminal);
  const Trajectory closed = rollout_policy(game, fb.policy1, fb.policy2);
  const double V0 = fb.values[0](game.initial_state);
  const double J = total_cost(game, closed);
  CHECK(V0 == doctest::Approx(J).epsilon(1e-8));
}

TEST_CASE("curvature regularization shifts a wrong-sign stage") {
  auto [stages, terminal] = sg1_data();
  stages[0].H(2, 2) = 8.0;  // maximizer block with the wrong (positive) sign
  LqFeedbackOptions opts;
  opts.regularize = true;
  opts.reg_initial = 1.0;
  const LqFeedbackSolution sol = solve_lq_feedback(stages, terminal, opts);
  CHECK_FALSE(sol.saddle_ok);
  CHECK(sol.diagnostics[0].regularization > 8.0);
  CHECK(sol.diagnostics[0].max_eig_u2u2 < 0.0);
}
