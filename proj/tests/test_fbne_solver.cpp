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
#include "zsgames/equilibrium_verify.hpp"
#include "zsgames/fbne_solver.hpp"
#include "zsgames/lq_kernel.hpp"
#include "zsgames/olne_solver.hpp"
#include "zsgames/problems.hpp"

using namespace zsg;

TEST_CASE("iLQ solves SG1 in one LQ solve") {
  const GameDefinition g = make_scalar_lq({});
  const FbneSolution sol = solve_fbne_ilq(g);
  CHECK(sol.log.converged);
  CHECK(sol.log.iterations.size() <= 2);
  CHECK(sol.trajectory.u1(1)(0) == doctest::Approx(-4.0 / 7.0).epsilon(1e-10));
  CHECK(sol.trajectory.u2(1)(0) == doctest::Approx(1.0 / 7.0).epsilon(1e-10));
  // Policies are anchored at the converged trajectory.
  CHECK(sol.policy1.at(1).x_ref(0) == doctest::Approx(1.0));
  CHECK(sol.policy1.at(1).u_ref(0) == doctest::Approx(-4.0 / 7.0).epsilon(1e-10));
}

TEST_CASE("iLQ closed loop equals the one-shot LQ open-loop trajectory") {
  const GameDefinition g = make_double_integrator_pursuit({.K = 8});
  const FbneSolution fb = solve_fbne_ilq(g);
  REQUIRE(fb.log.converged);
  auto [stages, terminal] = testing::lq_data(g);
  const LqOpenLoopSolution ol = solve_lq_openloop(stages, terminal, g.initial_state);
  for (int t = 1; t <= g.horizon + 1; ++t)
    CHECK((fb.trajectory.x(t) - ol.trajectory.x(t)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("one iLQ iteration reaches the exact LQ feedback solution from any start") {
  const GameDefinition g = make_scalar_lq({.K = 3});
  AffinePolicySet p1 = zero_policies(g, 1), p2 = zero_policies(g, 2);
  for (int t = 1; t <= 3; ++t) {
    p1.at(t).u_ref = Vector::Constant(1, 0.8 - 0.3 * t);
    p2.at(t).u_ref = Vector::Constant(1, -0.2 + 0.1 * t);
  }
  const FbneSolution sol = solve_fbne_ilq(g, p1, p2);
  CHECK(sol.log.converged);
  CHECK(sol.log.iterations.size() <= 2);

  auto [stages, terminal] = testing::lq_data(g);
  const LqFeedbackSolution lq = solve_lq_feedback(stages, terminal);
  for (int t = 1; t <= 3; ++t)
    CHECK((sol.policy1.at(t).gain - lq.policy1.at(t).gain).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("iLQ on the unicycle converges with genuinely nonzero gains") {
  const GameDefinition g = make_unicycle_pursuit({.K = 8});
  FbneOptions opts;
  opts.base.residual_tol = 1e-6;
  const FbneSolution sol = solve_fbne_ilq(g, opts);
  REQUIRE(sol.log.converged);
  CHECK(sol.log.final_residual < 1e-6);
  double gain_norm = 0.0;
  for (int t = 1; t <= g.horizon; ++t)
    gain_norm = std::max(gain_norm, sol.policy1.at(t).gain.lpNorm<Eigen::Infinity>());
  CHECK(gain_norm > 1e-3);
}

TEST_CASE("fixed point: closed-loop rollout reproduces the returned trajectory") {
  const GameDefinition g = make_unicycle_pursuit({.K = 6});
  FbneOptions opts;
  opts.base.residual_tol = 1e-8;
  const FbneSolution sol = solve_fbne_ilq(g, opts);
  REQUIRE(sol.log.converged);
  const Trajectory rolled = rollout_policy(g, sol.policy1, sol.policy2);
  for (int t = 1; t <= g.horizon + 1; ++t)
    CHECK((rolled.x(t) - sol.trajectory.x(t)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("recover_fb_multipliers: SG1 has costates but no psi at K=1") {
  const GameDefinition g = make_scalar_lq({});
  const FbneSolution sol = solve_fbne_ilq(g);
  const MultiplierSet m = recover_fb_multipliers(g, sol.trajectory, sol.policy1, sol.policy2);
  CHECK(m.lambda1[0](0) == doctest::Approx(8.0 / 7.0).epsilon(1e-10));
  CHECK(m.lambda2[0](0) == doctest::Approx(-8.0 / 7.0).epsilon(1e-10));
  CHECK_FALSE(m.has_psi());
}

TEST_CASE("recover_fb_multipliers: psi vanishes at a K=2 LQ feedback equilibrium") {
  const GameDefinition g = make_scalar_lq({.K = 2});
  const FbneSolution sol = solve_fbne_ilq(g);
  REQUIRE(sol.log.converged);
  const MultiplierSet m = recover_fb_multipliers(g, sol.trajectory, sol.policy1, sol.policy2);
  REQUIRE(m.has_psi());
  CHECK(m.max_psi_norm() < 1e-8);
  CHECK(m.max_lambda_negation() < 1e-8);
}

TEST_CASE("recover_fb_multipliers: lambda negation at the unicycle equilibrium") {
  const GameDefinition g = make_unicycle_pursuit({.K = 6});
  FbneOptions opts;
  opts.base.residual_tol = 1e-8;
  const FbneSolution sol = solve_fbne_ilq(g, opts);
  REQUIRE(sol.log.converged);
  const MultiplierSet m = recover_fb_multipliers(g, sol.trajectory, sol.policy1, sol.policy2);
  CHECK(m.max_lambda_negation() < 1e-6);
}

TEST_CASE("recovery rows vanish by construction for arbitrary policies") {
  const GameDefinition g = make_unicycle_pursuit({.K = 5});
  AffinePolicySet p1 = zero_policies(g, 1), p2 = zero_policies(g, 2);
  for (int t = 1; t <= 5; ++t) {
    p1.at(t).u_ref = (Vector(2) << 0.3, -0.1 * t).finished();
    p2.at(t).gain = 0.05 * Matrix::Ones(2, 6);
  }
  const Trajectory traj = rollout_policy(g, p1, p2);
  // Anchor the policies on their own rollout so they pass the consistency
  // check without changing as functions.
  for (int t = 1; t <= 5; ++t) {
    p1.at(t).u_ref = traj.u1(t);
    p1.at(t).x_ref = traj.x(t);
    p2.at(t).u_ref = traj.u2(t);
    p2.at(t).x_ref = traj.x(t);
  }
  const MultiplierSet m = recover_fb_multipliers(g, traj, p1, p2);
  const KktResidualReport rep = fb_first_order_report(g, traj, p1, p2, m);
  CHECK(rep.families.state_stationarity <= 1e-12);
  CHECK(rep.families.terminal <= 1e-12);
  REQUIRE(rep.families.cross_control.has_value());
  CHECK(*rep.families.cross_control <= 1e-12);
  REQUIRE(rep.families.policy_constraint.has_value());
  CHECK(*rep.families.policy_constraint <= 1e-12);
  // Own-control rows are the genuine residual away from an equilibrium.
  CHECK(rep.families.own_control > 1e-3);
}

TEST_CASE("recover_fb_multipliers rejects inconsistent trajectories") {
  const GameDefinition g = make_scalar_lq({});
  const FbneSolution sol = solve_fbne_ilq(g);
  Trajectory bad = sol.trajectory;
  bad.u1(1)(0) += 0.25;
  CHECK_THROWS_AS(recover_fb_multipliers(g, bad, sol.policy1, sol.policy2), InputError);
}
