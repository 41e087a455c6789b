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
#include "zsgames/olne_solver.hpp"
#include "zsgames/problems.hpp"

using namespace zsg;

namespace {

MultiplierSet sg1_multipliers() {
  MultiplierSet m;
  m.lambda1 = {Vector::Constant(1, 8.0 / 7.0)};
  m.lambda2 = {Vector::Constant(1, -8.0 / 7.0)};
  return m;
}

Trajectory sg1_saddle(const GameDefinition& g) {
  return rollout(g, {Vector::Constant(1, -4.0 / 7.0)}, {Vector::Constant(1, 1.0 / 7.0)});
}

// Applies a flat step in the documented stage-major layout to an iterate.
void apply_flat(const OlStackLayout& L, Trajectory& traj, MultiplierSet& m, const Vector& dz) {
  for (int t = 1; t <= L.K; ++t) {
    traj.u1(t) += dz.segment(L.iu1(t), L.m1);
    traj.u2(t) += dz.segment(L.iu2(t), L.m2);
    m.lambda1[t - 1] += dz.segment(L.il1(t), L.n);
    m.lambda2[t - 1] += dz.segment(L.il2(t), L.n);
    traj.x(t + 1) += dz.segment(L.ix(t + 1), L.n);
  }
}

}  // namespace

TEST_CASE("SG1 saddle zeroes the stacked residual") {
  const GameDefinition g = make_scalar_lq({});
  const Vector r = assemble_ol_residual(g, sg1_saddle(g), sg1_multipliers());
  CHECK(r.lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("zero game at zero iterate has zero residual") {
  GameDefinition g = make_scalar_lq({.q = 0.0, .K = 2});
  // Zero out the stage cost too: weights must stay positive for the factory,
  // so build the degenerate game directly.
  g.stage_cost = [](int, const Vector&, const Vector&, const Vector&) { return 0.0; };
  g.stage_cost_derivatives = [](int, const Vector&, const Vector&, const Vector&) {
    StageCostDerivatives d;
    d.grad = Vector::Zero(3);
    d.hess = Matrix::Zero(3, 3);
    return d;
  };
  MultiplierSet m;
  m.lambda1.assign(2, Vector::Zero(1));
  m.lambda2.assign(2, Vector::Zero(1));
  const Vector r = assemble_ol_residual(g, rollout_zero(g), m);
  CHECK(r.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("perturbing u1 by 0.1 shows up only in the expected rows") {
  const GameDefinition g = make_scalar_lq({});
  Trajectory traj = sg1_saddle(g);
  traj.u1(1)(0) += 0.1;  // states left at the saddle values
  const Vector r = assemble_ol_residual(g, traj, sg1_multipliers());
  const OlStackLayout L = ol_layout(g);
  // Stage 1 rows: [c1, c2, dyn], terminal rows last.
  CHECK(r(0) == doctest::Approx(0.2).epsilon(1e-12));   // 2 (u1 + 0.1) + lambda1
  CHECK(r(1) == doctest::Approx(0.0).epsilon(1e-12));   // agent 2 row unchanged
  CHECK(r(2) == doctest::Approx(-0.1).epsilon(1e-12));  // x2 - f(x1, u1+0.1, u2)
  CHECK(r(L.terminal_row()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("Jacobian of an LQ game is constant in the iterate") {
  const GameDefinition g = make_scalar_lq({.K = 3});
  auto [u1a, u2a] = testing::random_controls(g, 1);
  auto [u1b, u2b] = testing::random_controls(g, 2);
  const Trajectory ta = rollout(g, u1a, u2a), tb = rollout(g, u1b, u2b);
  MultiplierSet ma, mb;
  auto [la1, la2] = recover_ol_costates(g, ta);
  auto [lb1, lb2] = recover_ol_costates(g, tb);
  ma.lambda1 = la1; ma.lambda2 = la2;
  mb.lambda1 = lb1; mb.lambda2 = lb2;
  const Matrix Ja = assemble_ol_jacobian(g, ta, ma);
  const Matrix Jb = assemble_ol_jacobian(g, tb, mb);
  CHECK((Ja - Jb).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("Jacobian matches finite differences of the residual on the unicycle") {
  const GameDefinition g = make_unicycle_pursuit({.K = 3});
  auto [u1, u2] = testing::random_controls(g, 5);
  const Trajectory traj = rollout(g, u1, u2);
  MultiplierSet m;
  auto [l1, l2] = recover_ol_costates(g, traj);
  m.lambda1 = l1;
  m.lambda2 = l2;
  const OlStackLayout L = ol_layout(g);
  const Matrix J = assemble_ol_jacobian(g, traj, m, /*include_dynamics_curvature=*/true);

  auto residual_at = [&](const Vector& dz) {
    Trajectory t2 = traj;
    MultiplierSet m2 = m;
    apply_flat(L, t2, m2, dz);
    return assemble_ol_residual(g, t2, m2);
  };
  const Matrix Jfd = testing::fd_jacobian(residual_at, Vector::Zero(L.total()), L.total());
  double rel = 0.0;
  for (int i = 0; i < L.total(); ++i)
    for (int j = 0; j < L.total(); ++j)
      rel = std::max(rel, std::abs(J(i, j) - Jfd(i, j)) / (1.0 + std::abs(J(i, j))));
  CHECK(rel < 1e-5);
}

TEST_CASE("identity-dynamics zero-cost Jacobian carries [I, -I] dynamics rows") {
  GameDefinition g;
  g.horizon = 2;
  g.state_dim = 2;
  g.control_dims = {1, 1};
  g.initial_state = Vector::Zero(2);
  g.dynamics = [](int, const Vector& x, const Vector&, const Vector&) { return x; };
  g.stage_cost = [](int, const Vector&, const Vector&, const Vector&) { return 0.0; };
  g.terminal_cost = [](const Vector&) { return 0.0; };
  MultiplierSet m;
  m.lambda1.assign(2, Vector::Zero(2));
  m.lambda2.assign(2, Vector::Zero(2));
  const Trajectory traj = rollout_zero(g);
  const Matrix J = assemble_ol_jacobian(g, traj, m);
  const OlStackLayout L = ol_layout(g);
  // Stage-2 dynamics rows: x3 column I, x2 column -A = -I.
  const int dyn2 = L.row_base(2) + 2 * L.n + L.m1 + L.m2;
  CHECK((J.block(dyn2, L.ix(3), 2, 2) - Matrix::Identity(2, 2)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((J.block(dyn2, L.ix(2), 2, 2) + Matrix::Identity(2, 2)).lpNorm<Eigen::Infinity>() == 0.0);
  // Control columns of the stage-1 dynamics rows are -B = -I columns.
  const int dyn1 = L.m1 + L.m2;
  CHECK(J(dyn1, L.iu1(1)) == 0.0);  // identity dynamics: B = 0 here
}

TEST_CASE("solve_olne: SG1 from zero converges in a few iterations") {
  const GameDefinition g = make_scalar_lq({});
  SolveOptions opts;
  opts.residual_tol = 1e-10;
  const OlneSolution sol = solve_olne(g, opts);
  CHECK(sol.log.converged);
  CHECK(sol.log.iterations.size() <= 5);
  CHECK(sol.log.final_residual < 1e-10);
  CHECK(sol.trajectory.u1(1)(0) == doctest::Approx(-4.0 / 7.0).epsilon(1e-10));
  CHECK(sol.trajectory.u2(1)(0) == doctest::Approx(1.0 / 7.0).epsilon(1e-10));
  CHECK(sol.multipliers.lambda1[0](0) == doctest::Approx(8.0 / 7.0).epsilon(1e-10));
}

TEST_CASE("solve_olne matches the one-shot LQ solve") {
  for (const GameDefinition& g :
       {make_scalar_lq({.K = 5}), make_double_integrator_pursuit({.K = 6})}) {
    const OlneSolution newton = solve_olne(g);
    REQUIRE(newton.log.converged);
    auto [stages, terminal] = testing::lq_data(g);
    const LqOpenLoopSolution oneshot = solve_lq_openloop(stages, terminal, g.initial_state);
    for (int t = 1; t <= g.horizon; ++t) {
      CHECK((newton.trajectory.u1(t) - oneshot.trajectory.u1(t)).lpNorm<Eigen::Infinity>() < 1e-8);
      CHECK((newton.trajectory.x(t + 1) - oneshot.trajectory.x(t + 1)).lpNorm<Eigen::Infinity>() <
            1e-8);
      CHECK((newton.multipliers.lambda1[t - 1] - oneshot.lambda1[t - 1]).lpNorm<Eigen::Infinity>() <
            1e-8);
    }
  }
}

TEST_CASE("solve_olne: Newton converges in one step on LQ games from any start") {
  const GameDefinition g = make_scalar_lq({.K = 4});
  auto [u1, u2] = testing::random_controls(g, 33, 2.0);
  const OlneSolution sol = solve_olne(g, rollout(g, u1, u2));
  CHECK(sol.log.converged);
  // One Newton step plus the convergence check.
  CHECK(sol.log.iterations.size() <= 2);
}

TEST_CASE("solve_olne on the unicycle recovers the costate negation") {
  const GameDefinition g = make_unicycle_pursuit({.K = 8});
  const OlneSolution sol = solve_olne(g);
  REQUIRE(sol.log.converged);
  CHECK(sol.log.final_residual <= 1e-8);
  CHECK(sol.multipliers.max_lambda_negation() < 1e-7);
  CHECK(dynamically_consistent(g, sol.trajectory));
}

TEST_CASE("recover_ol_costates reproduces hand and LQ oracles") {
  const GameDefinition g = make_scalar_lq({});
  auto [l1, l2] = recover_ol_costates(g, sg1_saddle(g));
  CHECK(l1[0](0) == doctest::Approx(8.0 / 7.0).epsilon(1e-14));
  CHECK(l2[0](0) == doctest::Approx(-8.0 / 7.0).epsilon(1e-14));

  GameDefinition zero = make_scalar_lq({.K = 3});
  zero.stage_cost_derivatives = [](int, const Vector&, const Vector&, const Vector&) {
    StageCostDerivatives d;
    d.grad = Vector::Zero(3);
    d.hess = Matrix::Zero(3, 3);
    return d;
  };
  zero.terminal_cost_derivatives = [](const Vector&) {
    return std::make_pair(Vector::Zero(1), Matrix::Zero(1, 1));
  };
  auto [z1, z2] = recover_ol_costates(zero, rollout_zero(zero));
  for (int t = 0; t < 3; ++t) CHECK(z1[t](0) == 0.0);

  const GameDefinition di = make_double_integrator_pursuit({.K = 5});
  auto [stages, terminal] = testing::lq_data(di);
  const LqOpenLoopSolution oneshot = solve_lq_openloop(stages, terminal, di.initial_state);
  auto [r1, r2] = recover_ol_costates(di, oneshot.trajectory);
  for (int t = 0; t < 5; ++t) {
    CHECK((r1[t] - oneshot.lambda1[t]).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((r2[t] - oneshot.lambda2[t]).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("recovery leaves state and terminal rows at machine zero") {
  const GameDefinition g = make_unicycle_pursuit({.K = 6});
  auto [u1, u2] = testing::random_controls(g, 44);
  const Trajectory traj = rollout(g, u1, u2);
  MultiplierSet m;
  auto [l1, l2] = recover_ol_costates(g, traj);
  m.lambda1 = l1;
  m.lambda2 = l2;
  const Vector r = assemble_ol_residual(g, traj, m);
  const OlStackLayout L = ol_layout(g);
  for (int t = 2; t <= g.horizon; ++t)
    CHECK(r.segment(L.row_base(t), 2 * L.n).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(r.segment(L.terminal_row(), 2 * L.n).lpNorm<Eigen::Infinity>() <= 1e-12);
}
