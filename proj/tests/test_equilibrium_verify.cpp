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
#include "zsgames/olne_solver.hpp"
#include "zsgames/problems.hpp"

using namespace zsg;

namespace {

Trajectory sg1_saddle(const GameDefinition& g) {
  return rollout(g, {Vector::Constant(1, -4.0 / 7.0)}, {Vector::Constant(1, 1.0 / 7.0)});
}

using Structure = CriticalConeBasis::Structure;

}  // namespace

TEST_CASE("open-loop report vanishes at the SG1 saddle") {
  const GameDefinition g = make_scalar_lq({});
  const KktResidualReport rep = ol_first_order_report(g, sg1_saddle(g));
  CHECK(rep.families.max() < 1e-15);
  CHECK(rep.pass);
  CHECK(rep.lambda_negation_max < 1e-15);
}

TEST_CASE("open-loop report flags a perturbed control") {
  const GameDefinition g = make_scalar_lq({});
  Trajectory traj = sg1_saddle(g);
  traj.u1(1)(0) += 0.1;
  const Trajectory rolled = rollout(g, traj.controls1, traj.controls2);
  MultiplierSet m;
  m.lambda1 = {Vector::Constant(1, 8.0 / 7.0)};
  m.lambda2 = {Vector::Constant(1, -8.0 / 7.0)};
  const KktResidualReport rep = ol_first_order_report(g, rolled, m);
  CHECK_FALSE(rep.pass);
  // With the saddle multipliers held fixed the violated family is the own
  // control row: 2 (u1 + 0.1) + lambda1 = 0.2 plus the terminal/state shifts
  // caused by the re-rolled states.
  CHECK(rep.families.own_control > 0.1);
}

TEST_CASE("feedback report at a converged LQ equilibrium is clean") {
  const GameDefinition g = make_scalar_lq({.K = 2});
  const FbneSolution sol = solve_fbne_ilq(g);
  REQUIRE(sol.log.converged);
  const KktResidualReport rep =
      fb_first_order_report(g, sol.trajectory, sol.policy1, sol.policy2);
  CHECK(rep.families.max() <= 1e-8);
  REQUIRE(rep.psi_max.has_value());
  CHECK(*rep.psi_max <= 1e-8);
  CHECK(rep.pass);
}

TEST_CASE("Remark-style reduction: zero-gain psi-free feedback report equals open-loop") {
  const GameDefinition g = make_unicycle_pursuit({.K = 5});
  auto [u1, u2] = testing::random_controls(g, 8);
  const Trajectory traj = rollout(g, u1, u2);

  const KktResidualReport ol = ol_first_order_report(g, traj);

  MultiplierSet m;
  auto [l1, l2] = recover_ol_costates(g, traj);
  m.lambda1 = l1;
  m.lambda2 = l2;
  m.psi1.assign(g.horizon - 1, Vector::Zero(2));
  m.psi2.assign(g.horizon - 1, Vector::Zero(2));
  const KktResidualReport fb = fb_first_order_report(g, traj, embed_open_loop(traj, 1),
                                                     embed_open_loop(traj, 2), m);

  CHECK(std::abs(fb.families.state_stationarity - ol.families.state_stationarity) <= 1e-12);
  CHECK(std::abs(fb.families.own_control - ol.families.own_control) <= 1e-12);
  CHECK(std::abs(fb.families.terminal - ol.families.terminal) <= 1e-12);
  CHECK(std::abs(fb.families.dynamics - ol.families.dynamics) <= 1e-12);
  CHECK(*fb.families.policy_constraint <= 1e-12);
}

TEST_CASE("feedback report on random inputs is finite and nonnegative") {
  const GameDefinition g = make_unicycle_pursuit({.K = 4});
  AffinePolicySet p1 = zero_policies(g, 1), p2 = zero_policies(g, 2);
  for (int t = 1; t <= 4; ++t) p2.at(t).gain = 0.1 * Matrix::Ones(2, 6);
  const Trajectory traj = rollout_policy(g, p1, p2);
  for (int t = 1; t <= 4; ++t) {
    p1.at(t).u_ref = traj.u1(t);
    p1.at(t).x_ref = traj.x(t);
    p2.at(t).u_ref = traj.u2(t);
    p2.at(t).x_ref = traj.x(t);
  }
  const KktResidualReport rep = fb_first_order_report(g, traj, p1, p2);
  CHECK(std::isfinite(rep.families.max()));
  CHECK(rep.families.max() >= 0.0);
  CHECK(rep.per_stage.size() == 5);
}

TEST_CASE("SG1 open-loop cone is the single direction (1, 1)") {
  const GameDefinition g = make_scalar_lq({});
  const Trajectory traj = sg1_saddle(g);
  const CriticalConeBasis cone = build_critical_cone(g, traj, Structure::OpenLoop, 1);
  REQUIRE(cone.basis.cols() == 1);
  REQUIRE(cone.layout_dim() == 2);
  CHECK(cone.basis(0, 0) == 1.0);  // d_u1
  CHECK(cone.basis(1, 0) == doctest::Approx(1.0));  // d_x2 = B1 d_u1
  CHECK(cone.constraint_residual <= 1e-10);
  CHECK(cone.min_singular_value > 1e-10);
}

TEST_CASE("identity dynamics with B = I gives shifted-impulse columns") {
  GameDefinition g;
  g.horizon = 3;
  g.state_dim = 1;
  g.control_dims = {1, 1};
  g.initial_state = Vector::Zero(1);
  g.dynamics = [](int, const Vector& x, const Vector& u1, const Vector& u2) {
    return Vector(x + u1 + u2);
  };
  g.stage_cost = [](int, const Vector&, const Vector& u1, const Vector& u2) {
    return u1.squaredNorm() - u2.squaredNorm();
  };
  g.terminal_cost = [](const Vector& x) { return x.squaredNorm(); };
  const Trajectory traj = rollout_zero(g);
  const CriticalConeBasis cone = build_critical_cone(g, traj, Structure::OpenLoop, 1);
  // Column for the impulse at stage t: d_x_s = 1 for all s > t.
  for (int t = 1; t <= 3; ++t) {
    const auto col = cone.basis.col(t - 1);
    for (int s = 2; s <= 4; ++s)
      CHECK(col(cone.off_x(s)) == doctest::Approx(s > t ? 1.0 : 0.0));
  }
}

TEST_CASE("feedback cone at a K=2 LQ equilibrium reduces to the open-loop cone") {
  const GameDefinition g = make_scalar_lq({.K = 2});
  const FbneSolution sol = solve_fbne_ilq(g);
  REQUIRE(sol.log.converged);

  int total_dims = 0;
  for (int agent = 1; agent <= 2; ++agent) {
    const CriticalConeBasis fb_cone =
        build_critical_cone(g, sol.trajectory, Structure::Feedback, agent, &sol.policy1,
                            &sol.policy2, 1e-6);
    CHECK(fb_cone.policy_rows_dropped);  // weakly active at an equilibrium
    total_dims += static_cast<int>(fb_cone.basis.cols());

    const CriticalConeBasis ol_cone =
        build_critical_cone(g, sol.trajectory, Structure::OpenLoop, agent);
    const FbConeConstraints fc = make_fb_cone_constraints(
        g, sol.trajectory, agent, agent == 1 ? sol.policy2 : sol.policy1,
        /*policy_rows_active=*/false);
    const ConeContainment cc = cone_containment_check(ol_cone, fc, 1e-12);
    CHECK(cc.contained);
    CHECK(cc.max_lift_residual < 1e-12);
  }
  // One free direction per stage and control coordinate across both agents.
  CHECK(total_dims == 2 * (1 + 1));
}

TEST_CASE("containment fails when the policy rows are kept with nonzero gains") {
  const GameDefinition g = make_scalar_lq({.K = 2});
  const FbneSolution sol = solve_fbne_ilq(g);
  REQUIRE(sol.log.converged);
  const CriticalConeBasis ol_cone =
      build_critical_cone(g, sol.trajectory, Structure::OpenLoop, 1);
  const FbConeConstraints fc = make_fb_cone_constraints(g, sol.trajectory, 1, sol.policy2,
                                                        /*policy_rows_active=*/true);
  const ConeContainment cc = cone_containment_check(ol_cone, fc, 1e-12);
  CHECK_FALSE(cc.contained);
  // The lift residual is |gain * d_x| on the stage-2 policy row.
  const double gain = sol.policy2.at(2).gain(0, 0);
  const double dx2 = ol_cone.basis(ol_cone.off_x(2), 0);
  CHECK(cc.max_lift_residual == doctest::Approx(std::abs(gain * dx2)).epsilon(1e-10));
}

TEST_CASE("zero game containment holds trivially") {
  GameDefinition g;
  g.horizon = 2;
  g.state_dim = 1;
  g.control_dims = {1, 1};
  g.initial_state = Vector::Zero(1);
  g.dynamics = [](int, const Vector& x, const Vector& u1, const Vector& u2) {
    return Vector(x + u1 + u2);
  };
  g.stage_cost = [](int, const Vector&, const Vector&, const Vector&) { return 0.0; };
  g.terminal_cost = [](const Vector&) { return 0.0; };
  const Trajectory traj = rollout_zero(g);
  const CriticalConeBasis ol_cone = build_critical_cone(g, traj, Structure::OpenLoop, 1);
  const FbConeConstraints fc =
      make_fb_cone_constraints(g, traj, 1, zero_policies(g, 2), false);
  CHECK(cone_containment_check(ol_cone, fc, 1e-12).contained);
}

TEST_CASE("projected Hessians on SG1 are exactly 4 and 6") {
  const GameDefinition g = make_scalar_lq({});
  const Trajectory traj = sg1_saddle(g);
  MultiplierSet m;
  m.lambda1 = {Vector::Constant(1, 8.0 / 7.0)};
  m.lambda2 = {Vector::Constant(1, -8.0 / 7.0)};

  const CriticalConeBasis cone1 = build_critical_cone(g, traj, Structure::OpenLoop, 1);
  const SecondOrderReport rep1 = second_order_report(g, traj, m, cone1, 1);
  CHECK(rep1.min_eig == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rep1.classification == SecondOrderReport::Classification::Sufficient);

  const CriticalConeBasis cone2 = build_critical_cone(g, traj, Structure::OpenLoop, 2);
  const SecondOrderReport rep2 = second_order_report(g, traj, m, cone2, 2);
  CHECK(rep2.min_eig == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(rep2.classification == SecondOrderReport::Classification::Sufficient);
}

TEST_CASE("indefinite toy problem fails the second-order test") {
  // Stage cost u1^2, terminal -3 x^2, same scalar dynamics: the projected
  // value on the unit cone direction is 2 - 6 = -4.
  GameDefinition g = make_scalar_lq({});
  g.terminal_cost = [](const Vector& x) { return -3.0 * x.squaredNorm(); };
  g.terminal_cost_derivatives = [](const Vector& x) {
    return std::make_pair(Vector(-6.0 * x), Matrix::Constant(1, 1, -6.0));
  };
  const Trajectory traj = rollout_zero(g);
  MultiplierSet m;
  auto [l1, l2] = recover_ol_costates(g, traj);
  m.lambda1 = l1;
  m.lambda2 = l2;
  const CriticalConeBasis cone = build_critical_cone(g, traj, Structure::OpenLoop, 1);
  const SecondOrderReport rep = second_order_report(g, traj, m, cone, 1);
  CHECK(rep.min_eig == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(rep.classification == SecondOrderReport::Classification::Fails);
}

TEST_CASE("projected Hessian is built symmetric") {
  const GameDefinition g = make_unicycle_pursuit({.K = 4});
  FbneOptions opts;
  opts.base.residual_tol = 1e-7;
  const FbneSolution sol = solve_fbne_ilq(g, opts);
  REQUIRE(sol.log.converged);
  auto [l1, l2] = recover_ol_costates(g, sol.trajectory);
  MultiplierSet m;
  m.lambda1 = l1;
  m.lambda2 = l2;
  const CriticalConeBasis cone =
      build_critical_cone(g, sol.trajectory, Structure::OpenLoop, 1);
  const SecondOrderReport rep = second_order_report(g, sol.trajectory, m, cone, 1);
  const Matrix& P = rep.projected;
  CHECK((P - P.transpose()).lpNorm<Eigen::Infinity>() <=
        1e-10 * (1.0 + P.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("theorem1 audit certifies the LQ double integrator") {
  const GameDefinition g = make_double_integrator_pursuit({.K = 5});
  const FbneSolution sol = solve_fbne_ilq(g);
  REQUIRE(sol.log.converged);
  const Theorem1Audit audit = theorem1_audit(g, sol.policy1, sol.policy2, sol.trajectory);
  CHECK(audit.verdict == AuditVerdict::OlneCertified);
  CHECK(audit.ol_report.families.max() < 1e-8);
  CHECK(audit.cascade_pass);
  CHECK(audit.containment_pass);
  for (int a = 0; a < 2; ++a) {
    CHECK(audit.fb_second_order[a].classification ==
          SecondOrderReport::Classification::Sufficient);
    CHECK(audit.ol_second_order[a].classification ==
          SecondOrderReport::Classification::Sufficient);
  }
}

TEST_CASE("theorem1 audit refuses a perturbed trajectory") {
  const GameDefinition g = make_scalar_lq({.K = 2});
  const FbneSolution sol = solve_fbne_ilq(g);
  REQUIRE(sol.log.converged);
  AffinePolicySet p1 = sol.policy1, p2 = sol.policy2;
  for (int t = 1; t <= 2; ++t) p1.at(t).u_ref(0) += 0.1;
  const Trajectory bad = rollout_policy(g, p1, p2);
  // Re-anchor so the recovery precondition holds; the residual gate must
  // still refuse the audit.
  for (int t = 1; t <= 2; ++t) {
    p1.at(t).u_ref = bad.u1(t);
    p1.at(t).x_ref = bad.x(t);
    p2.at(t).u_ref = bad.u2(t);
    p2.at(t).x_ref = bad.x(t);
  }
  const Theorem1Audit audit = theorem1_audit(g, p1, p2, bad);
  CHECK(audit.verdict == AuditVerdict::Refused);
  CHECK_FALSE(audit.refusal_reason.empty());
}

TEST_CASE("theorem1 converse: SG1 and LQ open-loop points satisfy the feedback conditions") {
  const GameDefinition g = make_scalar_lq({});
  const OlneSolution ol = solve_olne(g);
  REQUIRE(ol.log.converged);
  const Theorem1ConverseAudit audit = theorem1_converse_audit(g, ol.trajectory, ol.multipliers);
  CHECK_FALSE(audit.refused);
  CHECK(audit.pass);
  CHECK(audit.fb_report.families.max() < 1e-10);

  const GameDefinition di = make_double_integrator_pursuit({.K = 6});
  const OlneSolution ol2 = solve_olne(di);
  REQUIRE(ol2.log.converged);
  const Theorem1ConverseAudit audit2 =
      theorem1_converse_audit(di, ol2.trajectory, ol2.multipliers);
  CHECK_FALSE(audit2.refused);
  CHECK(audit2.pass);
  CHECK(audit2.fb_report.families.max() < 1e-8);
}

TEST_CASE("theorem1 converse refuses a non-equilibrium trajectory") {
  const GameDefinition g = make_scalar_lq({});
  auto [u1, u2] = testing::random_controls(g, 13);
  const Trajectory traj = rollout(g, u1, u2);
  const Theorem1ConverseAudit audit = theorem1_converse_audit(g, traj);
  CHECK(audit.refused);
}
