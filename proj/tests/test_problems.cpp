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
#include "zsgames/constrained.hpp"
#include "zsgames/fbne_solver.hpp"
#include "zsgames/olne_solver.hpp"
#include "zsgames/problems.hpp"

using namespace zsg;

TEST_CASE("scalar LQ: SG1 parameters solve to the hand saddle") {
  const GameDefinition g = make_scalar_lq({});
  const OlneSolution sol = solve_olne(g);
  REQUIRE(sol.log.converged);
  CHECK(sol.trajectory.u1(1)(0) == doctest::Approx(-4.0 / 7.0).epsilon(1e-9));
  CHECK(sol.trajectory.u2(1)(0) == doctest::Approx(1.0 / 7.0).epsilon(1e-9));
}

TEST_CASE("scalar LQ: zero terminal weight decouples the quadratics") {
  const GameDefinition g = make_scalar_lq({.q = 0.0, .K = 3});
  const OlneSolution sol = solve_olne(g);
  REQUIRE(sol.log.converged);
  for (int t = 1; t <= 3; ++t) {
    CHECK(std::abs(sol.trajectory.u1(t)(0)) < 1e-10);
    CHECK(std::abs(sol.trajectory.u2(t)(0)) < 1e-10);
  }
}

TEST_CASE("every library game passes the finite-difference audit at 1e-5") {
  const std::vector<GameDefinition> games = {
      make_scalar_lq({.K = 4}),
      make_double_integrator_pursuit({.K = 6}),
      make_unicycle_pursuit({.K = 5}),
  };
  for (const GameDefinition& g : games) {
    for (unsigned seed : {101u, 202u}) {
      auto [u1, u2] = testing::random_controls(g, seed);
      const Trajectory traj = rollout(g, u1, u2);
      const GameDerivatives d = evaluate_derivatives(g, traj, true);
      const FdAuditReport rep = finite_difference_audit(g, traj, d, 1e-5);
      CHECK(rep.pass);
    }
  }
}

TEST_CASE("LQ library games: feedback and open-loop equilibria coincide") {
  for (const GameDefinition& g :
       {make_scalar_lq({.K = 5}), make_double_integrator_pursuit({.K = 5})}) {
    const FbneSolution fb = solve_fbne_ilq(g);
    const OlneSolution ol = solve_olne(g);
    REQUIRE(fb.log.converged);
    REQUIRE(ol.log.converged);
    for (int t = 1; t <= g.horizon + 1; ++t)
      CHECK((fb.trajectory.x(t) - ol.trajectory.x(t)).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("constructors are deterministic") {
  const GameDefinition a = make_unicycle_pursuit({});
  const GameDefinition b = make_unicycle_pursuit({});
  auto [u1, u2] = testing::random_controls(a, 5);
  const Trajectory ta = rollout(a, u1, u2);
  const Trajectory tb = rollout(b, u1, u2);
  for (int t = 1; t <= a.horizon + 1; ++t)
    CHECK((ta.x(t) - tb.x(t)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(total_cost(a, ta) == total_cost(b, tb));
}

TEST_CASE("unicycle: coincident starts give zero distance cost at zero controls") {
  UnicycleParams p;
  p.K = 4;
  p.x1 = (Vector(6) << 0.5, -0.5, 0.3, 0.5, -0.5, 1.1).finished();
  const GameDefinition g = make_unicycle_pursuit(p);
  const Trajectory traj = rollout_zero(g);
  CHECK(total_cost(g, traj) == 0.0);
}

TEST_CASE("unicycle iLQ converges at the documented default parameters") {
  // The acceptance suite runs the full K = 40 horizon; this spot check keeps
  // the unit suite fast.
  UnicycleParams p;
  p.K = 12;
  const GameDefinition g = make_unicycle_pursuit(p);
  FbneOptions opts;
  opts.base.residual_tol = 1e-6;
  const FbneSolution sol = solve_fbne_ilq(g, opts);
  CHECK(sol.log.converged);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_scalar_lq({.r1 = -1.0}), InputError);
  CHECK_THROWS_AS(make_scalar_lq({.K = 0}), InputError);
  CHECK_THROWS_AS(make_unicycle_pursuit({.dt = 0.0}), InputError);
  CHECK_THROWS_AS(make_double_integrator_pursuit({.dt = -0.1}), InputError);
}

TEST_CASE("bounded LQ constructor validates clipping") {
  // SG1-B: the evader cap is strictly inside the unconstrained range.
  const GameDefinition g = make_sg1_bounded();
  REQUIRE(g.bounds.has_value());
  const OlneSolution sol = solve_constrained_olne(g);
  REQUIRE(sol.log.converged);
  CHECK(sol.multipliers.nu_upper2[0](0) == doctest::Approx(0.125).epsilon(1e-6));

  // Bounds at +-1e6 do not clip anything: the constructor must reject them.
  BoundedLqParams wide;
  wide.lower1 = -1e6;
  wide.upper1 = 1e6;
  wide.lower2 = -1e6;
  wide.upper2 = 1e6;
  CHECK_THROWS_AS(make_bounded_lq(wide), InputError);
}

TEST_CASE("bounded LQ constructor: K=2 variant is strictly complementary") {
  BoundedLqParams p;
  p.scalar.K = 2;
  p.upper2 = 1.0 / 16.0;
  const GameDefinition g = make_bounded_lq(p);
  const OlneSolution sol = solve_constrained_olne(g);
  REQUIRE(sol.log.converged);
  const ActiveSetClassification cls =
      classify_active_set(g, sol.trajectory, sol.multipliers);
  CHECK(cls.any_active);
  CHECK(cls.strict_complementarity);
}

TEST_CASE("name-based factory and parameter schema") {
  using nlohmann::json;
  const GameDefinition g =
      make_problem("scalar_lq", json{{"q", 1.0}, {"r1", 1.0}, {"r2", 4.0}, {"K", 2}});
  CHECK(g.horizon == 2);
  CHECK(problem_horizon("scalar_lq", json{{"K", 7}}) == 7);
  CHECK(problem_horizon("unicycle", json::object()) == 40);
  CHECK_THROWS_AS(make_problem("nope", json::object()), ConfigError);
  CHECK_THROWS_AS(make_problem("scalar_lq", json{{"bogus", 1}}), ConfigError);
}
