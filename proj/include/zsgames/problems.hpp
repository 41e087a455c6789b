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

#pragma once

#include <string>

#include <json.hpp>

#include "zsgames/game.hpp"

namespace zsg {

// Scalar zero-sum game: x' = x + u1 + u2, stage cost r1 u1^2 - r2 u2^2,
// terminal cost q x^2. The K=1, q=1, r1=1, r2=4, x1=1 instance (SG1 in the
// tests) has the closed-form saddle u1 = -4/7, u2 = 1/7.
struct ScalarLqParams {
  double q = 1.0;
  double r1 = 1.0;
  double r2 = 4.0;
  int K = 1;
  double x1 = 1.0;
};
GameDefinition make_scalar_lq(const ScalarLqParams& params = {});

// Planar pursuit-evasion with double-integrator vehicles. State is
// (p, v) per vehicle stacked to n = 8; controls are accelerations (m = 2
// each). The pursuer (agent 1) minimizes the relative-position quadratic,
// the evader maximizes it; both pay control penalties.
struct DoubleIntegratorParams {
  double dt = 0.1;
  int K = 20;
  double w_pos = 0.1;       // stage weight on |p1 - p2|^2
  double w_terminal = 1.0;  // terminal weight on |p1 - p2|^2
  double r1 = 1.0;
  double r2 = 4.0;
  // pursuer (p, v), evader (p, v)
  Vector x1 = (Vector(8) << 0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0).finished();
};
GameDefinition make_double_integrator_pursuit(const DoubleIntegratorParams& params = {});

// Planar pursuit-evasion with unicycle kinematics, state (px, py, heading)
// per vehicle (n = 6) and controls (speed, turn rate) per vehicle. Stage cost
// adds quartic speed penalties, which softly encode speed limits and make the
// cost nonquadratic; the heading coupling makes the dynamics nonlinear.
struct UnicycleParams {
  double dt = 0.1;
  int K = 40;
  double w_pos = 0.5;
  double w_terminal = 1.0;
  double r1 = 0.5;   // pursuer control penalty
  double r2 = 2.0;   // evader control penalty
  double s1 = 0.1;   // pursuer quartic speed penalty
  double s2 = 0.1;   // evader quartic speed penalty
  Vector x1 = (Vector(6) << 0.0, 0.0, 0.0, 2.0, 1.0, 0.5).finished();
};
GameDefinition make_unicycle_pursuit(const UnicycleParams& params = {});

// Box-constrained LQ game built from a scalar-LQ or double-integrator base.
// The requested bounds must clip the unconstrained open-loop equilibrium on
// at least one coordinate; the constructor validates that the constrained
// solution has an active, strictly complementary bound and retries with the
// box shrunk toward zero (up to three times) before giving up.
struct BoundedLqParams {
  std::string base = "scalar_lq";  // "scalar_lq" or "double_integrator"
  ScalarLqParams scalar;
  DoubleIntegratorParams integrator;
  // Scalar bounds broadcast over stages and coordinates.
  double lower1 = -10.0, upper1 = 10.0;
  double lower2 = -10.0, upper2 = 10.0;
};
GameDefinition make_bounded_lq(const BoundedLqParams& params);

// SG1 with the evader's control capped at 1/8 and all other bounds at +-10.
// Closed form: u1 = -9/16, u2 = 1/8, nu_upper for agent 2 = 1/8.
GameDefinition make_sg1_bounded();

// Name-based factory backing the CLI: "scalar_lq", "double_integrator",
// "unicycle", "bounded_lq", "sg1_bounded". Unknown names or invalid
// parameters throw ConfigError/InputError.
GameDefinition make_problem(const std::string& name, const nlohmann::json& params);

// K of a params object without building the game (for report rows).
int problem_horizon(const std::string& name, const nlohmann::json& params);

}  // namespace zsg
