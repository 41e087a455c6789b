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

#include <array>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "zsgames/types.hpp"

namespace zsg {

// Stage indices are 1-based everywhere in the public interface: dynamics and
// stage costs are defined for t in [1, K], the terminal cost acts on x_{K+1}.
// Internal containers are 0-based; the accessors below do the shift.

// Gradient and Hessian of a stage cost over the stacked variable z = (x, u1, u2).
struct StageCostDerivatives {
  Vector grad;
  Matrix hess;
};

struct DynamicsJacobians {
  Matrix A;   // d f / d x
  Matrix B1;  // d f / d u1
  Matrix B2;  // d f / d u2
};

using DynamicsFn = std::function<Vector(int t, const Vector& x, const Vector& u1, const Vector& u2)>;
using StageCostFn = std::function<double(int t, const Vector& x, const Vector& u1, const Vector& u2)>;
using TerminalCostFn = std::function<double(const Vector& x)>;
using StageCostDerivFn = std::function<StageCostDerivatives(int t, const Vector& x, const Vector& u1, const Vector& u2)>;
using DynamicsJacobianFn = std::function<DynamicsJacobians(int t, const Vector& x, const Vector& u1, const Vector& u2)>;
// Component Hessians of the dynamics: element k is the symmetric Hessian of
// f_k over the stacked variable z = (x, u1, u2).
using DynamicsHessianFn = std::function<std::vector<Matrix>(int t, const Vector& x, const Vector& u1, const Vector& u2)>;
using TerminalCostDerivFn = std::function<std::pair<Vector, Matrix>(const Vector& x)>;

struct StageBounds {
  Vector lower;
  Vector upper;
};

struct ControlBounds {
  std::vector<StageBounds> agent1;  // size K
  std::vector<StageBounds> agent2;  // size K
};

// Two-agent zero-sum dynamic game. Agent 1 minimizes the cumulative cost
// J = sum_t stage_cost + terminal_cost; agent 2 minimizes -J. The cost and
// dynamics evaluators must be pure: they are called concurrently and never
// inspected symbolically. Derivative callbacks are optional; when absent,
// central finite differences are used (see derivatives.hpp).
struct GameDefinition {
  int horizon = 0;    // K >= 1
  int state_dim = 0;  // n
  std::array<int, 2> control_dims{0, 0};  // (m1, m2)
  Vector initial_state;

  DynamicsFn dynamics;
  StageCostFn stage_cost;
  TerminalCostFn terminal_cost;

  StageCostDerivFn stage_cost_derivatives;      // optional
  DynamicsJacobianFn dynamics_jacobians;        // optional
  DynamicsHessianFn dynamics_hessians;          // optional
  TerminalCostDerivFn terminal_cost_derivatives;  // optional

  std::optional<ControlBounds> bounds;

  int control_dim(int agent) const { return control_dims[agent - 1]; }
  int stacked_dim() const { return state_dim + control_dims[0] + control_dims[1]; }
  bool has_analytic_cost() const { return static_cast<bool>(stage_cost_derivatives); }
  bool has_analytic_dynamics() const { return static_cast<bool>(dynamics_jacobians); }

  const StageBounds& stage_bounds(int agent, int t) const;

  // Throws InputError on dimension/bound inconsistencies.
  void validate() const;
};

struct Trajectory {
  std::vector<Vector> states;     // K+1 entries, states[t-1] = x_t
  std::vector<Vector> controls1;  // K entries, controls1[t-1] = u1_t
  std::vector<Vector> controls2;  // K entries

  int horizon() const { return static_cast<int>(controls1.size()); }
  const Vector& x(int t) const { return states[t - 1]; }
  const Vector& u1(int t) const { return controls1[t - 1]; }
  const Vector& u2(int t) const { return controls2[t - 1]; }
  const Vector& u(int agent, int t) const { return agent == 1 ? controls1[t - 1] : controls2[t - 1]; }
  Vector& x(int t) { return states[t - 1]; }
  Vector& u1(int t) { return controls1[t - 1]; }
  Vector& u2(int t) { return controls2[t - 1]; }
};

// Affine stage policy pi(x) = u_ref + gain * (x - x_ref). The state gradient
// of the policy is exactly `gain`.
struct AffinePolicy {
  Matrix gain;
  Vector u_ref;
  Vector x_ref;

  Vector operator()(const Vector& x) const { return u_ref + gain * (x - x_ref); }
};

struct AffinePolicySet {
  std::vector<AffinePolicy> stages;  // size K, stages[t-1] applies at stage t

  int horizon() const { return static_cast<int>(stages.size()); }
  const AffinePolicy& at(int t) const { return stages[t - 1]; }
  AffinePolicy& at(int t) { return stages[t - 1]; }
};

// Zero-gain, zero-offset policies of the right shape.
AffinePolicySet zero_policies(const GameDefinition& game, int agent);

// Embeds an open-loop solution as policies with zero gains whose offsets
// reproduce the given controls along the given states.
AffinePolicySet embed_open_loop(const Trajectory& traj, int agent);

// Absolute infinity-norm tolerance for calling an externally supplied
// trajectory dynamically consistent; rollouts satisfy it exactly.
inline constexpr double kDynTol = 1e-9;

Trajectory rollout(const GameDefinition& game, const std::vector<Vector>& u1,
                   const std::vector<Vector>& u2);
Trajectory rollout_policy(const GameDefinition& game, const AffinePolicySet& policies1,
                          const AffinePolicySet& policies2);
Trajectory rollout_zero(const GameDefinition& game);

double total_cost(const GameDefinition& game, const Trajectory& traj);
// agent == 1 returns J, agent == 2 returns exactly -J.
double agent_cost(const GameDefinition& game, const Trajectory& traj, int agent);

double dynamics_defect(const GameDefinition& game, const Trajectory& traj);
bool dynamically_consistent(const GameDefinition& game, const Trajectory& traj,
                            double tol = kDynTol);

}  // namespace zsg
