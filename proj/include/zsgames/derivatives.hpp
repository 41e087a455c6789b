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

#include <optional>
#include <string>
#include <vector>

#include "zsgames/game.hpp"

namespace zsg {

// First and second derivatives of agent 1's stage cost and the dynamics at one
// trajectory point, over the stacked variable z = (x, u1, u2). Agent 2's cost
// derivatives are the exact negation and are never stored separately.
struct StageDerivatives {
  int n = 0, m1 = 0, m2 = 0;

  Vector cost_grad;  // gradient of l_t over z
  Matrix cost_hess;  // Hessian of l_t over z (empty when only first order requested)
  Matrix A, B1, B2;  // dynamics Jacobians

  // Component Hessians of the dynamics over z; filled only when requested.
  std::vector<Matrix> dyn_hess;

  bool has_cost_hessian() const { return cost_hess.size() > 0; }
  bool has_dynamics_curvature() const { return !dyn_hess.empty(); }

  auto grad_x() const { return cost_grad.segment(0, n); }
  auto grad_u1() const { return cost_grad.segment(n, m1); }
  auto grad_u2() const { return cost_grad.segment(n + m1, m2); }
  auto grad_u(int agent) const { return agent == 1 ? grad_u1() : grad_u2(); }
  const Matrix& B(int agent) const { return agent == 1 ? B1 : B2; }

  // sum_k w_k * Hess(f_k); throws ConfigError if curvature was not evaluated.
  Matrix curvature_contraction(const Vector& w) const;
};

struct TerminalDerivatives {
  Vector grad;  // gradient of the terminal cost, agent 1
  Matrix hess;  // Hessian of the terminal cost, agent 1
};

struct GameDerivatives {
  std::vector<StageDerivatives> stages;  // size K, stages[t-1] for stage t
  TerminalDerivatives terminal;

  const StageDerivatives& at(int t) const { return stages[t - 1]; }
};

enum class DerivativeOrder { First, Second };

// Evaluates derivatives along the trajectory: analytic callbacks when the game
// supplies them, central finite differences otherwise. The FD step is
// h = max(1e-6, 1e-7 * (1 + |z|_inf)) per evaluation point. With
// DerivativeOrder::First the cost Hessians are left empty.
GameDerivatives evaluate_derivatives(const GameDefinition& game, const Trajectory& traj,
                                     bool with_dynamics_curvature = false,
                                     DerivativeOrder order = DerivativeOrder::Second);

struct FdAuditBlock {
  std::string name;  // e.g. "cost_grad", "A", "cost_hess", "terminal_grad"
  int stage;         // 1..K, or K+1 for terminal blocks
  double max_rel_error;
};

struct FdAuditReport {
  std::vector<FdAuditBlock> blocks;
  double max_rel_error = 0.0;
  double rel_tol = 0.0;
  bool pass = false;
  const FdAuditBlock* worst() const;
};

// Compares the supplied analytic derivative set against central finite
// differences of the game's evaluators. Relative error is elementwise
// |a - fd| / (1 + |a|), maximized per block.
FdAuditReport finite_difference_audit(const GameDefinition& game, const Trajectory& traj,
                                      const GameDerivatives& analytic, double rel_tol);

// Hessian over z = (x_t, u1_t, u2_t) of agent i's stage Lagrangian
// sigma_i * l_t + lambda^T f_t with sigma_1 = +1, sigma_2 = -1. The next state
// enters the Lagrangian linearly and feedback-policy terms are affine in this
// library, so neither contributes curvature; `psi` is accepted for interface
// completeness and only checked for dimension.
Matrix stage_lagrangian_hessian(int agent, const StageDerivatives& sd, const Vector& lambda,
                                const std::optional<Vector>& psi,
                                bool include_dynamics_curvature);

}  // namespace zsg
