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

#include <utility>

#include "zsgames/derivatives.hpp"
#include "zsgames/game.hpp"
#include "zsgames/solver_types.hpp"

namespace zsg {

// Stacked first-order system of the open-loop game.
//
// Residual rows are stage-major, agent 1 before agent 2, dynamics last within
// each stage, terminal rows at the end:
//   stage 1:      [c1 (m1), c2 (m2), dyn (n)]
//   stage t >= 2: [ss1 (n), ss2 (n), c1 (m1), c2 (m2), dyn (n)]
//   final:        [term1 (n), term2 (n)]
// where ss_i is state stationarity grad_x l^i + A^T lambda^i_t - lambda^i_{t-1},
// c_i is control stationarity grad_{u^i} l^i + B_i^T lambda^i_t, dyn is the
// defect x_{t+1} - f_t, and term_i is grad l^i_{K+1} - lambda^i_K. Agent 2's
// cost is the negation of agent 1's and both costates are kept independent, so
// lambda^2 = -lambda^1 is a measurable property rather than an assumption.
//
// Unknowns are stage-major as well, stage t block: [u1_t, u2_t, l1_t, l2_t,
// x_{t+1}], which keeps the Jacobian block-banded with bandwidth independent
// of K.
struct OlStackLayout {
  int K = 0, n = 0, m1 = 0, m2 = 0;

  int stage_block() const { return m1 + m2 + 3 * n; }
  int total() const { return K * stage_block(); }
  int iu1(int t) const { return (t - 1) * stage_block(); }
  int iu2(int t) const { return (t - 1) * stage_block() + m1; }
  int il1(int t) const { return (t - 1) * stage_block() + m1 + m2; }
  int il2(int t) const { return (t - 1) * stage_block() + m1 + m2 + n; }
  int ix(int t) const { return (t - 2) * stage_block() + m1 + m2 + 2 * n; }  // x_t, t >= 2
  int row_base(int t) const { return (t == 1) ? 0 : (m1 + m2 + n) + (t - 2) * (3 * n + m1 + m2); }
  int terminal_row() const { return total() - 2 * n; }
};

OlStackLayout ol_layout(const GameDefinition& game);

Vector assemble_ol_residual(const GameDefinition& game, const Trajectory& traj,
                            const MultiplierSet& multipliers);
// Same, reusing derivatives already evaluated along traj (first order suffices).
Vector assemble_ol_residual(const GameDefinition& game, const GameDerivatives& derivs,
                            const Trajectory& traj, const MultiplierSet& multipliers);

Matrix assemble_ol_jacobian(const GameDefinition& game, const Trajectory& traj,
                            const MultiplierSet& multipliers,
                            bool include_dynamics_curvature = false);
Matrix assemble_ol_jacobian(const GameDefinition& game, const GameDerivatives& derivs,
                            const Trajectory& traj, const MultiplierSet& multipliers,
                            bool include_dynamics_curvature = false);

// Backward recursion lambda^i_K = grad l^i_{K+1},
// lambda^i_{t-1} = grad_x l^i_t + A_t^T lambda^i_t. The terminal and state
// stationarity rows vanish by construction; the control rows are then the
// meaningful optimality measure.
std::pair<std::vector<Vector>, std::vector<Vector>> recover_ol_costates(
    const GameDefinition& game, const Trajectory& traj);

struct OlneSolution {
  Trajectory trajectory;
  MultiplierSet multipliers;
  SolveLog log;
};

// Damped Newton on the stacked system with Levenberg regularization and
// backtracking line search on the residual infinity norm.
OlneSolution solve_olne(const GameDefinition& game, const Trajectory& initial,
                        const SolveOptions& opts = {});
// Default initialization: zero controls, rollout, costates from
// recover_ol_costates.
OlneSolution solve_olne(const GameDefinition& game, const SolveOptions& opts = {});

}  // namespace zsg
