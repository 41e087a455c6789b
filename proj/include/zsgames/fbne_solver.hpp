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

#include "zsgames/game.hpp"
#include "zsgames/lq_kernel.hpp"
#include "zsgames/solver_types.hpp"

namespace zsg {

struct FbneOptions {
  SolveOptions base;
  // Curvature regularization for stages whose control-value blocks have the
  // wrong saddle signs: symmetric shift doubling from reg_initial, capped.
  double reg_initial = 1e-6;
  double reg_cap = 1e6;
  double curvature_margin = 0.0;
};

struct FbneSolution {
  AffinePolicySet policy1, policy2;  // anchored at the returned trajectory
  Trajectory trajectory;
  SolveLog log;
  std::vector<LqStageDiagnostics> last_diagnostics;
};

// Iterative LQ approximation: rollout, linearize/quadraticize, solve the LQ
// feedback saddle, backtrack the policy offset update on the bilateral
// best-response criterion (agent 1's cost must not increase along its own
// update with agent 2 held, and symmetrically), re-anchor at the new rollout.
// Convergence is declared on the feedback first-order residual or on policy
// change below step_tol.
FbneSolution solve_fbne_ilq(const GameDefinition& game, const AffinePolicySet& initial1,
                            const AffinePolicySet& initial2, const FbneOptions& opts = {});
FbneSolution solve_fbne_ilq(const GameDefinition& game, const FbneOptions& opts = {});

// Backward multiplier recovery at a closed-loop trajectory of the given
// policies: lambda^i_K from the terminal condition, psi^i_s from the
// cross-control stationarity rows, lambda^i_{s-1} from the state rows. Own
// control stationarity is then the meaningful residual. Throws InputError if
// the trajectory is not the closed-loop rollout of the policies.
MultiplierSet recover_fb_multipliers(const GameDefinition& game, const Trajectory& traj,
                                     const AffinePolicySet& policies1,
                                     const AffinePolicySet& policies2);

}  // namespace zsg
