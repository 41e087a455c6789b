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

#include "zsgames/fbne_solver.hpp"
#include "zsgames/game.hpp"
#include "zsgames/olne_solver.hpp"
#include "zsgames/solver_types.hpp"

namespace zsg {

struct CoordinateStatus {
  enum class Kind { LowerActive, UpperActive, Inactive } kind = Kind::Inactive;
  bool strict = true;   // strictly complementary at this coordinate
  double slack = 0.0;   // distance to the nearest bound
  double multiplier = 0.0;  // multiplier attached to the active side (0 if inactive)
};

struct ActiveSetClassification {
  // statuses[agent-1][t-1][j]
  std::vector<std::vector<CoordinateStatus>> agent1, agent2;
  bool strict_complementarity = true;  // conjunction over all coordinates
  bool any_active = false;
  double act_tol = 1e-7;
  double strict_tol = 1e-7;

  const std::vector<CoordinateStatus>& stage(int agent, int t) const {
    return agent == 1 ? agent1[t - 1] : agent2[t - 1];
  }
};

ActiveSetClassification classify_active_set(const GameDefinition& game, const Trajectory& traj,
                                            const MultiplierSet& multipliers,
                                            double act_tol = 1e-7, double strict_tol = 1e-7);

struct ConstrainedOlneOptions {
  SolveOptions base;
  double mu_initial = 1e-2;
  double mu_shrink = 0.1;
  double mu_floor = 1e-12;
};

// Semismooth Newton on the open-loop KKT system with each complementarity
// pair replaced by the smoothed Fischer-Burmeister residual
// phi_mu(a, b) = a + b - sqrt(a^2 + b^2 + 2 mu), with mu driven from
// mu_initial to mu_floor by mu_shrink continuation. Success requires the
// unsmoothed residual below residual_tol and multipliers above -10 *
// residual_tol (then clipped to zero; the clip magnitude is logged).
OlneSolution solve_constrained_olne(const GameDefinition& game, const Trajectory& initial,
                                    const ConstrainedOlneOptions& opts = {});
OlneSolution solve_constrained_olne(const GameDefinition& game,
                                    const ConstrainedOlneOptions& opts = {});

struct ConstrainedFbneOptions {
  FbneOptions base;
  double extragradient_tol = 1e-10;  // stage fixed-point residual
  int extragradient_max_iters = 10000;
  double act_tol = 1e-7;
  double strict_tol = 1e-7;
};

// Iterative LQ with box-constrained stage saddles: each stage subproblem is
// solved by projected extragradient (step 1/L from the stacked curvature
// norm); coordinates at a bound are classified and the corresponding gain
// rows are exactly zero, with the remaining gains from the stationarity
// system restricted to the inactive coordinates.
FbneSolution solve_constrained_fbne(const GameDefinition& game,
                                    const ConstrainedFbneOptions& opts = {});
FbneSolution solve_constrained_fbne(const GameDefinition& game, const AffinePolicySet& initial1,
                                    const AffinePolicySet& initial2,
                                    const ConstrainedFbneOptions& opts = {});

// Multiplier recovery for box-constrained games. Costates (and psi, when
// policies are supplied) follow the unconstrained recursions; on bound-active
// coordinates the own-control stationarity row is solved for the single
// permitted bound multiplier. Sign-violating multipliers are stored as
// computed so the negativity shows up in residual reports; nothing is
// silently clipped. Throws DegenerateBoundError when a coordinate's bounds
// coincide within act_tol.
MultiplierSet recover_constrained_multipliers(const GameDefinition& game, const Trajectory& traj,
                                              const AffinePolicySet* policies1 = nullptr,
                                              const AffinePolicySet* policies2 = nullptr,
                                              double act_tol = 1e-7);

struct Theorem2Tolerances {
  double first_order = 1e-6;  // audit precondition on the supplied side
  double identity = 1e-6;     // psi vs bound-multiplier difference
  double annihilation = 1e-6;
  double cascade = 1e-6;
  double embedding = 1e-6;    // residual of the other side at the same point
  double act_tol = 1e-7;
  double strict_tol = 1e-7;
};

enum class Theorem2Verdict { Pass, Fail, NotApplicable, Refused };
const char* to_string(Theorem2Verdict v);

struct Theorem2Audit {
  Theorem2Verdict verdict = Theorem2Verdict::Refused;
  std::string detail;
  bool strict_complementarity = false;
  double psi_nu_identity_max = 0.0;   // max |psi^i_t - (nu_hi^{-i}_t - nu_lo^{-i}_t)|
  double annihilation_max = 0.0;      // max |(grad pi^{-i}_t)^T psi^i_t|
  double lambda_negation_max = 0.0;
  double other_side_residual = 0.0;   // constrained first-order residual of the other structure
  bool identity_pass = false, annihilation_pass = false, cascade_pass = false,
       embedding_pass = false;
};

// Feedback side: checks the psi/bound-multiplier identity, the gain-row
// annihilation, the costate negation cascade and the constrained open-loop
// residual at the feedback trajectory. Requires strict complementarity;
// otherwise the verdict is NotApplicable.
Theorem2Audit theorem2_audit(const GameDefinition& game, const AffinePolicySet& policies1,
                             const AffinePolicySet& policies2, const Trajectory& traj,
                             const Theorem2Tolerances& tol = {});

// Open-loop side: embeds the solution with zero gains and
// psi^i := nu_hi^{-i} - nu_lo^{-i}, then checks the constrained feedback
// first-order residual.
Theorem2Audit theorem2_audit(const GameDefinition& game, const Trajectory& traj,
                             const std::optional<MultiplierSet>& multipliers,
                             const Theorem2Tolerances& tol = {});

}  // namespace zsg
