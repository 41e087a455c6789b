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
#include "zsgames/solver_types.hpp"

namespace zsg {

// Infinity norms per first-order equation family. Families that do not apply
// to a structure (cross-control and policy rows for open-loop reports,
// complementarity rows for unconstrained games) are left unset.
struct ResidualFamilies {
  double state_stationarity = 0.0;
  double own_control = 0.0;
  double terminal = 0.0;
  double dynamics = 0.0;
  std::optional<double> cross_control;
  std::optional<double> policy_constraint;
  std::optional<double> complementarity_lower;
  std::optional<double> complementarity_upper;
  std::optional<double> multiplier_negativity;

  double max() const;
  void merge(const ResidualFamilies& other);  // elementwise max
};

struct StageResidualBreakdown {
  int stage = 0;  // 1..K, K+1 carries the terminal rows
  ResidualFamilies families;
};

struct KktResidualReport {
  ResidualFamilies families;
  std::vector<StageResidualBreakdown> per_stage;
  double lambda_negation_max = 0.0;       // max_t |lambda^1_t + lambda^2_t|_inf
  std::optional<double> psi_max;          // feedback reports only
  double tolerance = 0.0;
  bool pass = false;
};

// Open-loop first-order residuals. Costates are recovered by backward
// recursion when not supplied. For box-constrained games, bound-multiplier
// terms and complementarity families are included (missing multipliers are
// treated as zero).
KktResidualReport ol_first_order_report(const GameDefinition& game, const Trajectory& traj,
                                        const std::optional<MultiplierSet>& multipliers = {},
                                        double tol = 1e-8);

// Feedback first-order residuals, including the cross-control rows, policy
// constraint rows and psi norms.
KktResidualReport fb_first_order_report(const GameDefinition& game, const Trajectory& traj,
                                        const AffinePolicySet& policies1,
                                        const AffinePolicySet& policies2,
                                        const std::optional<MultiplierSet>& multipliers = {},
                                        double tol = 1e-8);

// Basis of the critical cone, parameterized by the agent's own control
// directions (one column per stage and control coordinate, K*m_i in total).
// Coordinate layout of a column:
//   [d_u own, stages 1..K] [d_x, stages 2..K+1] [d_u opponent, stages 2..K]
// with the trailing opponent block present only for feedback cones. Open-loop
// columns hold the opponent's directions at zero and roll the state direction
// through the linearized dynamics from d_x1 = 0. Feedback columns do the same
// when the policy constraint is weakly active (|psi|_inf <= weak_active_tol, so
// the policy-response rows are dropped and the cone reduces to the open-loop
// one); otherwise the policy response d_u_opp = gain * d_x is kept and enters
// the rollout.
struct CriticalConeBasis {
  enum class Structure { OpenLoop, Feedback };
  Structure structure = Structure::OpenLoop;
  int agent = 1;
  int K = 0, n = 0, m_own = 0, m_opp = 0;
  bool policy_rows_dropped = false;  // feedback cones only
  Matrix basis;                      // layout_dim() x (K * m_own)
  double constraint_residual = 0.0;
  double min_singular_value = 0.0;   // of the column-normalized basis

  int off_own(int t) const { return (t - 1) * m_own; }
  int off_x(int t) const { return K * m_own + (t - 2) * n; }  // t in [2, K+1]
  int off_opp(int s) const { return K * m_own + K * n + (s - 2) * m_opp; }  // s in [2, K]
  int layout_dim() const {
    return K * m_own + K * n +
           ((structure == Structure::Feedback && K >= 2) ? (K - 1) * m_opp : 0);
  }
};

CriticalConeBasis build_critical_cone(const GameDefinition& game, const Trajectory& traj,
                                      CriticalConeBasis::Structure structure, int agent,
                                      const AffinePolicySet* policies1 = nullptr,
                                      const AffinePolicySet* policies2 = nullptr,
                                      double weak_active_tol = 1e-6,
                                      const std::optional<MultiplierSet>& multipliers = {});

struct SecondOrderReport {
  int agent = 1;
  CriticalConeBasis::Structure structure = CriticalConeBasis::Structure::OpenLoop;
  int cone_dim = 0;
  double min_eig = 0.0;
  double pd_tol = 0.0;
  enum class Classification { Sufficient, NecessaryOnly, Fails } classification =
      Classification::NecessaryOnly;
  Matrix projected;  // the projected Lagrangian Hessian over the basis
};

const char* to_string(SecondOrderReport::Classification c);

// Projects the agent's stage Lagrangian Hessians (dynamics curvature included
// by default) plus the terminal Hessian onto the cone basis and reports the
// smallest eigenvalue. pd_tol = pd_tol_scale * (1 + |projected|_2).
SecondOrderReport second_order_report(const GameDefinition& game, const Trajectory& traj,
                                      const MultiplierSet& multipliers,
                                      const CriticalConeBasis& cone, int agent,
                                      double pd_tol_scale = 1e-8,
                                      bool include_dynamics_curvature = true);

// Linearized feedback cone constraints used for the containment check.
struct FbConeConstraints {
  int agent = 1;
  int K = 0, n = 0, m_own = 0, m_opp = 0;
  std::vector<Matrix> A, B_own, B_opp;  // size K
  std::vector<Matrix> opp_gain;         // size K, gain of the opponent's policy
  bool policy_rows_active = false;
};

FbConeConstraints make_fb_cone_constraints(const GameDefinition& game, const Trajectory& traj,
                                           int agent, const AffinePolicySet& opponent_policy,
                                           bool policy_rows_active);

struct ConeContainment {
  bool contained = false;
  double max_lift_residual = 0.0;
};

// Lifts every open-loop basis column with zero opponent directions and
// evaluates the feedback cone constraints on it.
ConeContainment cone_containment_check(const CriticalConeBasis& ol_cone,
                                       const FbConeConstraints& fb, double tol);

struct Theorem1Tolerances {
  double fb_residual = 1e-6;   // audit precondition
  double ol_residual = 1e-4;
  double cascade = 1e-4;       // lambda negation and psi norms
  double weak_active = 1e-6;
  double containment = 1e-10;
  double pd_tol_scale = 1e-8;
};

enum class AuditVerdict { OlneCertified, NecessaryOnly, Inconsistent, Refused };
const char* to_string(AuditVerdict v);

struct Theorem1Audit {
  AuditVerdict verdict = AuditVerdict::Refused;
  std::string refusal_reason;
  KktResidualReport fb_report;
  KktResidualReport ol_report;
  double lambda_negation_max = 0.0;
  double psi_max = 0.0;
  bool cascade_pass = false;
  bool ol_first_order_pass = false;
  SecondOrderReport fb_second_order[2];  // per agent
  SecondOrderReport ol_second_order[2];
  ConeContainment containment[2];
  bool containment_pass = false;
};

// Audits a converged feedback equilibrium against the open-loop conditions:
// multiplier cascade, open-loop first-order residual at the same trajectory,
// both structures' projected second-order tests and the cone containment.
Theorem1Audit theorem1_audit(const GameDefinition& game, const AffinePolicySet& policies1,
                             const AffinePolicySet& policies2, const Trajectory& traj,
                             const Theorem1Tolerances& tol = {});

struct Theorem1ConverseTolerances {
  double ol_residual = 1e-8;  // audit precondition
  double fb_residual = 1e-6;
};

struct Theorem1ConverseAudit {
  bool refused = true;
  std::string refusal_reason;
  bool pass = false;
  KktResidualReport ol_report;
  KktResidualReport fb_report;
};

// Embeds an open-loop equilibrium as zero-gain policies with psi = 0 and
// checks the feedback first-order conditions.
Theorem1ConverseAudit theorem1_converse_audit(const GameDefinition& game, const Trajectory& traj,
                                              const std::optional<MultiplierSet>& multipliers = {},
                                              const Theorem1ConverseTolerances& tol = {});

}  // namespace zsg
