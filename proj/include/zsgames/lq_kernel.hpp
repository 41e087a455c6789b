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

#include <vector>

#include "zsgames/game.hpp"

namespace zsg {

// One stage of a zero-sum linear-quadratic game:
//   x' = A x + B1 u1 + B2 u2 + c,
// agent-1 cost 0.5 z^T H z + g^T z + constant over z = (x, u1, u2); agent 2's
// cost is the negation.
struct LqStage {
  Matrix A, B1, B2;
  Vector c;
  Matrix H;
  Vector g;
  double constant = 0.0;

  int n() const { return static_cast<int>(A.rows()); }
  int m1() const { return static_cast<int>(B1.cols()); }
  int m2() const { return static_cast<int>(B2.cols()); }
};

// Agent-1 value quadratic 0.5 x^T V2 x + V1^T x + v0; agent 2's value is the
// negation.
struct ValueQuadratic {
  Matrix V2;
  Vector V1;
  double v0 = 0.0;
  int stage = 0;

  double operator()(const Vector& x) const { return 0.5 * x.dot(V2 * x) + V1.dot(x) + v0; }
};

struct LqStageDiagnostics {
  int stage = 0;
  double min_eig_u1u1 = 0.0;  // smallest eigenvalue of Z_{u1 u1}; saddle needs > 0
  double max_eig_u2u2 = 0.0;  // largest eigenvalue of Z_{u2 u2}; saddle needs < 0
  double condition = 0.0;     // condition number of the stacked stationarity matrix
  double regularization = 0.0;  // curvature shift applied at this stage (0 when exact)
  bool saddle_ok() const { return min_eig_u1u1 > 0.0 && max_eig_u2u2 < 0.0; }
};

struct LqFeedbackOptions {
  double cond_max = 1e12;
  // When enabled, the control-value curvature blocks are shifted
  // (Z_{u1u1} += s I, Z_{u2u2} -= s I) with s doubling from reg_initial until
  // the saddle signs clear curvature_margin, capped at reg_cap. Disabled by
  // default: the kernel is exact and only reports the signs.
  bool regularize = false;
  double reg_initial = 1e-6;
  double reg_cap = 1e6;
  double curvature_margin = 0.0;
};

struct LqFeedbackSolution {
  AffinePolicySet policy1, policy2;  // anchored at x_ref = 0
  std::vector<ValueQuadratic> values;  // size K+1, values[t-1] = V_t; last is terminal
  std::vector<LqStageDiagnostics> diagnostics;  // size K
  bool saddle_ok = true;  // all stages had correct curvature signs without shifts
};

// Backward control-value recursion: from the terminal quadratic, forms each
// stage's control-value quadratic Z_t, solves the coupled stationarity system
// (agent 1's gradient of Z and agent 2's gradient of -Z both zero) as one
// stacked (m1+m2) square solve, and substitutes the affine policies back to
// get V_t. Throws SaddleSingularError when the stacked matrix's condition
// exceeds cond_max.
LqFeedbackSolution solve_lq_feedback(const std::vector<LqStage>& stages,
                                     const ValueQuadratic& terminal,
                                     const LqFeedbackOptions& opts = {});

struct LqOpenLoopSolution {
  Trajectory trajectory;
  std::vector<Vector> lambda1, lambda2;  // costates, size K
  double kkt_residual = 0.0;             // infinity norm, after back-substitution
};

// One-shot solve of the stacked open-loop KKT system of the LQ game. The
// system is assembled explicitly as a dense block-banded matrix and solved by
// direct factorization; fine at desk scale (K up to a few hundred).
// Throws OpenLoopSingularError when the factorization is unreliable.
LqOpenLoopSolution solve_lq_openloop(const std::vector<LqStage>& stages,
                                     const ValueQuadratic& terminal, const Vector& x1,
                                     double cond_max = 1e12);

}  // namespace zsg
