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
#include <vector>

#include "zsgames/types.hpp"

namespace zsg {

// Lagrange multipliers attached to a trajectory. Costates lambda^i_t exist for
// t in [1, K]. Feedback-policy multipliers psi^i_s exist for s in [2, K] only
// (psi1 entries live in R^{m2}, psi2 in R^{m1}); they are empty for open-loop
// solutions. Bound multipliers are present only for box-constrained games and
// are nonnegative elementwise at a valid solution.
struct MultiplierSet {
  std::vector<Vector> lambda1, lambda2;  // size K, index t-1
  std::vector<Vector> psi1, psi2;        // size K-1, index s-2 (empty if not FB)
  std::vector<Vector> nu_lower1, nu_upper1;  // size K when present
  std::vector<Vector> nu_lower2, nu_upper2;

  bool has_psi() const { return !psi1.empty() || !psi2.empty(); }
  bool has_bound_multipliers() const { return !nu_lower1.empty(); }

  const Vector& lambda(int agent, int t) const {
    return agent == 1 ? lambda1[t - 1] : lambda2[t - 1];
  }
  // s in [2, K]
  const Vector& psi(int agent, int s) const { return agent == 1 ? psi1[s - 2] : psi2[s - 2]; }
  const Vector& nu_lower(int agent, int t) const {
    return agent == 1 ? nu_lower1[t - 1] : nu_lower2[t - 1];
  }
  const Vector& nu_upper(int agent, int t) const {
    return agent == 1 ? nu_upper1[t - 1] : nu_upper2[t - 1];
  }

  double max_lambda_negation() const {
    double v = 0.0;
    for (size_t k = 0; k < lambda1.size(); ++k)
      v = std::max(v, (lambda1[k] + lambda2[k]).lpNorm<Eigen::Infinity>());
    return v;
  }
  double max_psi_norm() const {
    double v = 0.0;
    for (const auto& p : psi1) v = std::max(v, p.lpNorm<Eigen::Infinity>());
    for (const auto& p : psi2) v = std::max(v, p.lpNorm<Eigen::Infinity>());
    return v;
  }
};

struct SolveOptions {
  int max_iters = 100;
  double residual_tol = 1e-8;
  double step_tol = 1e-10;
  double levenberg_initial = 0.0;
  double levenberg_entry = 1e-6;  // used on the first failed step when the current value is 0
  double levenberg_growth = 10.0;
  double levenberg_max = 1e6;
  double levenberg_shrink = 0.2;
  double line_search_shrink = 0.5;
  double line_search_min_step = 1e-6;
};

enum class SolveStatus {
  Converged,          // residual below residual_tol
  ConvergedStepTol,   // iterate change below step_tol (feedback solver)
  MaxIters,
  LineSearchStall,
  SingularNewtonStep,
  ComplementarityStall,  // smoothing floor reached with residual above tolerance
};

inline const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::ConvergedStepTol: return "converged_step_tol";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::LineSearchStall: return "line_search_stall";
    case SolveStatus::SingularNewtonStep: return "singular_newton_step";
    case SolveStatus::ComplementarityStall: return "complementarity_stall";
  }
  return "unknown";
}

struct SolveIteration {
  int iter = 0;
  double residual = 0.0;
  double step_norm = 0.0;
  double regularization = 0.0;
  int line_search_steps = 0;
  double smoothing = 0.0;  // complementarity smoothing parameter, constrained solves only
};

struct SolveLog {
  std::vector<SolveIteration> iterations;
  SolveStatus status = SolveStatus::MaxIters;
  bool converged = false;
  double final_residual = 0.0;
  std::string message;
};

}  // namespace zsg
