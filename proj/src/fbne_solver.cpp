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

#include "zsgames/fbne_solver.hpp"

#include <cmath>

#include "zsgames/derivatives.hpp"
#include "zsgames/equilibrium_verify.hpp"

namespace zsg {

MultiplierSet recover_fb_multipliers(const GameDefinition& game, const Trajectory& traj,
                                     const AffinePolicySet& policies1,
                                     const AffinePolicySet& policies2) {
  const int K = game.horizon;
  if (policies1.horizon() != K || policies2.horizon() != K || traj.horizon() != K)
    throw InputError("recover_fb_multipliers: horizon mismatch");
  for (int t = 1; t <= K; ++t) {
    const double gap1 = (policies1.at(t)(traj.x(t)) - traj.u1(t)).lpNorm<Eigen::Infinity>();
    const double gap2 = (policies2.at(t)(traj.x(t)) - traj.u2(t)).lpNorm<Eigen::Infinity>();
    if (gap1 > kDynTol || gap2 > kDynTol)
      throw InputError("recover_fb_multipliers: trajectory is not the closed-loop rollout of "
                       "the policies at stage " + std::to_string(t));
  }
  if (!dynamically_consistent(game, traj))
    throw InputError("recover_fb_multipliers: trajectory violates the dynamics");

  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);

  MultiplierSet m;
  m.lambda1.resize(K);
  m.lambda2.resize(K);
  if (K >= 2) {
    m.psi1.resize(K - 1);
    m.psi2.resize(K - 1);
  }
  m.lambda1[K - 1] = derivs.terminal.grad;
  m.lambda2[K - 1] = -derivs.terminal.grad;

  for (int s = K; s >= 2; --s) {
    const StageDerivatives& sd = derivs.at(s);
    // Cross-control stationarity determines psi, then the state row steps the
    // costate backward through the opponent's policy gradient.
    m.psi1[s - 2] = sd.grad_u2() + sd.B2.transpose() * m.lambda1[s - 1];
    m.psi2[s - 2] = -sd.grad_u1() + sd.B1.transpose() * m.lambda2[s - 1];
    m.lambda1[s - 2] = sd.grad_x() + sd.A.transpose() * m.lambda1[s - 1] +
                       policies2.at(s).gain.transpose() * m.psi1[s - 2];
    m.lambda2[s - 2] = -sd.grad_x() + sd.A.transpose() * m.lambda2[s - 1] +
                       policies1.at(s).gain.transpose() * m.psi2[s - 2];
  }
  return m;
}

namespace {

double fb_residual_norm(const GameDefinition& game, const Trajectory& traj,
                        const AffinePolicySet& p1, const AffinePolicySet& p2) {
  const KktResidualReport rep = fb_first_order_report(game, traj, p1, p2);
  return rep.families.max();
}

// Candidate policies for step length alpha: gains from the LQ solve, offsets
// moved by alpha times the LQ offset, anchored at the current rollout.
AffinePolicySet candidate_policy(const AffinePolicySet& lq_policy, const Trajectory& anchor,
                                 int agent, double alpha) {
  AffinePolicySet out = lq_policy;
  const int K = anchor.horizon();
  for (int t = 1; t <= K; ++t) {
    AffinePolicy& p = out.at(t);
    const Vector& u_star = anchor.u(agent, t);
    p.u_ref = u_star + alpha * lq_policy.at(t).u_ref;
    p.x_ref = anchor.x(t);
  }
  return out;
}

double policy_change(const AffinePolicySet& a, const AffinePolicySet& b) {
  double v = 0.0;
  for (int t = 1; t <= a.horizon(); ++t) {
    v = std::max(v, (a.at(t).gain - b.at(t).gain).lpNorm<Eigen::Infinity>());
    v = std::max(v, (a.at(t)(b.at(t).x_ref) - b.at(t).u_ref).lpNorm<Eigen::Infinity>());
  }
  return v;
}

}  // namespace

FbneSolution solve_fbne_ilq(const GameDefinition& game, const AffinePolicySet& initial1,
                            const AffinePolicySet& initial2, const FbneOptions& opts) {
  game.validate();
  if (initial1.horizon() != game.horizon || initial2.horizon() != game.horizon)
    throw InputError("solve_fbne_ilq: initial policies must cover all stages");
  const int K = game.horizon;
  const int n = game.state_dim;

  FbneSolution sol;
  sol.policy1 = initial1;
  sol.policy2 = initial2;
  sol.trajectory = rollout_policy(game, sol.policy1, sol.policy2);
  // Anchor at the initial rollout so the residual and updates are consistent.
  for (int t = 1; t <= K; ++t) {
    sol.policy1.at(t).u_ref = sol.trajectory.u1(t);
    sol.policy1.at(t).x_ref = sol.trajectory.x(t);
    sol.policy2.at(t).u_ref = sol.trajectory.u2(t);
    sol.policy2.at(t).x_ref = sol.trajectory.x(t);
  }

  SolveLog& log = sol.log;
  const SolveOptions& base = opts.base;

  LqFeedbackOptions lq_opts;
  lq_opts.regularize = true;
  lq_opts.reg_initial = opts.reg_initial;
  lq_opts.reg_cap = opts.reg_cap;
  lq_opts.curvature_margin = opts.curvature_margin;

  double residual = fb_residual_norm(game, sol.trajectory, sol.policy1, sol.policy2);

  for (int iter = 1; iter <= base.max_iters; ++iter) {
    if (residual <= base.residual_tol) {
      log.status = SolveStatus::Converged;
      log.converged = true;
      break;
    }

    const GameDerivatives derivs = evaluate_derivatives(game, sol.trajectory,
                                                        /*with_dynamics_curvature=*/false,
                                                        DerivativeOrder::Second);
    // LQ model in deviation variables around the rollout; the drift is zero
    // because the rollout satisfies the dynamics exactly.
    std::vector<LqStage> stages(K);
    for (int t = 1; t <= K; ++t) {
      const StageDerivatives& sd = derivs.at(t);
      LqStage& s = stages[t - 1];
      s.A = sd.A;
      s.B1 = sd.B1;
      s.B2 = sd.B2;
      s.c = Vector::Zero(n);
      s.H = sd.cost_hess;
      s.g = sd.cost_grad;
    }
    ValueQuadratic terminal;
    terminal.V2 = derivs.terminal.hess;
    terminal.V1 = derivs.terminal.grad;
    terminal.stage = K + 1;

    LqFeedbackSolution lq;
    try {
      lq = solve_lq_feedback(stages, terminal, lq_opts);
    } catch (const SaddleSingularError&) {
      log.status = SolveStatus::SingularNewtonStep;
      log.message = "stage saddle singular";
      break;
    }
    sol.last_diagnostics = lq.diagnostics;

    // Model-scale slack for the bilateral acceptance test: the LQ offsets are
    // a joint saddle step, so each agent's unilateral rollout may drift by the
    // coupling term even for a perfect model.
    double model_scale = 0.0;
    for (int t = 1; t <= K; ++t) {
      const Vector& k1 = lq.policy1.at(t).u_ref;
      const Vector& k2 = lq.policy2.at(t).u_ref;
      const Matrix& H = stages[t - 1].H;
      const int m1 = game.control_dims[0], m2 = game.control_dims[1];
      model_scale += std::abs(k1.dot(H.block(n, n, m1, m1) * k1)) +
                     std::abs(k2.dot(H.block(n + m1, n + m1, m2, m2) * k2)) +
                     2.0 * std::abs(k1.dot(H.block(n, n + m1, m1, m2) * k2));
    }

    const double J_base = total_cost(game, sol.trajectory);
    const double floor_slack = 1e-10 * (1.0 + std::abs(J_base));

    SolveIteration rec;
    rec.iter = iter;
    rec.residual = residual;
    rec.regularization = 0.0;
    for (const auto& d : lq.diagnostics)
      rec.regularization = std::max(rec.regularization, d.regularization);

    bool accepted = false;
    double alpha = 1.0;
    AffinePolicySet cand1, cand2;
    for (int step = 0; step <= 20; ++step, alpha *= 0.5) {
      cand1 = candidate_policy(lq.policy1, sol.trajectory, 1, alpha);
      cand2 = candidate_policy(lq.policy2, sol.trajectory, 2, alpha);
      const double slack = floor_slack + alpha * alpha * model_scale;
      const double J1 = total_cost(game, rollout_policy(game, cand1, sol.policy2));
      const double J2 = total_cost(game, rollout_policy(game, sol.policy1, cand2));
      ++rec.line_search_steps;
      if (std::isfinite(J1) && std::isfinite(J2) && J1 <= J_base + slack &&
          J2 >= J_base - slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Take the smallest step anyway and flag the iteration.
      alpha = std::pow(0.5, 20);
      cand1 = candidate_policy(lq.policy1, sol.trajectory, 1, alpha);
      cand2 = candidate_policy(lq.policy2, sol.trajectory, 2, alpha);
      log.message = "line search exhausted at iteration " + std::to_string(iter);
    }

    Trajectory next = rollout_policy(game, cand1, cand2);
    // Re-anchor at the new rollout; the anchor lies on the policy graph so the
    // affine maps are unchanged as functions.
    AffinePolicySet new1 = cand1, new2 = cand2;
    for (int t = 1; t <= K; ++t) {
      new1.at(t).u_ref = next.u1(t);
      new1.at(t).x_ref = next.x(t);
      new2.at(t).u_ref = next.u2(t);
      new2.at(t).x_ref = next.x(t);
    }

    const double change = std::max(policy_change(new1, sol.policy1),
                                   policy_change(new2, sol.policy2));
    rec.step_norm = change;

    sol.policy1 = std::move(new1);
    sol.policy2 = std::move(new2);
    sol.trajectory = std::move(next);
    residual = fb_residual_norm(game, sol.trajectory, sol.policy1, sol.policy2);
    log.iterations.push_back(rec);

    if (change <= base.step_tol) {
      if (residual <= base.residual_tol) {
        log.status = SolveStatus::Converged;
      } else {
        log.status = SolveStatus::ConvergedStepTol;
      }
      log.converged = true;
      break;
    }
  }

  if (!log.converged && residual <= opts.base.residual_tol) {
    log.status = SolveStatus::Converged;
    log.converged = true;
  }
  if (!log.converged && log.status == SolveStatus::MaxIters)
    log.message = "maximum iterations reached";
  log.final_residual = residual;
  return sol;
}

FbneSolution solve_fbne_ilq(const GameDefinition& game, const FbneOptions& opts) {
  return solve_fbne_ilq(game, zero_policies(game, 1), zero_policies(game, 2), opts);
}

}  // namespace zsg
