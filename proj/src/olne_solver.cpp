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

#include "zsgames/olne_solver.hpp"

#include <cmath>

namespace zsg {

OlStackLayout ol_layout(const GameDefinition& game) {
  return OlStackLayout{game.horizon, game.state_dim, game.control_dims[0],
                       game.control_dims[1]};
}

namespace {

void check_multipliers(const GameDefinition& game, const MultiplierSet& m) {
  if (static_cast<int>(m.lambda1.size()) != game.horizon ||
      static_cast<int>(m.lambda2.size()) != game.horizon)
    throw InputError("multiplier set must carry both agents' costates for all stages");
  for (int t = 1; t <= game.horizon; ++t)
    if (m.lambda1[t - 1].size() != game.state_dim || m.lambda2[t - 1].size() != game.state_dim)
      throw InputError("costate dimension mismatch at stage " + std::to_string(t));
}

}  // namespace

Vector assemble_ol_residual(const GameDefinition& game, const GameDerivatives& derivs,
                            const Trajectory& traj, const MultiplierSet& m) {
  check_multipliers(game, m);
  const OlStackLayout L = ol_layout(game);
  Vector r = Vector::Zero(L.total());

  for (int t = 1; t <= L.K; ++t) {
    const StageDerivatives& sd = derivs.at(t);
    int row = L.row_base(t);
    if (t >= 2) {
      r.segment(row, L.n) =
          sd.grad_x() + sd.A.transpose() * m.lambda1[t - 1] - m.lambda1[t - 2];
      row += L.n;
      r.segment(row, L.n) =
          -sd.grad_x() + sd.A.transpose() * m.lambda2[t - 1] - m.lambda2[t - 2];
      row += L.n;
    }
    r.segment(row, L.m1) = sd.grad_u1() + sd.B1.transpose() * m.lambda1[t - 1];
    row += L.m1;
    r.segment(row, L.m2) = -sd.grad_u2() + sd.B2.transpose() * m.lambda2[t - 1];
    row += L.m2;
    r.segment(row, L.n) = traj.x(t + 1) - game.dynamics(t, traj.x(t), traj.u1(t), traj.u2(t));
  }
  int row = L.terminal_row();
  r.segment(row, L.n) = derivs.terminal.grad - m.lambda1[L.K - 1];
  r.segment(row + L.n, L.n) = -derivs.terminal.grad - m.lambda2[L.K - 1];
  return r;
}

Vector assemble_ol_residual(const GameDefinition& game, const Trajectory& traj,
                            const MultiplierSet& m) {
  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);
  return assemble_ol_residual(game, derivs, traj, m);
}

Matrix assemble_ol_jacobian(const GameDefinition& game, const GameDerivatives& derivs,
                            const Trajectory& traj, const MultiplierSet& m,
                            bool include_dynamics_curvature) {
  check_multipliers(game, m);
  (void)traj;
  const OlStackLayout L = ol_layout(game);
  const int n = L.n, m1 = L.m1, m2 = L.m2;
  Matrix J = Matrix::Zero(L.total(), L.total());
  const Matrix In = Matrix::Identity(n, n);

  for (int t = 1; t <= L.K; ++t) {
    const StageDerivatives& sd = derivs.at(t);
    const Matrix& H = sd.cost_hess;
    // Lagrangian curvature over z for each agent (cost sign folded in).
    Matrix W1 = H, W2 = -H;
    if (include_dynamics_curvature) {
      W1 += sd.curvature_contraction(m.lambda1[t - 1]);
      W2 += sd.curvature_contraction(m.lambda2[t - 1]);
    }
    auto blk = [&](const Matrix& W, int r0, int c0, int rows, int cols) -> Matrix {
      return W.block(r0, c0, rows, cols);
    };

    int row = L.row_base(t);
    if (t >= 2) {
      // State stationarity, agent 1 then agent 2.
      J.block(row, L.ix(t), n, n) = blk(W1, 0, 0, n, n);
      J.block(row, L.iu1(t), n, m1) = blk(W1, 0, n, n, m1);
      J.block(row, L.iu2(t), n, m2) = blk(W1, 0, n + m1, n, m2);
      J.block(row, L.il1(t), n, n) = sd.A.transpose();
      J.block(row, L.il1(t - 1), n, n) = -In;
      row += n;
      J.block(row, L.ix(t), n, n) = blk(W2, 0, 0, n, n);
      J.block(row, L.iu1(t), n, m1) = blk(W2, 0, n, n, m1);
      J.block(row, L.iu2(t), n, m2) = blk(W2, 0, n + m1, n, m2);
      J.block(row, L.il2(t), n, n) = sd.A.transpose();
      J.block(row, L.il2(t - 1), n, n) = -In;
      row += n;
    }
    // Control stationarity.
    if (t >= 2) J.block(row, L.ix(t), m1, n) = blk(W1, n, 0, m1, n);
    J.block(row, L.iu1(t), m1, m1) = blk(W1, n, n, m1, m1);
    J.block(row, L.iu2(t), m1, m2) = blk(W1, n, n + m1, m1, m2);
    J.block(row, L.il1(t), m1, n) = sd.B1.transpose();
    row += m1;
    if (t >= 2) J.block(row, L.ix(t), m2, n) = blk(W2, n + m1, 0, m2, n);
    J.block(row, L.iu1(t), m2, m1) = blk(W2, n + m1, n, m2, m1);
    J.block(row, L.iu2(t), m2, m2) = blk(W2, n + m1, n + m1, m2, m2);
    J.block(row, L.il2(t), m2, n) = sd.B2.transpose();
    row += m2;
    // Dynamics defect.
    J.block(row, L.ix(t + 1), n, n) = In;
    if (t >= 2) J.block(row, L.ix(t), n, n) = -sd.A;
    J.block(row, L.iu1(t), n, m1) = -sd.B1;
    J.block(row, L.iu2(t), n, m2) = -sd.B2;
  }
  int row = L.terminal_row();
  J.block(row, L.ix(L.K + 1), n, n) = derivs.terminal.hess;
  J.block(row, L.il1(L.K), n, n) = -In;
  row += n;
  J.block(row, L.ix(L.K + 1), n, n) = -derivs.terminal.hess;
  J.block(row, L.il2(L.K), n, n) = -In;
  return J;
}

Matrix assemble_ol_jacobian(const GameDefinition& game, const Trajectory& traj,
                            const MultiplierSet& m, bool include_dynamics_curvature) {
  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, include_dynamics_curvature, DerivativeOrder::Second);
  return assemble_ol_jacobian(game, derivs, traj, m, include_dynamics_curvature);
}

std::pair<std::vector<Vector>, std::vector<Vector>> recover_ol_costates(
    const GameDefinition& game, const Trajectory& traj) {
  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);
  const int K = game.horizon;
  std::vector<Vector> l1(K), l2(K);
  l1[K - 1] = derivs.terminal.grad;
  l2[K - 1] = -derivs.terminal.grad;
  for (int t = K; t >= 2; --t) {
    const StageDerivatives& sd = derivs.at(t);
    l1[t - 2] = sd.grad_x() + sd.A.transpose() * l1[t - 1];
    l2[t - 2] = -sd.grad_x() + sd.A.transpose() * l2[t - 1];
  }
  return {std::move(l1), std::move(l2)};
}

namespace {

struct OlIterate {
  Trajectory traj;
  MultiplierSet mult;
};

void apply_step(const OlStackLayout& L, OlIterate& it, const Vector& dz, double alpha) {
  for (int t = 1; t <= L.K; ++t) {
    it.traj.u1(t) += alpha * dz.segment(L.iu1(t), L.m1);
    it.traj.u2(t) += alpha * dz.segment(L.iu2(t), L.m2);
    it.mult.lambda1[t - 1] += alpha * dz.segment(L.il1(t), L.n);
    it.mult.lambda2[t - 1] += alpha * dz.segment(L.il2(t), L.n);
    it.traj.x(t + 1) += alpha * dz.segment(L.ix(t + 1), L.n);
  }
}

}  // namespace

OlneSolution solve_olne(const GameDefinition& game, const Trajectory& initial,
                        const SolveOptions& opts) {
  game.validate();
  const OlStackLayout L = ol_layout(game);

  OlIterate it;
  it.traj = initial;
  auto [l1, l2] = recover_ol_costates(game, initial);
  it.mult.lambda1 = std::move(l1);
  it.mult.lambda2 = std::move(l2);

  OlneSolution sol;
  SolveLog& log = sol.log;
  double reg = opts.levenberg_initial;

  Vector r = assemble_ol_residual(game, it.traj, it.mult);
  double rnorm = r.lpNorm<Eigen::Infinity>();

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    if (rnorm <= opts.residual_tol) {
      // Re-roll the controls so the returned trajectory is exactly dynamics
      // consistent; accept if the residual still meets the tolerance there.
      Trajectory rolled = rollout(game, it.traj.controls1, it.traj.controls2);
      const Vector r2 = assemble_ol_residual(game, rolled, it.mult);
      const double rnorm2 = r2.lpNorm<Eigen::Infinity>();
      if (rnorm2 <= opts.residual_tol) {
        it.traj = rolled;
        rnorm = rnorm2;
        log.status = SolveStatus::Converged;
        log.converged = true;
        break;
      }
      it.traj = rolled;
      r = r2;
      rnorm = rnorm2;
    }

    const Matrix J = assemble_ol_jacobian(game, it.traj, it.mult,
                                          /*include_dynamics_curvature=*/false);

    bool stepped = false;
    SolveIteration rec;
    rec.iter = iter;
    rec.residual = rnorm;

    while (!stepped) {
      Vector dz;
      bool solve_ok = false;
      if (reg == 0.0) {
        Eigen::PartialPivLU<Matrix> lu(J);
        dz = lu.solve(-r);
        solve_ok = dz.allFinite() &&
                   (J * dz + r).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + rnorm);
      } else {
        const Matrix JtJ =
            J.transpose() * J + reg * Matrix::Identity(L.total(), L.total());
        dz = Eigen::LDLT<Matrix>(JtJ).solve(-J.transpose() * r);
        solve_ok = dz.allFinite();
      }

      if (!solve_ok) {
        if (reg >= opts.levenberg_max) {
          log.status = SolveStatus::SingularNewtonStep;
          log.message = "Newton step singular at regularization cap";
          log.final_residual = rnorm;
          sol.trajectory = it.traj;
          sol.multipliers = it.mult;
          log.iterations.push_back(rec);
          return sol;
        }
        reg = (reg == 0.0) ? opts.levenberg_entry : reg * opts.levenberg_growth;
        reg = std::min(reg, opts.levenberg_max);
        continue;
      }

      double alpha = 1.0;
      int ls_steps = 0;
      OlIterate trial;
      while (alpha >= opts.line_search_min_step) {
        trial = it;
        apply_step(L, trial, dz, alpha);
        const Vector rt = assemble_ol_residual(game, trial.traj, trial.mult);
        const double rtnorm = rt.lpNorm<Eigen::Infinity>();
        ++ls_steps;
        if (rt.allFinite() && rtnorm <= (1.0 - 1e-4 * alpha) * rnorm) {
          it = std::move(trial);
          r = rt;
          rnorm = rtnorm;
          rec.step_norm = alpha * dz.lpNorm<Eigen::Infinity>();
          rec.regularization = reg;
          rec.line_search_steps = ls_steps;
          reg *= opts.levenberg_shrink;
          if (reg < 1e-14) reg = 0.0;
          stepped = true;
          break;
        }
        alpha *= opts.line_search_shrink;
      }
      if (!stepped) {
        if (reg >= opts.levenberg_max) {
          log.status = SolveStatus::LineSearchStall;
          log.message = "line search stalled at regularization cap";
          log.final_residual = rnorm;
          log.iterations.push_back(rec);
          sol.trajectory = it.traj;
          sol.multipliers = it.mult;
          return sol;
        }
        reg = (reg == 0.0) ? opts.levenberg_entry : reg * opts.levenberg_growth;
        reg = std::min(reg, opts.levenberg_max);
      }
    }
    log.iterations.push_back(rec);
  }

  if (!log.converged && rnorm <= opts.residual_tol) {
    Trajectory rolled = rollout(game, it.traj.controls1, it.traj.controls2);
    const Vector r2 = assemble_ol_residual(game, rolled, it.mult);
    if (r2.lpNorm<Eigen::Infinity>() <= opts.residual_tol) {
      it.traj = rolled;
      rnorm = r2.lpNorm<Eigen::Infinity>();
      log.status = SolveStatus::Converged;
      log.converged = true;
    }
  }
  if (!log.converged) {
    log.status = SolveStatus::MaxIters;
    log.message = "maximum iterations reached";
  }
  log.final_residual = rnorm;
  sol.trajectory = it.traj;
  sol.multipliers = it.mult;
  return sol;
}

OlneSolution solve_olne(const GameDefinition& game, const SolveOptions& opts) {
  return solve_olne(game, rollout_zero(game), opts);
}

}  // namespace zsg
