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

#include "zsgames/constrained.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "zsgames/derivatives.hpp"
#include "zsgames/equilibrium_verify.hpp"

namespace zsg {

namespace {

double phi_mu(double p, double q, double mu) {
  return p + q - std::sqrt(p * p + q * q + 2.0 * mu);
}

// d phi / d p and d phi / d q. Smooth for mu > 0.
std::pair<double, double> phi_mu_grad(double p, double q, double mu) {
  const double rho = std::sqrt(p * p + q * q + 2.0 * mu);
  if (rho == 0.0) return {1.0, 1.0};  // mu = 0 at the kink; any subgradient works
  return {1.0 - p / rho, 1.0 - q / rho};
}

void require_bounds(const GameDefinition& game, const char* who) {
  if (!game.bounds) throw InputError(std::string(who) + ": game has no control bounds");
}

}  // namespace

ActiveSetClassification classify_active_set(const GameDefinition& game, const Trajectory& traj,
                                            const MultiplierSet& multipliers, double act_tol,
                                            double strict_tol) {
  require_bounds(game, "classify_active_set");
  const int K = game.horizon;
  ActiveSetClassification cls;
  cls.act_tol = act_tol;
  cls.strict_tol = strict_tol;
  cls.agent1.resize(K);
  cls.agent2.resize(K);

  for (int agent = 1; agent <= 2; ++agent) {
    auto& rows = (agent == 1) ? cls.agent1 : cls.agent2;
    const int mi = game.control_dim(agent);
    for (int t = 1; t <= K; ++t) {
      rows[t - 1].resize(mi);
      const StageBounds& sb = game.stage_bounds(agent, t);
      const Vector& u = traj.u(agent, t);
      const bool have_nu = multipliers.has_bound_multipliers();
      for (int j = 0; j < mi; ++j) {
        CoordinateStatus& st = rows[t - 1][j];
        const double slack_lo = u(j) - sb.lower(j);
        const double slack_hi = sb.upper(j) - u(j);
        const double nu_lo = have_nu ? multipliers.nu_lower(agent, t)(j) : 0.0;
        const double nu_hi = have_nu ? multipliers.nu_upper(agent, t)(j) : 0.0;
        if (slack_lo <= act_tol) {
          st.kind = CoordinateStatus::Kind::LowerActive;
          st.slack = slack_lo;
          st.multiplier = nu_lo;
          st.strict = nu_lo > strict_tol;
          cls.any_active = true;
        } else if (slack_hi <= act_tol) {
          st.kind = CoordinateStatus::Kind::UpperActive;
          st.slack = slack_hi;
          st.multiplier = nu_hi;
          st.strict = nu_hi > strict_tol;
          cls.any_active = true;
        } else {
          st.kind = CoordinateStatus::Kind::Inactive;
          st.slack = std::min(slack_lo, slack_hi);
          st.multiplier = 0.0;
          st.strict = std::min(slack_lo, slack_hi) > strict_tol &&
                      std::max(std::abs(nu_lo), std::abs(nu_hi)) < strict_tol;
        }
        if (!st.strict) cls.strict_complementarity = false;
      }
    }
  }
  return cls;
}

MultiplierSet recover_constrained_multipliers(const GameDefinition& game, const Trajectory& traj,
                                              const AffinePolicySet* policies1,
                                              const AffinePolicySet* policies2,
                                              double act_tol) {
  require_bounds(game, "recover_constrained_multipliers");
  const int K = game.horizon;

  MultiplierSet m;
  if (policies1 != nullptr && policies2 != nullptr) {
    m = recover_fb_multipliers(game, traj, *policies1, *policies2);
  } else if (policies1 == nullptr && policies2 == nullptr) {
    auto [l1, l2] = recover_ol_costates(game, traj);
    m.lambda1 = std::move(l1);
    m.lambda2 = std::move(l2);
  } else {
    throw InputError("recover_constrained_multipliers: supply both policy sets or neither");
  }

  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);

  m.nu_lower1.assign(K, Vector());
  m.nu_upper1.assign(K, Vector());
  m.nu_lower2.assign(K, Vector());
  m.nu_upper2.assign(K, Vector());

  for (int agent = 1; agent <= 2; ++agent) {
    const int mi = game.control_dim(agent);
    const double sigma = (agent == 1) ? 1.0 : -1.0;
    for (int t = 1; t <= K; ++t) {
      const StageDerivatives& sd = derivs.at(t);
      const StageBounds& sb = game.stage_bounds(agent, t);
      const Vector& u = traj.u(agent, t);
      // Own-control stationarity row without bound terms; on an active
      // coordinate the permitted multiplier absorbs it.
      const Vector r = sigma * Vector(sd.grad_u(agent)) +
                       sd.B(agent).transpose() * m.lambda(agent, t);
      Vector nu_lo = Vector::Zero(mi), nu_hi = Vector::Zero(mi);
      for (int j = 0; j < mi; ++j) {
        if (sb.upper(j) - sb.lower(j) <= 2.0 * act_tol)
          throw DegenerateBoundError(t, agent, j);
        const double slack_lo = u(j) - sb.lower(j);
        const double slack_hi = sb.upper(j) - u(j);
        if (slack_lo <= act_tol) {
          nu_lo(j) = r(j);  // r - nu_lo + nu_hi = 0 with nu_hi = 0
        } else if (slack_hi <= act_tol) {
          nu_hi(j) = -r(j);
        }
      }
      if (agent == 1) {
        m.nu_lower1[t - 1] = std::move(nu_lo);
        m.nu_upper1[t - 1] = std::move(nu_hi);
      } else {
        m.nu_lower2[t - 1] = std::move(nu_lo);
        m.nu_upper2[t - 1] = std::move(nu_hi);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Constrained open-loop solve: smoothed Fischer-Burmeister Newton.
// ---------------------------------------------------------------------------

namespace {

// Stage-major variable blocks:
// [u1, u2, l1, l2, nu_lo1, nu_hi1, nu_lo2, nu_hi2, x_{t+1}].
struct ConstrainedLayout {
  int K, n, m1, m2;
  int blk() const { return 3 * n + 3 * m1 + 3 * m2; }
  int total() const { return K * blk(); }
};

struct ConstrainedSystem {
  const GameDefinition& game;
  ConstrainedLayout L;

  int iu1(int t) const { return (t - 1) * L.blk(); }
  int iu2(int t) const { return iu1(t) + L.m1; }
  int il1(int t) const { return iu2(t) + L.m2; }
  int il2(int t) const { return il1(t) + L.n; }
  int inl1(int t) const { return il2(t) + L.n; }
  int inh1(int t) const { return inl1(t) + L.m1; }
  int inl2(int t) const { return inh1(t) + L.m1; }
  int inh2(int t) const { return inl2(t) + L.m2; }
  // x_t lives in stage t-1's block, after the multipliers.
  int ix(int t) const { return (t - 2) * L.blk() + 2 * L.n + 3 * L.m1 + 3 * L.m2; }

  int rows_stage(int t) const {
    return (t == 1 ? L.n : 3 * L.n) + 3 * (L.m1 + L.m2);
  }
  int row_base(int t) const {
    int r = 0;
    for (int s = 1; s < t; ++s) r += rows_stage(s);
    return r;
  }

  Trajectory unpack_traj(const Vector& z) const {
    Trajectory traj;
    traj.states.resize(L.K + 1);
    traj.controls1.resize(L.K);
    traj.controls2.resize(L.K);
    traj.states[0] = game.initial_state;
    for (int t = 1; t <= L.K; ++t) {
      traj.controls1[t - 1] = z.segment(iu1(t), L.m1);
      traj.controls2[t - 1] = z.segment(iu2(t), L.m2);
      traj.states[t] = z.segment(ix(t + 1), L.n);
    }
    return traj;
  }

  MultiplierSet unpack_mult(const Vector& z) const {
    MultiplierSet m;
    m.lambda1.resize(L.K);
    m.lambda2.resize(L.K);
    m.nu_lower1.resize(L.K);
    m.nu_upper1.resize(L.K);
    m.nu_lower2.resize(L.K);
    m.nu_upper2.resize(L.K);
    for (int t = 1; t <= L.K; ++t) {
      m.lambda1[t - 1] = z.segment(il1(t), L.n);
      m.lambda2[t - 1] = z.segment(il2(t), L.n);
      m.nu_lower1[t - 1] = z.segment(inl1(t), L.m1);
      m.nu_upper1[t - 1] = z.segment(inh1(t), L.m1);
      m.nu_lower2[t - 1] = z.segment(inl2(t), L.m2);
      m.nu_upper2[t - 1] = z.segment(inh2(t), L.m2);
    }
    return m;
  }

  Vector residual(const Vector& z, double mu) const {
    const Trajectory traj = unpack_traj(z);
    const MultiplierSet m = unpack_mult(z);
    const GameDerivatives derivs = evaluate_derivatives(game, traj, false,
                                                        DerivativeOrder::First);
    Vector r = Vector::Zero(L.total());
    for (int t = 1; t <= L.K; ++t) {
      const StageDerivatives& sd = derivs.at(t);
      int row = row_base(t);
      if (t >= 2) {
        r.segment(row, L.n) =
            sd.grad_x() + sd.A.transpose() * m.lambda1[t - 1] - m.lambda1[t - 2];
        row += L.n;
        r.segment(row, L.n) =
            -sd.grad_x() + sd.A.transpose() * m.lambda2[t - 1] - m.lambda2[t - 2];
        row += L.n;
      }
      r.segment(row, L.m1) = sd.grad_u1() + sd.B1.transpose() * m.lambda1[t - 1] -
                             m.nu_lower1[t - 1] + m.nu_upper1[t - 1];
      row += L.m1;
      r.segment(row, L.m2) = -sd.grad_u2() + sd.B2.transpose() * m.lambda2[t - 1] -
                             m.nu_lower2[t - 1] + m.nu_upper2[t - 1];
      row += L.m2;
      for (int agent = 1; agent <= 2; ++agent) {
        const int mi = game.control_dim(agent);
        const StageBounds& sb = game.stage_bounds(agent, t);
        const Vector& u = traj.u(agent, t);
        const Vector& nu_lo = agent == 1 ? m.nu_lower1[t - 1] : m.nu_lower2[t - 1];
        const Vector& nu_hi = agent == 1 ? m.nu_upper1[t - 1] : m.nu_upper2[t - 1];
        for (int j = 0; j < mi; ++j)
          r(row + j) = phi_mu(u(j) - sb.lower(j), nu_lo(j), mu);
        row += mi;
        for (int j = 0; j < mi; ++j)
          r(row + j) = phi_mu(sb.upper(j) - u(j), nu_hi(j), mu);
        row += mi;
      }
      r.segment(row, L.n) =
          traj.x(t + 1) - game.dynamics(t, traj.x(t), traj.u1(t), traj.u2(t));
    }
    const int row = L.total() - 2 * L.n;
    r.segment(row, L.n) = derivs.terminal.grad - m.lambda1[L.K - 1];
    r.segment(row + L.n, L.n) = -derivs.terminal.grad - m.lambda2[L.K - 1];
    return r;
  }

  Matrix jacobian(const Vector& z, double mu) const {
    const Trajectory traj = unpack_traj(z);
    const MultiplierSet m = unpack_mult(z);
    const GameDerivatives derivs = evaluate_derivatives(game, traj, false,
                                                        DerivativeOrder::Second);
    const int n = L.n, m1 = L.m1, m2 = L.m2;
    Matrix J = Matrix::Zero(L.total(), L.total());
    const Matrix In = Matrix::Identity(n, n);

    for (int t = 1; t <= L.K; ++t) {
      const StageDerivatives& sd = derivs.at(t);
      const Matrix& H = sd.cost_hess;
      int row = row_base(t);
      if (t >= 2) {
        J.block(row, ix(t), n, n) = H.topLeftCorner(n, n);
        J.block(row, iu1(t), n, m1) = H.block(0, n, n, m1);
        J.block(row, iu2(t), n, m2) = H.block(0, n + m1, n, m2);
        J.block(row, il1(t), n, n) = sd.A.transpose();
        J.block(row, il1(t - 1), n, n) = -In;
        row += n;
        J.block(row, ix(t), n, n) = -H.topLeftCorner(n, n);
        J.block(row, iu1(t), n, m1) = -H.block(0, n, n, m1);
        J.block(row, iu2(t), n, m2) = -H.block(0, n + m1, n, m2);
        J.block(row, il2(t), n, n) = sd.A.transpose();
        J.block(row, il2(t - 1), n, n) = -In;
        row += n;
      }
      if (t >= 2) J.block(row, ix(t), m1, n) = H.block(n, 0, m1, n);
      J.block(row, iu1(t), m1, m1) = H.block(n, n, m1, m1);
      J.block(row, iu2(t), m1, m2) = H.block(n, n + m1, m1, m2);
      J.block(row, il1(t), m1, n) = sd.B1.transpose();
      J.block(row, inl1(t), m1, m1) = -Matrix::Identity(m1, m1);
      J.block(row, inh1(t), m1, m1) = Matrix::Identity(m1, m1);
      row += m1;
      if (t >= 2) J.block(row, ix(t), m2, n) = -H.block(n + m1, 0, m2, n);
      J.block(row, iu1(t), m2, m1) = -H.block(n + m1, n, m2, m1);
      J.block(row, iu2(t), m2, m2) = -H.block(n + m1, n + m1, m2, m2);
      J.block(row, il2(t), m2, n) = sd.B2.transpose();
      J.block(row, inl2(t), m2, m2) = -Matrix::Identity(m2, m2);
      J.block(row, inh2(t), m2, m2) = Matrix::Identity(m2, m2);
      row += m2;
      for (int agent = 1; agent <= 2; ++agent) {
        const int mi = game.control_dim(agent);
        const int iu = agent == 1 ? iu1(t) : iu2(t);
        const int inl = agent == 1 ? inl1(t) : inl2(t);
        const int inh = agent == 1 ? inh1(t) : inh2(t);
        const StageBounds& sb = game.stage_bounds(agent, t);
        const Vector& u = traj.u(agent, t);
        const Vector& nu_lo = agent == 1 ? m.nu_lower1[t - 1] : m.nu_lower2[t - 1];
        const Vector& nu_hi = agent == 1 ? m.nu_upper1[t - 1] : m.nu_upper2[t - 1];
        for (int j = 0; j < mi; ++j) {
          auto [dp, dq] = phi_mu_grad(u(j) - sb.lower(j), nu_lo(j), mu);
          J(row + j, iu + j) = dp;
          J(row + j, inl + j) = dq;
        }
        row += mi;
        for (int j = 0; j < mi; ++j) {
          auto [dp, dq] = phi_mu_grad(sb.upper(j) - u(j), nu_hi(j), mu);
          J(row + j, iu + j) = -dp;
          J(row + j, inh + j) = dq;
        }
        row += mi;
      }
      J.block(row, ix(t + 1), n, n) = In;
      if (t >= 2) J.block(row, ix(t), n, n) = -sd.A;
      J.block(row, iu1(t), n, m1) = -sd.B1;
      J.block(row, iu2(t), n, m2) = -sd.B2;
    }
    int row = L.total() - 2 * n;
    J.block(row, ix(L.K + 1), n, n) = derivs.terminal.hess;
    J.block(row, il1(L.K), n, n) = -In;
    row += n;
    J.block(row, ix(L.K + 1), n, n) = -derivs.terminal.hess;
    J.block(row, il2(L.K), n, n) = -In;
    return J;
  }
};

}  // namespace

OlneSolution solve_constrained_olne(const GameDefinition& game, const Trajectory& initial,
                                    const ConstrainedOlneOptions& opts) {
  game.validate();
  require_bounds(game, "solve_constrained_olne");
  const SolveOptions& base = opts.base;
  ConstrainedSystem sys{game,
                        {game.horizon, game.state_dim, game.control_dims[0],
                         game.control_dims[1]}};
  const int N = sys.L.total();

  // Initial point: controls clipped into the box, states re-rolled, costates
  // recovered, bound multipliers at a small positive value.
  std::vector<Vector> u1 = initial.controls1, u2 = initial.controls2;
  for (int t = 1; t <= game.horizon; ++t) {
    const StageBounds& b1 = game.stage_bounds(1, t);
    const StageBounds& b2 = game.stage_bounds(2, t);
    u1[t - 1] = u1[t - 1].cwiseMax(b1.lower).cwiseMin(b1.upper);
    u2[t - 1] = u2[t - 1].cwiseMax(b2.lower).cwiseMin(b2.upper);
  }
  Trajectory traj = rollout(game, u1, u2);
  auto [l1, l2] = recover_ol_costates(game, traj);

  Vector z = Vector::Zero(N);
  for (int t = 1; t <= game.horizon; ++t) {
    z.segment(sys.iu1(t), sys.L.m1) = traj.u1(t);
    z.segment(sys.iu2(t), sys.L.m2) = traj.u2(t);
    z.segment(sys.il1(t), sys.L.n) = l1[t - 1];
    z.segment(sys.il2(t), sys.L.n) = l2[t - 1];
    z.segment(sys.inl1(t), sys.L.m1) = Vector::Constant(sys.L.m1, 0.1);
    z.segment(sys.inh1(t), sys.L.m1) = Vector::Constant(sys.L.m1, 0.1);
    z.segment(sys.inl2(t), sys.L.m2) = Vector::Constant(sys.L.m2, 0.1);
    z.segment(sys.inh2(t), sys.L.m2) = Vector::Constant(sys.L.m2, 0.1);
    z.segment(sys.ix(t + 1), sys.L.n) = traj.x(t + 1);
  }

  OlneSolution sol;
  SolveLog& log = sol.log;
  double reg = base.levenberg_initial;
  int iter = 0;
  bool out_of_iterations = false;

  for (double mu = opts.mu_initial; mu >= opts.mu_floor * 0.999; mu *= opts.mu_shrink) {
    const double inner_tol = std::max(base.residual_tol, mu);
    Vector r = sys.residual(z, mu);
    double rnorm = r.lpNorm<Eigen::Infinity>();
    while (rnorm > inner_tol) {
      if (++iter > base.max_iters) {
        out_of_iterations = true;
        break;
      }
      const Matrix J = sys.jacobian(z, mu);
      SolveIteration rec;
      rec.iter = iter;
      rec.residual = rnorm;
      rec.smoothing = mu;

      bool stepped = false;
      while (!stepped) {
        Vector dz;
        bool solve_ok = false;
        if (reg == 0.0) {
          Eigen::PartialPivLU<Matrix> lu(J);
          dz = lu.solve(-r);
          solve_ok = dz.allFinite() &&
                     (J * dz + r).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + rnorm);
        } else {
          const Matrix JtJ = J.transpose() * J + reg * Matrix::Identity(N, N);
          dz = Eigen::LDLT<Matrix>(JtJ).solve(-J.transpose() * r);
          solve_ok = dz.allFinite();
        }
        if (!solve_ok) {
          if (reg >= base.levenberg_max) {
            log.status = SolveStatus::SingularNewtonStep;
            log.message = "Newton step singular at regularization cap";
            log.final_residual = rnorm;
            sol.trajectory = sys.unpack_traj(z);
            sol.multipliers = sys.unpack_mult(z);
            log.iterations.push_back(rec);
            return sol;
          }
          reg = (reg == 0.0) ? base.levenberg_entry : reg * base.levenberg_growth;
          reg = std::min(reg, base.levenberg_max);
          continue;
        }
        double alpha = 1.0;
        while (alpha >= base.line_search_min_step) {
          const Vector zt = z + alpha * dz;
          const Vector rt = sys.residual(zt, mu);
          const double rtnorm = rt.lpNorm<Eigen::Infinity>();
          ++rec.line_search_steps;
          if (rt.allFinite() && rtnorm <= (1.0 - 1e-4 * alpha) * rnorm) {
            z = zt;
            r = rt;
            rnorm = rtnorm;
            rec.step_norm = alpha * dz.lpNorm<Eigen::Infinity>();
            rec.regularization = reg;
            reg *= base.levenberg_shrink;
            if (reg < 1e-14) reg = 0.0;
            stepped = true;
            break;
          }
          alpha *= base.line_search_shrink;
        }
        if (!stepped) {
          if (reg >= base.levenberg_max) {
            log.status = SolveStatus::LineSearchStall;
            log.message = "line search stalled at smoothing " + std::to_string(mu);
            log.final_residual = rnorm;
            sol.trajectory = sys.unpack_traj(z);
            sol.multipliers = sys.unpack_mult(z);
            log.iterations.push_back(rec);
            return sol;
          }
          reg = (reg == 0.0) ? base.levenberg_entry : reg * base.levenberg_growth;
          reg = std::min(reg, base.levenberg_max);
        }
      }
      log.iterations.push_back(rec);
    }
    if (out_of_iterations) break;
  }

  const Vector r0 = sys.residual(z, 0.0);
  double final_residual = r0.lpNorm<Eigen::Infinity>();

  sol.trajectory = sys.unpack_traj(z);
  sol.multipliers = sys.unpack_mult(z);

  double nu_min = 0.0;
  for (int t = 1; t <= game.horizon; ++t) {
    nu_min = std::min(nu_min, sol.multipliers.nu_lower1[t - 1].minCoeff());
    nu_min = std::min(nu_min, sol.multipliers.nu_upper1[t - 1].minCoeff());
    nu_min = std::min(nu_min, sol.multipliers.nu_lower2[t - 1].minCoeff());
    nu_min = std::min(nu_min, sol.multipliers.nu_upper2[t - 1].minCoeff());
  }

  if (out_of_iterations && final_residual > base.residual_tol) {
    log.status = SolveStatus::MaxIters;
    log.message = "maximum iterations reached";
  } else if (final_residual > base.residual_tol || nu_min < -10.0 * base.residual_tol) {
    log.status = SolveStatus::ComplementarityStall;
    log.message = "smoothing floor reached with unsmoothed residual " +
                  std::to_string(final_residual);
  } else {
    // Clip tiny multiplier negativity and re-roll the trajectory.
    for (auto seq : {&sol.multipliers.nu_lower1, &sol.multipliers.nu_upper1,
                     &sol.multipliers.nu_lower2, &sol.multipliers.nu_upper2})
      for (Vector& v : *seq) v = v.cwiseMax(0.0);
    Trajectory rolled =
        rollout(game, sol.trajectory.controls1, sol.trajectory.controls2);
    sol.trajectory = std::move(rolled);
    log.status = SolveStatus::Converged;
    log.converged = true;
    log.message = "multiplier clip magnitude " + std::to_string(std::max(0.0, -nu_min));
    final_residual = std::max(
        final_residual,
        ol_first_order_report(game, sol.trajectory, sol.multipliers, base.residual_tol)
            .families.max());
  }
  log.final_residual = final_residual;
  return sol;
}

OlneSolution solve_constrained_olne(const GameDefinition& game,
                                    const ConstrainedOlneOptions& opts) {
  return solve_constrained_olne(game, rollout_zero(game), opts);
}

// ---------------------------------------------------------------------------
// Constrained feedback solve: iLQ with projected-extragradient stage saddles.
// ---------------------------------------------------------------------------

namespace {

struct StageSaddleResult {
  Vector offset;   // stacked (du1, du2) solution of the boxed stage saddle
  Matrix gain;     // stacked gains with active rows zeroed
  ValueQuadratic value;
  LqStageDiagnostics diag;
  bool stalled = false;
};

StageSaddleResult solve_stage_saddle(const Matrix& Z2, const Vector& Z1, double z0,
                                     const Vector& lo, const Vector& hi, int n, int m1, int m2,
                                     int stage, const ConstrainedFbneOptions& opts) {
  const int mc = m1 + m2;
  StageSaddleResult res;
  res.diag.stage = stage;

  Matrix Zuu = Z2.block(n, n, mc, mc);
  auto min_eig_u1 = [&](const Matrix& M) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(M.topLeftCorner(m1, m1)).eigenvalues().minCoeff();
  };
  auto max_eig_u2 = [&](const Matrix& M) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(M.bottomRightCorner(m2, m2))
        .eigenvalues().maxCoeff();
  };
  double shift = 0.0;
  while ((min_eig_u1(Zuu) <= opts.base.curvature_margin ||
          max_eig_u2(Zuu) >= -opts.base.curvature_margin) &&
         shift < opts.base.reg_cap) {
    shift = (shift == 0.0) ? opts.base.reg_initial : 2.0 * shift;
    Zuu = Z2.block(n, n, mc, mc);
    Zuu.topLeftCorner(m1, m1) += shift * Matrix::Identity(m1, m1);
    Zuu.bottomRightCorner(m2, m2) -= shift * Matrix::Identity(m2, m2);
  }
  res.diag.regularization = shift;
  res.diag.min_eig_u1u1 = min_eig_u1(Zuu);
  res.diag.max_eig_u2u2 = max_eig_u2(Zuu);

  const Matrix Zux = Z2.block(n, 0, mc, n);
  const Vector Zu = Z1.segment(n, mc);

  // Monotone saddle operator F(w) = (grad_u1 Z, -grad_u2 Z) at dx = 0.
  Matrix Mop = Zuu;
  Mop.bottomRows(m2) *= -1.0;
  Vector qop = Zu;
  qop.tail(m2) *= -1.0;

  const double Lip = std::max(Mop.operatorNorm(), 1e-12);
  const double eta = 1.0 / Lip;
  auto clamp = [&](const Vector& w) -> Vector { return w.cwiseMax(lo).cwiseMin(hi); };
  auto F = [&](const Vector& w) -> Vector { return Mop * w + qop; };

  Vector w = clamp(Vector::Zero(mc));
  double fp_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.extragradient_max_iters; ++it) {
    const Vector v = clamp(w - eta * F(w));
    fp_res = (w - v).lpNorm<Eigen::Infinity>();
    if (fp_res <= opts.extragradient_tol) break;
    w = clamp(w - eta * F(v));
  }
  if (fp_res > opts.extragradient_tol) res.stalled = true;
  res.offset = w;

  // Active-set masked gains: unconstrained stationarity restricted to the
  // inactive coordinates, zero rows elsewhere.
  std::vector<int> inactive;
  for (int j = 0; j < mc; ++j) {
    if (w(j) - lo(j) > opts.act_tol && hi(j) - w(j) > opts.act_tol) inactive.push_back(j);
  }
  res.gain = Matrix::Zero(mc, n);
  if (!inactive.empty()) {
    const int ni = static_cast<int>(inactive.size());
    Matrix Mi(ni, ni);
    Matrix Gi(ni, n);
    for (int a = 0; a < ni; ++a) {
      for (int b = 0; b < ni; ++b) Mi(a, b) = Zuu(inactive[a], inactive[b]);
      Gi.row(a) = Zux.row(inactive[a]);
    }
    res.diag.condition = [&] {
      Eigen::JacobiSVD<Matrix> svd(Mi);
      const double smin = svd.singularValues().minCoeff();
      return smin > 0 ? svd.singularValues().maxCoeff() / smin
                      : std::numeric_limits<double>::infinity();
    }();
    const Matrix Pi = -Mi.lu().solve(Gi);
    for (int a = 0; a < ni; ++a) res.gain.row(inactive[a]) = Pi.row(a);
  } else {
    res.diag.condition = 1.0;
  }

  // Value update along du(dx) = w + gain dx, using the unshifted quadratic.
  Matrix T(n + mc, n);
  T << Matrix::Identity(n, n), res.gain;
  Vector b(n + mc);
  b << Vector::Zero(n), w;
  res.value.V2 = T.transpose() * Z2 * T;
  res.value.V2 = 0.5 * (res.value.V2 + res.value.V2.transpose()).eval();
  res.value.V1 = T.transpose() * (Z2 * b + Z1);
  res.value.v0 = 0.5 * b.dot(Z2 * b) + Z1.dot(b) + z0;
  res.value.stage = stage;
  return res;
}

double constrained_fb_residual(const GameDefinition& game, const Trajectory& traj,
                               const AffinePolicySet& p1, const AffinePolicySet& p2) {
  return fb_first_order_report(game, traj, p1, p2).families.max();
}

}  // namespace

FbneSolution solve_constrained_fbne(const GameDefinition& game, const AffinePolicySet& initial1,
                                    const AffinePolicySet& initial2,
                                    const ConstrainedFbneOptions& opts) {
  game.validate();
  require_bounds(game, "solve_constrained_fbne");
  const int K = game.horizon, n = game.state_dim;
  const int m1 = game.control_dims[0], m2 = game.control_dims[1];

  FbneSolution sol;
  sol.policy1 = initial1;
  sol.policy2 = initial2;
  // Clip the offsets into the box so the initial rollout is feasible at the
  // anchors.
  for (int t = 1; t <= K; ++t) {
    const StageBounds& b1 = game.stage_bounds(1, t);
    const StageBounds& b2 = game.stage_bounds(2, t);
    sol.policy1.at(t).u_ref = sol.policy1.at(t).u_ref.cwiseMax(b1.lower).cwiseMin(b1.upper);
    sol.policy2.at(t).u_ref = sol.policy2.at(t).u_ref.cwiseMax(b2.lower).cwiseMin(b2.upper);
  }
  sol.trajectory = rollout_policy(game, sol.policy1, sol.policy2);
  for (int t = 1; t <= K; ++t) {
    sol.policy1.at(t).u_ref = sol.trajectory.u1(t);
    sol.policy1.at(t).x_ref = sol.trajectory.x(t);
    sol.policy2.at(t).u_ref = sol.trajectory.u2(t);
    sol.policy2.at(t).x_ref = sol.trajectory.x(t);
  }

  SolveLog& log = sol.log;
  const SolveOptions& base = opts.base.base;
  double residual = constrained_fb_residual(game, sol.trajectory, sol.policy1, sol.policy2);

  for (int iter = 1; iter <= base.max_iters; ++iter) {
    if (residual <= base.residual_tol) {
      log.status = SolveStatus::Converged;
      log.converged = true;
      break;
    }

    const GameDerivatives derivs = evaluate_derivatives(game, sol.trajectory, false,
                                                        DerivativeOrder::Second);
    // Backward pass with boxed stage saddles in deviation variables.
    ValueQuadratic V;
    V.V2 = derivs.terminal.hess;
    V.V1 = derivs.terminal.grad;
    V.v0 = 0.0;
    V.stage = K + 1;

    std::vector<Vector> offsets(K);
    std::vector<Matrix> gains(K);
    sol.last_diagnostics.assign(K, {});
    bool stalled = false;
    for (int t = K; t >= 1; --t) {
      const StageDerivatives& sd = derivs.at(t);
      Matrix F(n, n + m1 + m2);
      F << sd.A, sd.B1, sd.B2;
      Matrix Z2 = sd.cost_hess + F.transpose() * V.V2 * F;
      Z2 = 0.5 * (Z2 + Z2.transpose()).eval();
      const Vector Z1 = sd.cost_grad + F.transpose() * V.V1;

      const StageBounds& b1 = game.stage_bounds(1, t);
      const StageBounds& b2 = game.stage_bounds(2, t);
      Vector lo(m1 + m2), hi(m1 + m2);
      lo << b1.lower - sol.trajectory.u1(t), b2.lower - sol.trajectory.u2(t);
      hi << b1.upper - sol.trajectory.u1(t), b2.upper - sol.trajectory.u2(t);

      StageSaddleResult stage = solve_stage_saddle(Z2, Z1, 0.0, lo, hi, n, m1, m2, t, opts);
      if (stage.stalled) {
        log.status = SolveStatus::MaxIters;
        log.message = "extragradient stalled at stage " + std::to_string(t);
        stalled = true;
        break;
      }
      offsets[t - 1] = stage.offset;
      gains[t - 1] = stage.gain;
      sol.last_diagnostics[t - 1] = stage.diag;
      V = stage.value;
    }
    if (stalled) break;

    const double J_base = total_cost(game, sol.trajectory);
    const double floor_slack = 1e-10 * (1.0 + std::abs(J_base));
    double model_scale = 0.0;
    for (int t = 1; t <= K; ++t) model_scale += offsets[t - 1].squaredNorm();

    SolveIteration rec;
    rec.iter = iter;
    rec.residual = residual;
    for (const auto& d : sol.last_diagnostics)
      rec.regularization = std::max(rec.regularization, d.regularization);

    auto candidate = [&](int agent, double alpha) {
      AffinePolicySet out = (agent == 1) ? sol.policy1 : sol.policy2;
      for (int t = 1; t <= K; ++t) {
        AffinePolicy& p = out.at(t);
        const int off = (agent == 1) ? 0 : m1;
        const int mi = (agent == 1) ? m1 : m2;
        p.gain = gains[t - 1].middleRows(off, mi);
        p.u_ref = sol.trajectory.u(agent, t) + alpha * offsets[t - 1].segment(off, mi);
        p.x_ref = sol.trajectory.x(t);
      }
      return out;
    };

    bool accepted = false;
    double alpha = 1.0;
    AffinePolicySet cand1, cand2;
    for (int step = 0; step <= 20; ++step, alpha *= 0.5) {
      cand1 = candidate(1, alpha);
      cand2 = candidate(2, alpha);
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
      alpha = std::pow(0.5, 20);
      cand1 = candidate(1, alpha);
      cand2 = candidate(2, alpha);
      log.message = "line search exhausted at iteration " + std::to_string(iter);
    }

    Trajectory next = rollout_policy(game, cand1, cand2);
    AffinePolicySet new1 = cand1, new2 = cand2;
    double change = 0.0;
    for (int t = 1; t <= K; ++t) {
      new1.at(t).u_ref = next.u1(t);
      new1.at(t).x_ref = next.x(t);
      new2.at(t).u_ref = next.u2(t);
      new2.at(t).x_ref = next.x(t);
      change = std::max(change, alpha * offsets[t - 1].lpNorm<Eigen::Infinity>());
      change = std::max(change, (new1.at(t).gain - sol.policy1.at(t).gain).lpNorm<Eigen::Infinity>());
      change = std::max(change, (new2.at(t).gain - sol.policy2.at(t).gain).lpNorm<Eigen::Infinity>());
    }
    rec.step_norm = change;

    sol.policy1 = std::move(new1);
    sol.policy2 = std::move(new2);
    sol.trajectory = std::move(next);
    residual = constrained_fb_residual(game, sol.trajectory, sol.policy1, sol.policy2);
    log.iterations.push_back(rec);

    if (change <= base.step_tol) {
      log.status = residual <= base.residual_tol ? SolveStatus::Converged
                                                 : SolveStatus::ConvergedStepTol;
      log.converged = true;
      break;
    }
  }

  if (!log.converged && residual <= base.residual_tol) {
    log.status = SolveStatus::Converged;
    log.converged = true;
  }
  if (!log.converged && log.status == SolveStatus::MaxIters && log.message.empty())
    log.message = "maximum iterations reached";
  log.final_residual = residual;
  return sol;
}

FbneSolution solve_constrained_fbne(const GameDefinition& game,
                                    const ConstrainedFbneOptions& opts) {
  return solve_constrained_fbne(game, zero_policies(game, 1), zero_policies(game, 2), opts);
}

// ---------------------------------------------------------------------------
// Theorem-2 audits.
// ---------------------------------------------------------------------------

const char* to_string(Theorem2Verdict v) {
  switch (v) {
    case Theorem2Verdict::Pass: return "pass";
    case Theorem2Verdict::Fail: return "fail";
    case Theorem2Verdict::NotApplicable: return "not-applicable";
    case Theorem2Verdict::Refused: return "refused";
  }
  return "unknown";
}

Theorem2Audit theorem2_audit(const GameDefinition& game, const AffinePolicySet& policies1,
                             const AffinePolicySet& policies2, const Trajectory& traj,
                             const Theorem2Tolerances& tol) {
  require_bounds(game, "theorem2_audit");
  Theorem2Audit audit;

  const MultiplierSet m =
      recover_constrained_multipliers(game, traj, &policies1, &policies2, tol.act_tol);
  const KktResidualReport fb =
      fb_first_order_report(game, traj, policies1, policies2, m, tol.first_order);
  if (!fb.pass) {
    audit.verdict = Theorem2Verdict::Refused;
    audit.detail = "constrained feedback residual " + std::to_string(fb.families.max()) +
                   " exceeds tolerance";
    return audit;
  }

  const ActiveSetClassification cls =
      classify_active_set(game, traj, m, tol.act_tol, tol.strict_tol);
  audit.strict_complementarity = cls.strict_complementarity;
  if (!cls.strict_complementarity) {
    audit.verdict = Theorem2Verdict::NotApplicable;
    audit.detail = "strict complementarity does not hold";
    return audit;
  }

  const int K = game.horizon;
  for (int s = 2; s <= K; ++s) {
    const Vector id1 = m.psi(1, s) - (m.nu_upper(2, s) - m.nu_lower(2, s));
    const Vector id2 = m.psi(2, s) - (m.nu_upper(1, s) - m.nu_lower(1, s));
    audit.psi_nu_identity_max = std::max({audit.psi_nu_identity_max,
                                          id1.lpNorm<Eigen::Infinity>(),
                                          id2.lpNorm<Eigen::Infinity>()});
    const Vector an1 = policies2.at(s).gain.transpose() * m.psi(1, s);
    const Vector an2 = policies1.at(s).gain.transpose() * m.psi(2, s);
    audit.annihilation_max = std::max({audit.annihilation_max,
                                       an1.lpNorm<Eigen::Infinity>(),
                                       an2.lpNorm<Eigen::Infinity>()});
  }
  audit.lambda_negation_max = m.max_lambda_negation();

  const MultiplierSet ol_m =
      recover_constrained_multipliers(game, traj, nullptr, nullptr, tol.act_tol);
  audit.other_side_residual =
      ol_first_order_report(game, traj, ol_m, tol.embedding).families.max();

  audit.identity_pass = audit.psi_nu_identity_max <= tol.identity;
  audit.annihilation_pass = audit.annihilation_max <= tol.annihilation;
  audit.cascade_pass = audit.lambda_negation_max <= tol.cascade;
  audit.embedding_pass = audit.other_side_residual <= tol.embedding;
  audit.verdict = (audit.identity_pass && audit.annihilation_pass && audit.cascade_pass &&
                   audit.embedding_pass)
                      ? Theorem2Verdict::Pass
                      : Theorem2Verdict::Fail;
  return audit;
}

Theorem2Audit theorem2_audit(const GameDefinition& game, const Trajectory& traj,
                             const std::optional<MultiplierSet>& multipliers,
                             const Theorem2Tolerances& tol) {
  require_bounds(game, "theorem2_audit");
  Theorem2Audit audit;

  MultiplierSet m = multipliers
                        ? *multipliers
                        : recover_constrained_multipliers(game, traj, nullptr, nullptr,
                                                          tol.act_tol);
  if (!m.has_bound_multipliers())
    m = recover_constrained_multipliers(game, traj, nullptr, nullptr, tol.act_tol);

  const KktResidualReport ol = ol_first_order_report(game, traj, m, tol.first_order);
  if (!ol.pass) {
    audit.verdict = Theorem2Verdict::Refused;
    audit.detail = "constrained open-loop residual " + std::to_string(ol.families.max()) +
                   " exceeds tolerance";
    return audit;
  }

  const ActiveSetClassification cls =
      classify_active_set(game, traj, m, tol.act_tol, tol.strict_tol);
  audit.strict_complementarity = cls.strict_complementarity;
  if (!cls.strict_complementarity) {
    audit.verdict = Theorem2Verdict::NotApplicable;
    audit.detail = "strict complementarity does not hold";
    return audit;
  }
  audit.lambda_negation_max = m.max_lambda_negation();
  audit.cascade_pass = audit.lambda_negation_max <= tol.cascade;

  // Embed with zero gains and psi^i := nu_hi^{-i} - nu_lo^{-i}.
  const int K = game.horizon;
  MultiplierSet emb = m;
  if (K >= 2) {
    emb.psi1.resize(K - 1);
    emb.psi2.resize(K - 1);
    for (int s = 2; s <= K; ++s) {
      emb.psi1[s - 2] = m.nu_upper(2, s) - m.nu_lower(2, s);
      emb.psi2[s - 2] = m.nu_upper(1, s) - m.nu_lower(1, s);
    }
  }
  const AffinePolicySet emb1 = embed_open_loop(traj, 1);
  const AffinePolicySet emb2 = embed_open_loop(traj, 2);
  const KktResidualReport fb =
      fb_first_order_report(game, traj, emb1, emb2, emb, tol.embedding);
  audit.other_side_residual = fb.families.max();
  audit.embedding_pass = fb.pass;
  audit.identity_pass = true;  // holds by construction of the embedding
  audit.annihilation_pass = true;  // zero gains
  audit.verdict = (audit.embedding_pass && audit.cascade_pass) ? Theorem2Verdict::Pass
                                                               : Theorem2Verdict::Fail;
  return audit;
}

}  // namespace zsg
