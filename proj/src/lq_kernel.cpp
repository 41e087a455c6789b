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

#include "zsgames/lq_kernel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace zsg {

namespace {

void check_stage_dims(const std::vector<LqStage>& stages, const ValueQuadratic& terminal) {
  if (stages.empty()) throw InputError("LQ solve requires at least one stage");
  const int n = stages[0].n(), m1 = stages[0].m1(), m2 = stages[0].m2();
  const int d = n + m1 + m2;
  for (size_t k = 0; k < stages.size(); ++k) {
    const LqStage& s = stages[k];
    if (s.n() != n || s.m1() != m1 || s.m2() != m2 || s.c.size() != n || s.H.rows() != d ||
        s.H.cols() != d || s.g.size() != d || s.B1.rows() != n || s.B2.rows() != n)
      throw InputError("LQ stage " + std::to_string(k + 1) + " has inconsistent dimensions");
  }
  if (terminal.V2.rows() != n || terminal.V2.cols() != n || terminal.V1.size() != n)
    throw InputError("terminal quadratic has inconsistent dimensions");
}

double condition_number(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

}  // namespace

LqFeedbackSolution solve_lq_feedback(const std::vector<LqStage>& stages,
                                     const ValueQuadratic& terminal,
                                     const LqFeedbackOptions& opts) {
  check_stage_dims(stages, terminal);
  const int K = static_cast<int>(stages.size());
  const int n = stages[0].n(), m1 = stages[0].m1(), m2 = stages[0].m2();
  const int mc = m1 + m2;

  LqFeedbackSolution sol;
  sol.policy1.stages.resize(K);
  sol.policy2.stages.resize(K);
  sol.values.resize(K + 1);
  sol.diagnostics.resize(K);
  sol.values[K] = terminal;
  sol.values[K].stage = K + 1;

  for (int t = K; t >= 1; --t) {
    const LqStage& s = stages[t - 1];
    const ValueQuadratic& V = sol.values[t];

    Matrix F(n, n + mc);
    F << s.A, s.B1, s.B2;

    // Control-value quadratic Z_t over (x, u1, u2).
    Matrix Z2 = s.H + F.transpose() * V.V2 * F;
    Z2 = 0.5 * (Z2 + Z2.transpose()).eval();
    Vector Z1 = s.g + F.transpose() * (V.V2 * s.c + V.V1);
    const double z0 = s.constant + 0.5 * s.c.dot(V.V2 * s.c) + V.V1.dot(s.c) + V.v0;

    Matrix Zuu = Z2.block(n, n, mc, mc);
    const Matrix Zux = Z2.block(n, 0, mc, n);
    const Vector Zu = Z1.segment(n, mc);

    LqStageDiagnostics& diag = sol.diagnostics[t - 1];
    diag.stage = t;

    // Degenerate zero stage (no control influence on the cost-to-go): the
    // canonical solution is the zero policy.
    if (Zuu.lpNorm<Eigen::Infinity>() == 0.0 && Zux.lpNorm<Eigen::Infinity>() == 0.0 &&
        Zu.lpNorm<Eigen::Infinity>() == 0.0) {
      AffinePolicy& p1 = sol.policy1.stages[t - 1];
      AffinePolicy& p2 = sol.policy2.stages[t - 1];
      p1.gain = Matrix::Zero(m1, n);
      p1.u_ref = Vector::Zero(m1);
      p1.x_ref = Vector::Zero(n);
      p2.gain = Matrix::Zero(m2, n);
      p2.u_ref = Vector::Zero(m2);
      p2.x_ref = Vector::Zero(n);
      ValueQuadratic& Vt = sol.values[t - 1];
      Vt.V2 = Z2.topLeftCorner(n, n);
      Vt.V1 = Z1.segment(0, n);
      Vt.v0 = z0;
      Vt.stage = t;
      sol.saddle_ok = false;
      continue;
    }

    auto min_eig_u1 = [&](const Matrix& M) {
      return Eigen::SelfAdjointEigenSolver<Matrix>(M.topLeftCorner(m1, m1))
          .eigenvalues().minCoeff();
    };
    auto max_eig_u2 = [&](const Matrix& M) {
      return Eigen::SelfAdjointEigenSolver<Matrix>(M.bottomRightCorner(m2, m2))
          .eigenvalues().maxCoeff();
    };

    double shift = 0.0;
    if (opts.regularize) {
      while ((min_eig_u1(Zuu) <= opts.curvature_margin ||
              max_eig_u2(Zuu) >= -opts.curvature_margin) &&
             shift < opts.reg_cap) {
        shift = (shift == 0.0) ? opts.reg_initial : 2.0 * shift;
        Zuu = Z2.block(n, n, mc, mc);
        Zuu.topLeftCorner(m1, m1) += shift * Matrix::Identity(m1, m1);
        Zuu.bottomRightCorner(m2, m2) -= shift * Matrix::Identity(m2, m2);
      }
    }
    diag.regularization = shift;
    diag.min_eig_u1u1 = min_eig_u1(Zuu);
    diag.max_eig_u2u2 = max_eig_u2(Zuu);
    diag.condition = condition_number(Zuu);
    if (!diag.saddle_ok() || shift != 0.0) sol.saddle_ok = false;
    if (!(diag.condition < opts.cond_max)) throw SaddleSingularError(t);

    // Coupled stationarity: grad_u1 Z = 0 and grad_u2 Z = 0 in one stacked solve.
    Eigen::PartialPivLU<Matrix> lu(Zuu);
    const Vector k_off = -lu.solve(Zu);
    const Matrix P = -lu.solve(Zux);

    AffinePolicy& p1 = sol.policy1.stages[t - 1];
    AffinePolicy& p2 = sol.policy2.stages[t - 1];
    p1.gain = P.topRows(m1);
    p1.u_ref = k_off.head(m1);
    p1.x_ref = Vector::Zero(n);
    p2.gain = P.bottomRows(m2);
    p2.u_ref = k_off.tail(m2);
    p2.x_ref = Vector::Zero(n);

    // Substitute u = k + P x back into Z_t to get V_t.
    Matrix T(n + mc, n);
    T << Matrix::Identity(n, n), P;
    Vector b(n + mc);
    b << Vector::Zero(n), k_off;

    ValueQuadratic& Vt = sol.values[t - 1];
    Vt.V2 = T.transpose() * Z2 * T;
    Vt.V2 = 0.5 * (Vt.V2 + Vt.V2.transpose()).eval();
    Vt.V1 = T.transpose() * (Z2 * b + Z1);
    Vt.v0 = 0.5 * b.dot(Z2 * b) + Z1.dot(b) + z0;
    Vt.stage = t;
  }

  return sol;
}

LqOpenLoopSolution solve_lq_openloop(const std::vector<LqStage>& stages,
                                     const ValueQuadratic& terminal, const Vector& x1,
                                     double /*cond_max*/) {
  check_stage_dims(stages, terminal);
  const int K = static_cast<int>(stages.size());
  const int n = stages[0].n(), m1 = stages[0].m1(), m2 = stages[0].m2();
  if (x1.size() != n) throw InputError("x1 dimension mismatch");

  // Degenerate zero-cost game: the KKT matrix is singular in the control
  // columns; the canonical solution is zero controls on the drift.
  bool all_zero = terminal.V2.lpNorm<Eigen::Infinity>() == 0.0 &&
                  terminal.V1.lpNorm<Eigen::Infinity>() == 0.0;
  for (const LqStage& s : stages)
    all_zero = all_zero && s.H.lpNorm<Eigen::Infinity>() == 0.0 &&
               s.g.lpNorm<Eigen::Infinity>() == 0.0;
  if (all_zero) {
    LqOpenLoopSolution sol;
    sol.trajectory.states.resize(K + 1);
    sol.trajectory.states[0] = x1;
    sol.trajectory.controls1.assign(K, Vector::Zero(m1));
    sol.trajectory.controls2.assign(K, Vector::Zero(m2));
    sol.lambda1.assign(K, Vector::Zero(n));
    sol.lambda2.assign(K, Vector::Zero(n));
    for (int t = 1; t <= K; ++t)
      sol.trajectory.states[t] = stages[t - 1].A * sol.trajectory.states[t - 1] + stages[t - 1].c;
    return sol;
  }

  // Stage-major variable ordering, stage t block: [u1_t, u2_t, l1_t, l2_t, x_{t+1}].
  const int blk = m1 + m2 + 3 * n;
  const int N = K * blk;
  auto iu1 = [&](int t) { return (t - 1) * blk; };
  auto iu2 = [&](int t) { return (t - 1) * blk + m1; };
  auto il1 = [&](int t) { return (t - 1) * blk + m1 + m2; };
  auto il2 = [&](int t) { return (t - 1) * blk + m1 + m2 + n; };
  auto ix = [&](int t) { return (t - 2) * blk + m1 + m2 + 2 * n; };  // x_t, t >= 2

  // Stage-major rows, agent 1 before agent 2, dynamics last within each stage:
  // stage 1: [c1, c2, dyn]; stage t >= 2: [ss1, ss2, c1, c2, dyn]; then the two
  // terminal rows.
  auto row_base = [&](int t) {
    return (t == 1) ? 0 : (m1 + m2 + n) + (t - 2) * (3 * n + m1 + m2);
  };

  Matrix M = Matrix::Zero(N, N);
  Vector rhs = Vector::Zero(N);

  for (int t = 1; t <= K; ++t) {
    const LqStage& s = stages[t - 1];
    const Matrix Hxx = s.H.topLeftCorner(n, n);
    const Matrix Hxu1 = s.H.block(0, n, n, m1);
    const Matrix Hxu2 = s.H.block(0, n + m1, n, m2);
    const Matrix Hu1u1 = s.H.block(n, n, m1, m1);
    const Matrix Hu1u2 = s.H.block(n, n + m1, m1, m2);
    const Matrix Hu2u2 = s.H.block(n + m1, n + m1, m2, m2);
    const Vector gx = s.g.segment(0, n);
    const Vector gu1 = s.g.segment(n, m1);
    const Vector gu2 = s.g.segment(n + m1, m2);

    const int rb = row_base(t);
    int r = rb;
    if (t >= 2) {
      // State stationarity, both agents (agent 2's cost is the negation).
      M.block(r, ix(t), n, n) = Hxx;
      M.block(r, iu1(t), n, m1) = Hxu1;
      M.block(r, iu2(t), n, m2) = Hxu2;
      M.block(r, il1(t), n, n) = s.A.transpose();
      M.block(r, il1(t - 1), n, n) = -Matrix::Identity(n, n);
      rhs.segment(r, n) = -gx;
      r += n;
      M.block(r, ix(t), n, n) = -Hxx;
      M.block(r, iu1(t), n, m1) = -Hxu1;
      M.block(r, iu2(t), n, m2) = -Hxu2;
      M.block(r, il2(t), n, n) = s.A.transpose();
      M.block(r, il2(t - 1), n, n) = -Matrix::Identity(n, n);
      rhs.segment(r, n) = gx;
      r += n;
    }
    // Control stationarity.
    M.block(r, iu1(t), m1, m1) = Hu1u1;
    M.block(r, iu2(t), m1, m2) = Hu1u2;
    M.block(r, il1(t), m1, n) = s.B1.transpose();
    rhs.segment(r, m1) = -gu1;
    if (t >= 2) M.block(r, ix(t), m1, n) = Hxu1.transpose();
    else rhs.segment(r, m1) -= Hxu1.transpose() * x1;
    r += m1;
    M.block(r, iu1(t), m2, m1) = -Hu1u2.transpose();
    M.block(r, iu2(t), m2, m2) = -Hu2u2;
    M.block(r, il2(t), m2, n) = s.B2.transpose();
    rhs.segment(r, m2) = gu2;
    if (t >= 2) M.block(r, ix(t), m2, n) = -Hxu2.transpose();
    else rhs.segment(r, m2) += Hxu2.transpose() * x1;
    r += m2;
    // Dynamics defect.
    M.block(r, ix(t + 1), n, n) = Matrix::Identity(n, n);
    M.block(r, iu1(t), n, m1) = -s.B1;
    M.block(r, iu2(t), n, m2) = -s.B2;
    rhs.segment(r, n) = s.c;
    if (t >= 2) M.block(r, ix(t), n, n) = -s.A;
    else rhs.segment(r, n) += s.A * x1;
  }
  {
    int r = row_base(K) + ((K == 1) ? 0 : 2 * n) + m1 + m2 + n;
    M.block(r, ix(K + 1), n, n) = terminal.V2;
    M.block(r, il1(K), n, n) = -Matrix::Identity(n, n);
    rhs.segment(r, n) = -terminal.V1;
    r += n;
    M.block(r, ix(K + 1), n, n) = -terminal.V2;
    M.block(r, il2(K), n, n) = -Matrix::Identity(n, n);
    rhs.segment(r, n) = terminal.V1;
  }

  Eigen::PartialPivLU<Matrix> lu(M);
  Vector z = lu.solve(rhs);
  // One round of iterative refinement keeps the residual near machine level.
  z += lu.solve(rhs - M * z);
  const double resid = (M * z - rhs).lpNorm<Eigen::Infinity>();
  const double rhs_norm = rhs.lpNorm<Eigen::Infinity>();
  if (!z.allFinite() || resid > 1e-9 * (1.0 + rhs_norm)) throw OpenLoopSingularError();

  LqOpenLoopSolution sol;
  sol.kkt_residual = resid;
  sol.trajectory.states.resize(K + 1);
  sol.trajectory.controls1.resize(K);
  sol.trajectory.controls2.resize(K);
  sol.lambda1.resize(K);
  sol.lambda2.resize(K);
  sol.trajectory.states[0] = x1;
  for (int t = 1; t <= K; ++t) {
    sol.trajectory.controls1[t - 1] = z.segment(iu1(t), m1);
    sol.trajectory.controls2[t - 1] = z.segment(iu2(t), m2);
    sol.lambda1[t - 1] = z.segment(il1(t), n);
    sol.lambda2[t - 1] = z.segment(il2(t), n);
    sol.trajectory.states[t] = z.segment(ix(t + 1), n);
  }
  return sol;
}

}  // namespace zsg
