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

#include <functional>
#include <random>
#include <vector>

#include "zsgames/derivatives.hpp"
#include "zsgames/game.hpp"
#include "zsgames/lq_kernel.hpp"

// Test-side oracles. These deliberately do not reuse the library's
// finite-difference or assembly code paths so that the checks stay
// independent of what they verify.
namespace zsg::testing {

// Central difference of a scalar function, one coordinate at a time.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& z0,
                          double h = 1e-6) {
  Vector g(z0.size());
  Vector z = z0;
  for (int k = 0; k < z0.size(); ++k) {
    z(k) = z0(k) + h;
    const double fp = f(z);
    z(k) = z0(k) - h;
    const double fm = f(z);
    z(k) = z0(k);
    g(k) = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& z0,
                          int out_dim, double h = 1e-6) {
  Matrix J(out_dim, z0.size());
  Vector z = z0;
  for (int k = 0; k < z0.size(); ++k) {
    z(k) = z0(k) + h;
    const Vector fp = f(z);
    z(k) = z0(k) - h;
    const Vector fm = f(z);
    z(k) = z0(k);
    J.col(k) = (fp - fm) / (2.0 * h);
  }
  return J;
}

inline Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& z0,
                         double h = 1e-4) {
  const int d = static_cast<int>(z0.size());
  Matrix H(d, d);
  const double f0 = f(z0);
  Vector z = z0;
  for (int i = 0; i < d; ++i) {
    z(i) = z0(i) + h;
    const double fp = f(z);
    z(i) = z0(i) - h;
    const double fm = f(z);
    z(i) = z0(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (int j = i + 1; j < d; ++j) {
      z(i) = z0(i) + h; z(j) = z0(j) + h;
      const double a = f(z);
      z(j) = z0(j) - h;
      const double b = f(z);
      z(i) = z0(i) - h; z(j) = z0(j) + h;
      const double c = f(z);
      z(j) = z0(j) - h;
      const double d2 = f(z);
      z(i) = z0(i); z(j) = z0(j);
      H(i, j) = H(j, i) = (a - b - c + d2) / (4.0 * h * h);
    }
  }
  return H;
}

// Single-agent discrete LQR backward recursion (independent Riccati oracle):
// x' = A x + B u, cost sum x'Qx + u'Ru + terminal x'Qf x. Returns the
// stage-1 feedback law u = -K1 x.
inline Matrix lqr_gain_stage1(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                              const Matrix& Qf, int K) {
  Matrix P = Qf;
  Matrix gain;
  for (int t = K; t >= 1; --t) {
    const Matrix S = R + B.transpose() * P * B;
    gain = S.ldlt().solve(B.transpose() * P * A);
    P = Q + A.transpose() * P * (A - B * gain);
  }
  return gain;
}

// Deterministic random control sequences (documented fixed seed).
inline std::pair<std::vector<Vector>, std::vector<Vector>> random_controls(
    const GameDefinition& game, unsigned seed, double scale = 0.5) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<Vector> u1(game.horizon), u2(game.horizon);
  for (int t = 0; t < game.horizon; ++t) {
    u1[t] = Vector::NullaryExpr(game.control_dim(1), [&](int) { return dist(rng); });
    u2[t] = Vector::NullaryExpr(game.control_dim(2), [&](int) { return dist(rng); });
  }
  return {std::move(u1), std::move(u2)};
}

// Extracts the (constant) LQ data of a linear-quadratic game by evaluating
// its derivatives at the zero rollout. Only valid for LQ games.
inline std::pair<std::vector<LqStage>, ValueQuadratic> lq_data(const GameDefinition& game) {
  const Trajectory traj = rollout_zero(game);
  const GameDerivatives derivs = evaluate_derivatives(game, traj);
  std::vector<LqStage> stages(game.horizon);
  for (int t = 1; t <= game.horizon; ++t) {
    const StageDerivatives& sd = derivs.at(t);
    LqStage& s = stages[t - 1];
    s.A = sd.A;
    s.B1 = sd.B1;
    s.B2 = sd.B2;
    // Affine part: f(0) with the zero state mapped through; for LQ games in
    // this library the stage data is state-independent, so read the drift
    // from the dynamics at the origin.
    s.c = game.dynamics(t, Vector::Zero(game.state_dim), Vector::Zero(game.control_dim(1)),
                        Vector::Zero(game.control_dim(2)));
    // Quadratic model exact for LQ: value and gradient at the zero point.
    s.H = sd.cost_hess;
    Vector z0(game.stacked_dim());
    z0 << traj.x(t), traj.u1(t), traj.u2(t);
    s.g = sd.cost_grad - s.H * z0;
    s.constant = 0.0;
  }
  ValueQuadratic terminal;
  terminal.V2 = derivs.terminal.hess;
  terminal.V1 = derivs.terminal.grad - terminal.V2 * traj.x(game.horizon + 1);
  terminal.v0 = 0.0;
  terminal.stage = game.horizon + 1;
  return {std::move(stages), terminal};
}

}  // namespace zsg::testing
