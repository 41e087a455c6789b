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

#include "zsgames/derivatives.hpp"

#include <cmath>

namespace zsg {

namespace {

double fd_step(const Vector& z) {
  return std::max(1e-6, 1e-7 * (1.0 + z.lpNorm<Eigen::Infinity>()));
}

// Larger step for second differences of raw values: balances the eps/h^2
// roundoff against h^2 truncation.
double fd_step_hess(const Vector& z) {
  return std::max(1e-4, 1e-5 * (1.0 + z.lpNorm<Eigen::Infinity>()));
}

// Unpacks a stacked z = (x, u1, u2) into views for evaluator calls.
struct Unstacked {
  Vector x, u1, u2;
  Unstacked(const Vector& z, int n, int m1, int m2)
      : x(z.segment(0, n)), u1(z.segment(n, m1)), u2(z.segment(n + m1, m2)) {}
};

template <typename ScalarFn>
Vector central_gradient(const ScalarFn& f, const Vector& z0, double h) {
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

template <typename ScalarFn>
Matrix central_hessian_of_values(const ScalarFn& f, const Vector& z0, double h) {
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
      const double fpp = f(z);
      z(j) = z0(j) - h;
      const double fpm = f(z);
      z(i) = z0(i) - h; z(j) = z0(j) + h;
      const double fmp = f(z);
      z(j) = z0(j) - h;
      const double fmm = f(z);
      z(i) = z0(i); z(j) = z0(j);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return 0.5 * (H + H.transpose());
}

template <typename VectorFn>
Matrix central_jacobian(const VectorFn& f, const Vector& z0, double h, int out_dim) {
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

void check_finite(const Matrix& m, const char* block, int stage) {
  if (!m.allFinite())
    throw NumericalError(std::string("non-finite derivative in block ") + block + " at stage " +
                         std::to_string(stage));
}

void check_finite(const Vector& v, const char* block, int stage) {
  if (!v.allFinite())
    throw NumericalError(std::string("non-finite derivative in block ") + block + " at stage " +
                         std::to_string(stage));
}

}  // namespace

Matrix StageDerivatives::curvature_contraction(const Vector& w) const {
  if (!has_dynamics_curvature())
    throw ConfigError("dynamics curvature requested but not evaluated");
  const int d = n + m1 + m2;
  Matrix H = Matrix::Zero(d, d);
  for (int k = 0; k < n; ++k) H += w(k) * dyn_hess[k];
  return H;
}

GameDerivatives evaluate_derivatives(const GameDefinition& game, const Trajectory& traj,
                                     bool with_dynamics_curvature, DerivativeOrder order) {
  if (traj.horizon() != game.horizon)
    throw InputError("evaluate_derivatives: trajectory horizon mismatch");
  const int n = game.state_dim, m1 = game.control_dims[0], m2 = game.control_dims[1];
  const int d = n + m1 + m2;

  GameDerivatives out;
  out.stages.resize(game.horizon);

  for (int t = 1; t <= game.horizon; ++t) {
    StageDerivatives& sd = out.stages[t - 1];
    sd.n = n; sd.m1 = m1; sd.m2 = m2;
    Vector z0(d);
    z0 << traj.x(t), traj.u1(t), traj.u2(t);
    const double h = fd_step(z0);

    auto cost_at = [&](const Vector& z) {
      Unstacked s(z, n, m1, m2);
      return game.stage_cost(t, s.x, s.u1, s.u2);
    };
    auto dyn_at = [&](const Vector& z) {
      Unstacked s(z, n, m1, m2);
      return game.dynamics(t, s.x, s.u1, s.u2);
    };

    if (game.has_analytic_cost()) {
      StageCostDerivatives cd = game.stage_cost_derivatives(t, traj.x(t), traj.u1(t), traj.u2(t));
      if (cd.grad.size() != d || cd.hess.rows() != d || cd.hess.cols() != d)
        throw InputError("cost derivative callback returned wrong dimensions at stage " +
                         std::to_string(t));
      sd.cost_grad = std::move(cd.grad);
      if (order == DerivativeOrder::Second) sd.cost_hess = std::move(cd.hess);
    } else {
      sd.cost_grad = central_gradient(cost_at, z0, h);
      if (order == DerivativeOrder::Second)
        sd.cost_hess = central_hessian_of_values(cost_at, z0, fd_step_hess(z0));
    }
    check_finite(sd.cost_grad, "cost_grad", t);
    if (sd.has_cost_hessian()) check_finite(sd.cost_hess, "cost_hess", t);

    if (game.has_analytic_dynamics()) {
      DynamicsJacobians dj = game.dynamics_jacobians(t, traj.x(t), traj.u1(t), traj.u2(t));
      sd.A = std::move(dj.A);
      sd.B1 = std::move(dj.B1);
      sd.B2 = std::move(dj.B2);
      if (sd.A.rows() != n || sd.A.cols() != n || sd.B1.cols() != m1 || sd.B2.cols() != m2)
        throw InputError("dynamics Jacobian callback returned wrong dimensions at stage " +
                         std::to_string(t));
    } else {
      const Matrix J = central_jacobian(dyn_at, z0, h, n);
      sd.A = J.leftCols(n);
      sd.B1 = J.middleCols(n, m1);
      sd.B2 = J.rightCols(m2);
    }
    check_finite(sd.A, "A", t);
    check_finite(sd.B1, "B1", t);
    check_finite(sd.B2, "B2", t);

    if (with_dynamics_curvature) {
      if (game.dynamics_hessians) {
        sd.dyn_hess = game.dynamics_hessians(t, traj.x(t), traj.u1(t), traj.u2(t));
        if (static_cast<int>(sd.dyn_hess.size()) != n)
          throw InputError("dynamics Hessian callback returned wrong count at stage " +
                           std::to_string(t));
      } else {
        sd.dyn_hess.resize(n);
        const double hh = fd_step_hess(z0);
        for (int k = 0; k < n; ++k) {
          auto comp = [&](const Vector& z) { return dyn_at(z)(k); };
          sd.dyn_hess[k] = central_hessian_of_values(comp, z0, hh);
        }
      }
      for (int k = 0; k < n; ++k) check_finite(sd.dyn_hess[k], "dyn_hess", t);
    }
  }

  const Vector& xf = traj.x(game.horizon + 1);
  if (game.terminal_cost_derivatives) {
    auto [g, H] = game.terminal_cost_derivatives(xf);
    out.terminal.grad = std::move(g);
    out.terminal.hess = std::move(H);
  } else {
    auto term = [&](const Vector& x) { return game.terminal_cost(x); };
    out.terminal.grad = central_gradient(term, xf, fd_step(xf));
    out.terminal.hess = central_hessian_of_values(term, xf, fd_step_hess(xf));
  }
  check_finite(out.terminal.grad, "terminal_grad", game.horizon + 1);
  check_finite(out.terminal.hess, "terminal_hess", game.horizon + 1);

  return out;
}

const FdAuditBlock* FdAuditReport::worst() const {
  const FdAuditBlock* w = nullptr;
  for (const auto& b : blocks)
    if (!w || b.max_rel_error > w->max_rel_error) w = &b;
  return w;
}

namespace {

double block_rel_error(const Matrix& analytic, const Matrix& fd) {
  double e = 0.0;
  for (int i = 0; i < analytic.rows(); ++i)
    for (int j = 0; j < analytic.cols(); ++j)
      e = std::max(e, std::abs(analytic(i, j) - fd(i, j)) / (1.0 + std::abs(analytic(i, j))));
  return e;
}

double block_rel_error(const Vector& analytic, const Vector& fd) {
  double e = 0.0;
  for (int i = 0; i < analytic.size(); ++i)
    e = std::max(e, std::abs(analytic(i) - fd(i)) / (1.0 + std::abs(analytic(i))));
  return e;
}

}  // namespace

FdAuditReport finite_difference_audit(const GameDefinition& game, const Trajectory& traj,
                                      const GameDerivatives& analytic, double rel_tol) {
  const int n = game.state_dim, m1 = game.control_dims[0], m2 = game.control_dims[1];
  FdAuditReport report;
  report.rel_tol = rel_tol;

  for (int t = 1; t <= game.horizon; ++t) {
    const StageDerivatives& sd = analytic.at(t);
    Vector z0(n + m1 + m2);
    z0 << traj.x(t), traj.u1(t), traj.u2(t);
    const double h = fd_step(z0);

    auto cost_at = [&](const Vector& z) {
      Unstacked s(z, n, m1, m2);
      return game.stage_cost(t, s.x, s.u1, s.u2);
    };
    auto dyn_at = [&](const Vector& z) {
      Unstacked s(z, n, m1, m2);
      return game.dynamics(t, s.x, s.u1, s.u2);
    };

    report.blocks.push_back(
        {"cost_grad", t, block_rel_error(sd.cost_grad, central_gradient(cost_at, z0, h))});

    const Matrix J = central_jacobian(dyn_at, z0, h, n);
    report.blocks.push_back({"A", t, block_rel_error(sd.A, Matrix(J.leftCols(n)))});
    report.blocks.push_back({"B1", t, block_rel_error(sd.B1, Matrix(J.middleCols(n, m1)))});
    report.blocks.push_back({"B2", t, block_rel_error(sd.B2, Matrix(J.rightCols(m2)))});

    if (sd.has_cost_hessian()) {
      // Differences of the analytic gradient keep Hessian checks at full accuracy.
      Matrix Hfd;
      if (game.has_analytic_cost()) {
        auto grad_at = [&](const Vector& z) -> Vector {
          Unstacked s(z, n, m1, m2);
          return game.stage_cost_derivatives(t, s.x, s.u1, s.u2).grad;
        };
        Hfd = central_jacobian(grad_at, z0, h, n + m1 + m2);
        Hfd = 0.5 * (Hfd + Hfd.transpose()).eval();
      } else {
        Hfd = central_hessian_of_values(cost_at, z0, fd_step_hess(z0));
      }
      report.blocks.push_back({"cost_hess", t, block_rel_error(sd.cost_hess, Hfd)});
    }

    if (sd.has_dynamics_curvature()) {
      double worst = 0.0;
      if (game.has_analytic_dynamics()) {
        auto jac_rows = [&](const Vector& z) -> Matrix {
          Unstacked s(z, n, m1, m2);
          DynamicsJacobians dj = game.dynamics_jacobians(t, s.x, s.u1, s.u2);
          Matrix full(n, n + m1 + m2);
          full << dj.A, dj.B1, dj.B2;
          return full;
        };
        for (int k = 0; k < n; ++k) {
          auto row_k = [&](const Vector& z) -> Vector { return jac_rows(z).row(k).transpose(); };
          Matrix Hk = central_jacobian(row_k, z0, h, n + m1 + m2);
          Hk = 0.5 * (Hk + Hk.transpose()).eval();
          worst = std::max(worst, block_rel_error(sd.dyn_hess[k], Hk));
        }
      } else {
        const double hh = fd_step_hess(z0);
        for (int k = 0; k < n; ++k) {
          auto comp = [&](const Vector& z) { return dyn_at(z)(k); };
          worst = std::max(worst, block_rel_error(sd.dyn_hess[k],
                                                  central_hessian_of_values(comp, z0, hh)));
        }
      }
      report.blocks.push_back({"dyn_hess", t, worst});
    }
  }

  const Vector& xf = traj.x(game.horizon + 1);
  auto term = [&](const Vector& x) { return game.terminal_cost(x); };
  report.blocks.push_back({"terminal_grad", game.horizon + 1,
                           block_rel_error(analytic.terminal.grad,
                                           central_gradient(term, xf, fd_step(xf)))});
  Matrix Hf;
  if (game.terminal_cost_derivatives) {
    auto tgrad = [&](const Vector& x) -> Vector { return game.terminal_cost_derivatives(x).first; };
    Hf = central_jacobian(tgrad, xf, fd_step(xf), game.state_dim);
    Hf = 0.5 * (Hf + Hf.transpose()).eval();
  } else {
    Hf = central_hessian_of_values(term, xf, fd_step_hess(xf));
  }
  report.blocks.push_back(
      {"terminal_hess", game.horizon + 1, block_rel_error(analytic.terminal.hess, Hf)});

  for (const auto& b : report.blocks) report.max_rel_error = std::max(report.max_rel_error, b.max_rel_error);
  report.pass = report.max_rel_error <= rel_tol;
  return report;
}

Matrix stage_lagrangian_hessian(int agent, const StageDerivatives& sd, const Vector& lambda,
                                const std::optional<Vector>& psi,
                                bool include_dynamics_curvature) {
  if (agent != 1 && agent != 2) throw InputError("agent must be 1 or 2");
  if (lambda.size() != sd.n) throw InputError("stage_lagrangian_hessian: lambda dimension mismatch");
  if (psi && psi->size() != (agent == 1 ? sd.m2 : sd.m1))
    throw InputError("stage_lagrangian_hessian: psi dimension mismatch");
  if (!sd.has_cost_hessian())
    throw ConfigError("stage derivatives were evaluated first-order only");
  const double sigma = (agent == 1) ? 1.0 : -1.0;
  Matrix H = sigma * sd.cost_hess;
  if (include_dynamics_curvature) H += sd.curvature_contraction(lambda);
  return H;
}

}  // namespace zsg
