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

#include "zsgames/problems.hpp"

#include <cmath>

#include "zsgames/constrained.hpp"
#include "zsgames/olne_solver.hpp"

namespace zsg {

GameDefinition make_scalar_lq(const ScalarLqParams& p) {
  if (p.q < 0.0 || p.r1 <= 0.0 || p.r2 <= 0.0) throw InputError("scalar_lq: weights must be positive");
  if (p.K < 1) throw InputError("scalar_lq: K must be >= 1");

  GameDefinition game;
  game.horizon = p.K;
  game.state_dim = 1;
  game.control_dims = {1, 1};
  game.initial_state = Vector::Constant(1, p.x1);

  game.dynamics = [](int, const Vector& x, const Vector& u1, const Vector& u2) {
    return Vector::Constant(1, x(0) + u1(0) + u2(0));
  };
  const double r1 = p.r1, r2 = p.r2, q = p.q;
  game.stage_cost = [r1, r2](int, const Vector&, const Vector& u1, const Vector& u2) {
    return r1 * u1(0) * u1(0) - r2 * u2(0) * u2(0);
  };
  game.terminal_cost = [q](const Vector& x) { return q * x(0) * x(0); };

  game.stage_cost_derivatives = [r1, r2](int, const Vector&, const Vector& u1,
                                         const Vector& u2) {
    StageCostDerivatives d;
    d.grad = Vector::Zero(3);
    d.grad(1) = 2.0 * r1 * u1(0);
    d.grad(2) = -2.0 * r2 * u2(0);
    d.hess = Matrix::Zero(3, 3);
    d.hess(1, 1) = 2.0 * r1;
    d.hess(2, 2) = -2.0 * r2;
    return d;
  };
  game.dynamics_jacobians = [](int, const Vector&, const Vector&, const Vector&) {
    DynamicsJacobians j;
    j.A = Matrix::Constant(1, 1, 1.0);
    j.B1 = Matrix::Constant(1, 1, 1.0);
    j.B2 = Matrix::Constant(1, 1, 1.0);
    return j;
  };
  game.dynamics_hessians = [](int, const Vector&, const Vector&, const Vector&) {
    return std::vector<Matrix>{Matrix::Zero(3, 3)};
  };
  game.terminal_cost_derivatives = [q](const Vector& x) {
    return std::make_pair(Vector::Constant(1, 2.0 * q * x(0)), Matrix::Constant(1, 1, 2.0 * q));
  };
  return game;
}

GameDefinition make_double_integrator_pursuit(const DoubleIntegratorParams& p) {
  if (p.dt <= 0.0) throw InputError("double_integrator: dt must be positive");
  if (p.K < 1) throw InputError("double_integrator: K must be >= 1");
  if (p.r1 <= 0.0 || p.r2 <= 0.0) throw InputError("double_integrator: control weights must be positive");
  if (p.x1.size() != 8) throw InputError("double_integrator: x1 must have 8 entries");

  const int n = 8, m = 2;
  // Relative position selector: D x = p1 - p2.
  Matrix D = Matrix::Zero(2, n);
  D(0, 0) = 1.0; D(0, 4) = -1.0;
  D(1, 1) = 1.0; D(1, 5) = -1.0;

  Matrix A = Matrix::Identity(n, n);
  A(0, 2) = p.dt; A(1, 3) = p.dt;
  A(4, 6) = p.dt; A(5, 7) = p.dt;
  Matrix B1 = Matrix::Zero(n, m), B2 = Matrix::Zero(n, m);
  B1(2, 0) = p.dt; B1(3, 1) = p.dt;
  B2(6, 0) = p.dt; B2(7, 1) = p.dt;

  GameDefinition game;
  game.horizon = p.K;
  game.state_dim = n;
  game.control_dims = {m, m};
  game.initial_state = p.x1;

  game.dynamics = [A, B1, B2](int, const Vector& x, const Vector& u1, const Vector& u2) {
    return Vector(A * x + B1 * u1 + B2 * u2);
  };
  const double w = p.w_pos, wf = p.w_terminal, r1 = p.r1, r2 = p.r2;
  game.stage_cost = [D, w, r1, r2](int, const Vector& x, const Vector& u1, const Vector& u2) {
    return w * (D * x).squaredNorm() + r1 * u1.squaredNorm() - r2 * u2.squaredNorm();
  };
  game.terminal_cost = [D, wf](const Vector& x) { return wf * (D * x).squaredNorm(); };

  const Matrix Qx = 2.0 * w * D.transpose() * D;
  game.stage_cost_derivatives = [D, Qx, w, r1, r2, n, m](int, const Vector& x, const Vector& u1,
                                                         const Vector& u2) {
    StageCostDerivatives d;
    d.grad = Vector::Zero(n + 2 * m);
    d.grad.segment(0, n) = 2.0 * w * D.transpose() * (D * x);
    d.grad.segment(n, m) = 2.0 * r1 * u1;
    d.grad.segment(n + m, m) = -2.0 * r2 * u2;
    d.hess = Matrix::Zero(n + 2 * m, n + 2 * m);
    d.hess.topLeftCorner(n, n) = Qx;
    d.hess.block(n, n, m, m) = 2.0 * r1 * Matrix::Identity(m, m);
    d.hess.block(n + m, n + m, m, m) = -2.0 * r2 * Matrix::Identity(m, m);
    return d;
  };
  game.dynamics_jacobians = [A, B1, B2](int, const Vector&, const Vector&, const Vector&) {
    return DynamicsJacobians{A, B1, B2};
  };
  game.dynamics_hessians = [n, m](int, const Vector&, const Vector&, const Vector&) {
    return std::vector<Matrix>(n, Matrix::Zero(n + 2 * m, n + 2 * m));
  };
  game.terminal_cost_derivatives = [D, wf, n](const Vector& x) {
    return std::make_pair(Vector(2.0 * wf * D.transpose() * (D * x)),
                          Matrix(2.0 * wf * D.transpose() * D));
  };
  return game;
}

GameDefinition make_unicycle_pursuit(const UnicycleParams& p) {
  if (p.dt <= 0.0) throw InputError("unicycle: dt must be positive");
  if (p.K < 1) throw InputError("unicycle: K must be >= 1");
  if (p.x1.size() != 6) throw InputError("unicycle: x1 must have 6 entries");

  const int n = 6, m = 2, d = n + 2 * m;
  Matrix D = Matrix::Zero(2, n);
  D(0, 0) = 1.0; D(0, 3) = -1.0;
  D(1, 1) = 1.0; D(1, 4) = -1.0;

  const double dt = p.dt;
  GameDefinition game;
  game.horizon = p.K;
  game.state_dim = n;
  game.control_dims = {m, m};
  game.initial_state = p.x1;

  // Per-vehicle kinematics: p' = p + dt * v * (cos h, sin h), h' = h + dt * w.
  game.dynamics = [dt](int, const Vector& x, const Vector& u1, const Vector& u2) {
    Vector next(6);
    next(0) = x(0) + dt * u1(0) * std::cos(x(2));
    next(1) = x(1) + dt * u1(0) * std::sin(x(2));
    next(2) = x(2) + dt * u1(1);
    next(3) = x(3) + dt * u2(0) * std::cos(x(5));
    next(4) = x(4) + dt * u2(0) * std::sin(x(5));
    next(5) = x(5) + dt * u2(1);
    return next;
  };
  const double w = p.w_pos, wf = p.w_terminal, r1 = p.r1, r2 = p.r2, s1 = p.s1, s2 = p.s2;
  game.stage_cost = [D, w, r1, r2, s1, s2](int, const Vector& x, const Vector& u1,
                                           const Vector& u2) {
    const double v1 = u1(0), v2 = u2(0);
    return w * (D * x).squaredNorm() + r1 * u1.squaredNorm() + s1 * v1 * v1 * v1 * v1 -
           r2 * u2.squaredNorm() - s2 * v2 * v2 * v2 * v2;
  };
  game.terminal_cost = [D, wf](const Vector& x) { return wf * (D * x).squaredNorm(); };

  game.stage_cost_derivatives = [D, w, r1, r2, s1, s2, n, m, d](int, const Vector& x,
                                                                const Vector& u1,
                                                                const Vector& u2) {
    StageCostDerivatives out;
    out.grad = Vector::Zero(d);
    out.grad.segment(0, n) = 2.0 * w * D.transpose() * (D * x);
    const double v1 = u1(0), v2 = u2(0);
    out.grad(n) = 2.0 * r1 * v1 + 4.0 * s1 * v1 * v1 * v1;
    out.grad(n + 1) = 2.0 * r1 * u1(1);
    out.grad(n + m) = -2.0 * r2 * v2 - 4.0 * s2 * v2 * v2 * v2;
    out.grad(n + m + 1) = -2.0 * r2 * u2(1);
    out.hess = Matrix::Zero(d, d);
    out.hess.topLeftCorner(n, n) = 2.0 * w * D.transpose() * D;
    out.hess(n, n) = 2.0 * r1 + 12.0 * s1 * v1 * v1;
    out.hess(n + 1, n + 1) = 2.0 * r1;
    out.hess(n + m, n + m) = -2.0 * r2 - 12.0 * s2 * v2 * v2;
    out.hess(n + m + 1, n + m + 1) = -2.0 * r2;
    return out;
  };
  game.dynamics_jacobians = [dt, n, m](int, const Vector& x, const Vector& u1,
                                       const Vector& u2) {
    DynamicsJacobians j;
    j.A = Matrix::Identity(n, n);
    j.B1 = Matrix::Zero(n, m);
    j.B2 = Matrix::Zero(n, m);
    const double c1 = std::cos(x(2)), s1v = std::sin(x(2));
    const double c2 = std::cos(x(5)), s2v = std::sin(x(5));
    j.A(0, 2) = -dt * u1(0) * s1v;
    j.A(1, 2) = dt * u1(0) * c1;
    j.A(3, 5) = -dt * u2(0) * s2v;
    j.A(4, 5) = dt * u2(0) * c2;
    j.B1(0, 0) = dt * c1;
    j.B1(1, 0) = dt * s1v;
    j.B1(2, 1) = dt;
    j.B2(3, 0) = dt * c2;
    j.B2(4, 0) = dt * s2v;
    j.B2(5, 1) = dt;
    return j;
  };
  game.dynamics_hessians = [dt, n, d, m](int, const Vector& x, const Vector& u1,
                                         const Vector& u2) {
    std::vector<Matrix> H(n, Matrix::Zero(d, d));
    // Vehicle 1: heading at z index 2, speed at z index n (= 6).
    const double c1 = std::cos(x(2)), s1v = std::sin(x(2));
    H[0](2, 2) = -dt * u1(0) * c1;
    H[0](2, n) = H[0](n, 2) = -dt * s1v;
    H[1](2, 2) = -dt * u1(0) * s1v;
    H[1](2, n) = H[1](n, 2) = dt * c1;
    // Vehicle 2: heading at z index 5, speed at z index n + m (= 8).
    const double c2 = std::cos(x(5)), s2v = std::sin(x(5));
    H[3](5, 5) = -dt * u2(0) * c2;
    H[3](5, n + m) = H[3](n + m, 5) = -dt * s2v;
    H[4](5, 5) = -dt * u2(0) * s2v;
    H[4](5, n + m) = H[4](n + m, 5) = dt * c2;
    return H;
  };
  game.terminal_cost_derivatives = [D, wf](const Vector& x) {
    return std::make_pair(Vector(2.0 * wf * D.transpose() * (D * x)),
                          Matrix(2.0 * wf * D.transpose() * D));
  };
  return game;
}

namespace {

ControlBounds broadcast_bounds(const GameDefinition& base, double lo1, double hi1, double lo2,
                               double hi2) {
  ControlBounds bounds;
  bounds.agent1.resize(base.horizon);
  bounds.agent2.resize(base.horizon);
  for (int t = 1; t <= base.horizon; ++t) {
    bounds.agent1[t - 1] = {Vector::Constant(base.control_dim(1), lo1),
                            Vector::Constant(base.control_dim(1), hi1)};
    bounds.agent2[t - 1] = {Vector::Constant(base.control_dim(2), lo2),
                            Vector::Constant(base.control_dim(2), hi2)};
  }
  return bounds;
}

bool bounds_clip(const GameDefinition& game, const Trajectory& traj) {
  for (int agent = 1; agent <= 2; ++agent) {
    for (int t = 1; t <= game.horizon; ++t) {
      const StageBounds& sb = game.stage_bounds(agent, t);
      const Vector& u = traj.u(agent, t);
      if (((u.array() < sb.lower.array()) || (u.array() > sb.upper.array())).any())
        return true;
    }
  }
  return false;
}

}  // namespace

GameDefinition make_bounded_lq(const BoundedLqParams& params) {
  GameDefinition base;
  if (params.base == "scalar_lq") {
    base = make_scalar_lq(params.scalar);
  } else if (params.base == "double_integrator") {
    base = make_double_integrator_pursuit(params.integrator);
  } else {
    throw InputError("bounded_lq: base must be scalar_lq or double_integrator");
  }
  if (params.lower1 >= params.upper1 || params.lower2 >= params.upper2)
    throw InputError("bounded_lq: empty bound box");

  const OlneSolution unconstrained = solve_olne(base);
  if (!unconstrained.log.converged)
    throw NumericalError("bounded_lq: unconstrained base solve did not converge");

  GameDefinition game = base;
  game.bounds = broadcast_bounds(base, params.lower1, params.upper1, params.lower2, params.upper2);
  if (!bounds_clip(game, unconstrained.trajectory))
    throw InputError("bounded_lq: bounds do not clip the unconstrained equilibrium");

  double shrink = 1.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    game.bounds = broadcast_bounds(base, shrink * params.lower1, shrink * params.upper1,
                                   shrink * params.lower2, shrink * params.upper2);
    const OlneSolution sol = solve_constrained_olne(game);
    if (sol.log.converged) {
      const ActiveSetClassification cls =
          classify_active_set(game, sol.trajectory, sol.multipliers);
      if (cls.any_active && cls.strict_complementarity) return game;
    }
    shrink *= 0.5;
  }
  throw NumericalError(
      "bounded_lq: failed to produce an active strictly-complementary bound after retries");
}

GameDefinition make_sg1_bounded() {
  BoundedLqParams p;
  p.base = "scalar_lq";
  p.scalar = ScalarLqParams{};  // q=1, r1=1, r2=4, K=1, x1=1
  p.lower2 = -10.0;
  p.upper2 = 0.125;
  return make_bounded_lq(p);
}

namespace {

using nlohmann::json;

void check_keys(const json& params, std::initializer_list<const char*> allowed) {
  for (auto it = params.begin(); it != params.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok) throw ConfigError("unknown problem parameter: " + it.key());
  }
}

Vector parse_vector(const json& v) {
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out(i) = v[i].get<double>();
  return out;
}

ScalarLqParams scalar_params(const json& p) {
  check_keys(p, {"q", "r1", "r2", "K", "x1"});
  ScalarLqParams s;
  s.q = p.value("q", s.q);
  s.r1 = p.value("r1", s.r1);
  s.r2 = p.value("r2", s.r2);
  s.K = p.value("K", s.K);
  s.x1 = p.value("x1", s.x1);
  return s;
}

DoubleIntegratorParams integrator_params(const json& p) {
  check_keys(p, {"dt", "K", "w_pos", "w_terminal", "r1", "r2", "x1"});
  DoubleIntegratorParams d;
  d.dt = p.value("dt", d.dt);
  d.K = p.value("K", d.K);
  d.w_pos = p.value("w_pos", d.w_pos);
  d.w_terminal = p.value("w_terminal", d.w_terminal);
  d.r1 = p.value("r1", d.r1);
  d.r2 = p.value("r2", d.r2);
  if (p.contains("x1")) d.x1 = parse_vector(p["x1"]);
  return d;
}

UnicycleParams unicycle_params(const json& p) {
  check_keys(p, {"dt", "K", "w_pos", "w_terminal", "r1", "r2", "s1", "s2", "x1"});
  UnicycleParams u;
  u.dt = p.value("dt", u.dt);
  u.K = p.value("K", u.K);
  u.w_pos = p.value("w_pos", u.w_pos);
  u.w_terminal = p.value("w_terminal", u.w_terminal);
  u.r1 = p.value("r1", u.r1);
  u.r2 = p.value("r2", u.r2);
  u.s1 = p.value("s1", u.s1);
  u.s2 = p.value("s2", u.s2);
  if (p.contains("x1")) u.x1 = parse_vector(p["x1"]);
  return u;
}

BoundedLqParams bounded_params(const json& p) {
  check_keys(p, {"base", "scalar", "integrator", "lower1", "upper1", "lower2", "upper2"});
  BoundedLqParams b;
  b.base = p.value("base", b.base);
  if (p.contains("scalar")) b.scalar = scalar_params(p["scalar"]);
  if (p.contains("integrator")) b.integrator = integrator_params(p["integrator"]);
  b.lower1 = p.value("lower1", b.lower1);
  b.upper1 = p.value("upper1", b.upper1);
  b.lower2 = p.value("lower2", b.lower2);
  b.upper2 = p.value("upper2", b.upper2);
  return b;
}

}  // namespace

GameDefinition make_problem(const std::string& name, const nlohmann::json& params) {
  if (name == "scalar_lq") return make_scalar_lq(scalar_params(params));
  if (name == "double_integrator") return make_double_integrator_pursuit(integrator_params(params));
  if (name == "unicycle") return make_unicycle_pursuit(unicycle_params(params));
  if (name == "bounded_lq") return make_bounded_lq(bounded_params(params));
  if (name == "sg1_bounded") {
    check_keys(params, {});
    return make_sg1_bounded();
  }
  throw ConfigError("unknown problem: " + name);
}

int problem_horizon(const std::string& name, const nlohmann::json& params) {
  if (name == "scalar_lq") return scalar_params(params).K;
  if (name == "double_integrator") return integrator_params(params).K;
  if (name == "unicycle") return unicycle_params(params).K;
  if (name == "bounded_lq") {
    const BoundedLqParams b = bounded_params(params);
    return b.base == "scalar_lq" ? b.scalar.K : b.integrator.K;
  }
  if (name == "sg1_bounded") return 1;
  throw ConfigError("unknown problem: " + name);
}

}  // namespace zsg
