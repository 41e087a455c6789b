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

#include "zsgames/game.hpp"

#include <cmath>

namespace zsg {

namespace {

void check_control_sequence(const GameDefinition& game, const std::vector<Vector>& u,
                            int agent, const char* what) {
  if (static_cast<int>(u.size()) != game.horizon) {
    throw InputError(std::string(what) + ": expected " + std::to_string(game.horizon) +
                     " controls for agent " + std::to_string(agent) + ", got " +
                     std::to_string(u.size()));
  }
  const int m = game.control_dim(agent);
  for (int t = 1; t <= game.horizon; ++t) {
    if (u[t - 1].size() != m) {
      throw InputError(std::string(what) + ": stage " + std::to_string(t) + " control of agent " +
                       std::to_string(agent) + " has dimension " +
                       std::to_string(u[t - 1].size()) + ", expected " + std::to_string(m));
    }
  }
}

void check_finite_state(const Vector& x, int stage) {
  if (!x.allFinite()) {
    throw NumericalError("dynamics produced a non-finite state at stage " +
                         std::to_string(stage));
  }
}

}  // namespace

const StageBounds& GameDefinition::stage_bounds(int agent, int t) const {
  if (!bounds) throw ConfigError("game has no control bounds");
  const auto& per_agent = (agent == 1) ? bounds->agent1 : bounds->agent2;
  return per_agent[t - 1];
}

void GameDefinition::validate() const {
  if (horizon < 1) throw InputError("horizon must be >= 1");
  if (state_dim < 1) throw InputError("state_dim must be >= 1");
  if (control_dims[0] < 1 || control_dims[1] < 1)
    throw InputError("control dimensions must be >= 1");
  if (initial_state.size() != state_dim)
    throw InputError("initial_state has dimension " + std::to_string(initial_state.size()) +
                     ", expected " + std::to_string(state_dim));
  if (!dynamics || !stage_cost || !terminal_cost)
    throw InputError("dynamics, stage_cost and terminal_cost evaluators are required");
  if (bounds) {
    for (int agent = 1; agent <= 2; ++agent) {
      const auto& per_agent = (agent == 1) ? bounds->agent1 : bounds->agent2;
      if (static_cast<int>(per_agent.size()) != horizon)
        throw InputError("bounds for agent " + std::to_string(agent) + " must cover all stages");
      const int m = control_dim(agent);
      for (int t = 1; t <= horizon; ++t) {
        const auto& sb = per_agent[t - 1];
        if (sb.lower.size() != m || sb.upper.size() != m)
          throw InputError("bound dimension mismatch at stage " + std::to_string(t));
        if ((sb.lower.array() > sb.upper.array()).any())
          throw InputError("lower bound exceeds upper bound at stage " + std::to_string(t) +
                           " for agent " + std::to_string(agent));
      }
    }
  }
}

AffinePolicySet zero_policies(const GameDefinition& game, int agent) {
  AffinePolicySet set;
  set.stages.resize(game.horizon);
  const int m = game.control_dim(agent);
  for (auto& p : set.stages) {
    p.gain = Matrix::Zero(m, game.state_dim);
    p.u_ref = Vector::Zero(m);
    p.x_ref = Vector::Zero(game.state_dim);
  }
  return set;
}

AffinePolicySet embed_open_loop(const Trajectory& traj, int agent) {
  AffinePolicySet set;
  const int K = traj.horizon();
  set.stages.resize(K);
  for (int t = 1; t <= K; ++t) {
    auto& p = set.at(t);
    const Vector& u = traj.u(agent, t);
    p.gain = Matrix::Zero(u.size(), traj.x(t).size());
    p.u_ref = u;
    p.x_ref = traj.x(t);
  }
  return set;
}

Trajectory rollout(const GameDefinition& game, const std::vector<Vector>& u1,
                   const std::vector<Vector>& u2) {
  check_control_sequence(game, u1, 1, "rollout");
  check_control_sequence(game, u2, 2, "rollout");
  Trajectory traj;
  traj.states.resize(game.horizon + 1);
  traj.controls1 = u1;
  traj.controls2 = u2;
  traj.states[0] = game.initial_state;
  for (int t = 1; t <= game.horizon; ++t) {
    traj.states[t] = game.dynamics(t, traj.states[t - 1], u1[t - 1], u2[t - 1]);
    if (traj.states[t].size() != game.state_dim)
      throw InputError("dynamics at stage " + std::to_string(t) + " returned dimension " +
                       std::to_string(traj.states[t].size()));
    check_finite_state(traj.states[t], t);
  }
  return traj;
}

Trajectory rollout_policy(const GameDefinition& game, const AffinePolicySet& policies1,
                          const AffinePolicySet& policies2) {
  if (policies1.horizon() != game.horizon || policies2.horizon() != game.horizon)
    throw InputError("rollout_policy: policy sets must cover all stages");
  Trajectory traj;
  traj.states.resize(game.horizon + 1);
  traj.controls1.resize(game.horizon);
  traj.controls2.resize(game.horizon);
  traj.states[0] = game.initial_state;
  for (int t = 1; t <= game.horizon; ++t) {
    const Vector& x = traj.states[t - 1];
    traj.controls1[t - 1] = policies1.at(t)(x);
    traj.controls2[t - 1] = policies2.at(t)(x);
    if (traj.controls1[t - 1].size() != game.control_dim(1) ||
        traj.controls2[t - 1].size() != game.control_dim(2))
      throw InputError("rollout_policy: policy output dimension mismatch at stage " +
                       std::to_string(t));
    traj.states[t] = game.dynamics(t, x, traj.controls1[t - 1], traj.controls2[t - 1]);
    check_finite_state(traj.states[t], t);
  }
  return traj;
}

Trajectory rollout_zero(const GameDefinition& game) {
  std::vector<Vector> u1(game.horizon, Vector::Zero(game.control_dim(1)));
  std::vector<Vector> u2(game.horizon, Vector::Zero(game.control_dim(2)));
  return rollout(game, u1, u2);
}

double total_cost(const GameDefinition& game, const Trajectory& traj) {
  if (traj.horizon() != game.horizon)
    throw InputError("total_cost: trajectory horizon mismatch");
  double J = 0.0;
  for (int t = 1; t <= game.horizon; ++t) {
    const double c = game.stage_cost(t, traj.x(t), traj.u1(t), traj.u2(t));
    if (!std::isfinite(c))
      throw NumericalError("stage cost is non-finite at stage " + std::to_string(t));
    J += c;
  }
  const double cf = game.terminal_cost(traj.x(game.horizon + 1));
  if (!std::isfinite(cf))
    throw NumericalError("terminal cost is non-finite at stage " +
                         std::to_string(game.horizon + 1));
  return J + cf;
}

double agent_cost(const GameDefinition& game, const Trajectory& traj, int agent) {
  const double J = total_cost(game, traj);
  return agent == 1 ? J : -J;
}

double dynamics_defect(const GameDefinition& game, const Trajectory& traj) {
  double defect = 0.0;
  for (int t = 1; t <= game.horizon; ++t) {
    const Vector f = game.dynamics(t, traj.x(t), traj.u1(t), traj.u2(t));
    defect = std::max(defect, (traj.x(t + 1) - f).lpNorm<Eigen::Infinity>());
  }
  return defect;
}

bool dynamically_consistent(const GameDefinition& game, const Trajectory& traj, double tol) {
  return dynamics_defect(game, traj) <= tol;
}

}  // namespace zsg
