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

#include "zsgames/serialization.hpp"

#include <cstdio>

namespace zsg {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12e", v);
  return buf;
}

JsonValue JsonValue::object() {
  JsonValue v;
  v.kind_ = Kind::Object;
  return v;
}

JsonValue JsonValue::array() {
  JsonValue v;
  v.kind_ = Kind::Array;
  return v;
}

JsonValue& JsonValue::operator[](const std::string& key) {
  if (kind_ == Kind::Null) kind_ = Kind::Object;
  if (kind_ != Kind::Object) throw std::logic_error("JsonValue: not an object");
  for (auto& [k, v] : members_)
    if (k == key) return v;
  members_.emplace_back(key, JsonValue());
  return members_.back().second;
}

void JsonValue::push_back(JsonValue v) {
  if (kind_ == Kind::Null) kind_ = Kind::Array;
  if (kind_ != Kind::Array) throw std::logic_error("JsonValue: not an array");
  items_.push_back(std::move(v));
}

namespace {

void write_escaped(const std::string& s, std::string& out) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
}

}  // namespace

void JsonValue::write(std::string& out) const {
  switch (kind_) {
    case Kind::Null: out += "null"; break;
    case Kind::Bool: out += bool_ ? "true" : "false"; break;
    case Kind::Int: out += std::to_string(int_); break;
    case Kind::Double: out += format_double(double_); break;
    case Kind::String: write_escaped(string_, out); break;
    case Kind::Array: {
      out += '[';
      for (size_t i = 0; i < items_.size(); ++i) {
        if (i) out += ',';
        items_[i].write(out);
      }
      out += ']';
      break;
    }
    case Kind::Object: {
      out += '{';
      for (size_t i = 0; i < members_.size(); ++i) {
        if (i) out += ',';
        write_escaped(members_[i].first, out);
        out += ':';
        members_[i].second.write(out);
      }
      out += '}';
      break;
    }
  }
}

std::string JsonValue::dump() const {
  std::string out;
  write(out);
  return out;
}

JsonValue to_json(const Vector& v) {
  JsonValue arr = JsonValue::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

JsonValue to_json(const Matrix& m) {
  JsonValue rows = JsonValue::array();
  for (int i = 0; i < m.rows(); ++i) {
    JsonValue row = JsonValue::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string trajectory_to_csv(const GameDefinition& game, const Trajectory& traj) {
  const int n = game.state_dim, m1 = game.control_dims[0], m2 = game.control_dims[1];
  std::string out = "t";
  for (int i = 1; i <= n; ++i) out += ",x_" + std::to_string(i);
  for (int i = 1; i <= m1; ++i) out += ",u1_" + std::to_string(i);
  for (int i = 1; i <= m2; ++i) out += ",u2_" + std::to_string(i);
  out += '\n';
  for (int t = 1; t <= game.horizon + 1; ++t) {
    out += std::to_string(t);
    for (int i = 0; i < n; ++i) out += ',' + format_double(traj.x(t)(i));
    if (t <= game.horizon) {
      for (int i = 0; i < m1; ++i) out += ',' + format_double(traj.u1(t)(i));
      for (int i = 0; i < m2; ++i) out += ',' + format_double(traj.u2(t)(i));
    } else {
      // Terminal row: states only, control cells stay empty.
      for (int i = 0; i < m1 + m2; ++i) out += ',';
    }
    out += '\n';
  }
  return out;
}

JsonValue trajectory_to_json(const GameDefinition& game, const Trajectory& traj) {
  JsonValue v = JsonValue::object();
  v["K"] = game.horizon;
  v["n"] = game.state_dim;
  v["m1"] = game.control_dims[0];
  v["m2"] = game.control_dims[1];
  JsonValue states = JsonValue::array();
  for (int t = 1; t <= game.horizon + 1; ++t) states.push_back(to_json(traj.x(t)));
  v["states"] = std::move(states);
  JsonValue u1 = JsonValue::array(), u2 = JsonValue::array();
  for (int t = 1; t <= game.horizon; ++t) {
    u1.push_back(to_json(traj.u1(t)));
    u2.push_back(to_json(traj.u2(t)));
  }
  v["controls1"] = std::move(u1);
  v["controls2"] = std::move(u2);
  return v;
}

JsonValue policies_to_json(const AffinePolicySet& policies, int agent) {
  JsonValue v = JsonValue::object();
  v["agent"] = agent;
  JsonValue stages = JsonValue::array();
  for (int t = 1; t <= policies.horizon(); ++t) {
    const AffinePolicy& p = policies.at(t);
    JsonValue s = JsonValue::object();
    s["t"] = t;
    JsonValue gain = JsonValue::array();  // row-major
    for (int i = 0; i < p.gain.rows(); ++i)
      for (int j = 0; j < p.gain.cols(); ++j) gain.push_back(p.gain(i, j));
    s["gain"] = std::move(gain);
    s["u_ref"] = to_json(p.u_ref);
    s["x_ref"] = to_json(p.x_ref);
    stages.push_back(std::move(s));
  }
  v["stages"] = std::move(stages);
  return v;
}

JsonValue multipliers_to_json(const MultiplierSet& m) {
  JsonValue v = JsonValue::object();
  auto seq = [](const std::vector<Vector>& vs) {
    JsonValue arr = JsonValue::array();
    for (const auto& x : vs) arr.push_back(to_json(x));
    return arr;
  };
  v["lambda1"] = seq(m.lambda1);
  v["lambda2"] = seq(m.lambda2);
  if (m.has_psi()) {
    v["psi1"] = seq(m.psi1);
    v["psi2"] = seq(m.psi2);
  }
  if (m.has_bound_multipliers()) {
    v["nu_lower1"] = seq(m.nu_lower1);
    v["nu_upper1"] = seq(m.nu_upper1);
    v["nu_lower2"] = seq(m.nu_lower2);
    v["nu_upper2"] = seq(m.nu_upper2);
  }
  return v;
}

JsonValue solve_log_to_json(const SolveLog& log) {
  JsonValue v = JsonValue::object();
  v["status"] = to_string(log.status);
  v["converged"] = log.converged;
  v["final_residual"] = log.final_residual;
  if (!log.message.empty()) v["message"] = log.message;
  JsonValue iters = JsonValue::array();
  for (const auto& it : log.iterations) {
    JsonValue rec = JsonValue::object();
    rec["iter"] = it.iter;
    rec["residual"] = it.residual;
    rec["step_norm"] = it.step_norm;
    rec["regularization"] = it.regularization;
    rec["line_search_steps"] = it.line_search_steps;
    if (it.smoothing > 0.0) rec["smoothing"] = it.smoothing;
    iters.push_back(std::move(rec));
  }
  v["iterations"] = std::move(iters);
  return v;
}

namespace {

JsonValue families_to_json(const ResidualFamilies& f) {
  JsonValue v = JsonValue::object();
  v["state_stationarity"] = f.state_stationarity;
  v["own_control"] = f.own_control;
  v["terminal"] = f.terminal;
  v["dynamics"] = f.dynamics;
  if (f.cross_control) v["cross_control"] = *f.cross_control;
  if (f.policy_constraint) v["policy_constraint"] = *f.policy_constraint;
  if (f.complementarity_lower) v["complementarity_lower"] = *f.complementarity_lower;
  if (f.complementarity_upper) v["complementarity_upper"] = *f.complementarity_upper;
  if (f.multiplier_negativity) v["multiplier_negativity"] = *f.multiplier_negativity;
  return v;
}

}  // namespace

JsonValue residual_report_to_json(const KktResidualReport& report) {
  JsonValue v = JsonValue::object();
  v["families"] = families_to_json(report.families);
  v["max_residual"] = report.families.max();
  v["lambda_negation_max"] = report.lambda_negation_max;
  if (report.psi_max) v["psi_max"] = *report.psi_max;
  v["tolerance"] = report.tolerance;
  v["pass"] = report.pass;
  JsonValue stages = JsonValue::array();
  for (const auto& s : report.per_stage) {
    JsonValue sv = JsonValue::object();
    sv["stage"] = s.stage;
    sv["families"] = families_to_json(s.families);
    stages.push_back(std::move(sv));
  }
  v["per_stage"] = std::move(stages);
  return v;
}

JsonValue second_order_to_json(const SecondOrderReport& report) {
  JsonValue v = JsonValue::object();
  v["agent"] = report.agent;
  v["structure"] = report.structure == CriticalConeBasis::Structure::OpenLoop
                       ? "open-loop" : "feedback";
  v["cone_dim"] = report.cone_dim;
  v["min_eig"] = report.min_eig;
  v["pd_tol"] = report.pd_tol;
  v["classification"] = to_string(report.classification);
  return v;
}

JsonValue cone_to_json(const CriticalConeBasis& cone) {
  JsonValue v = JsonValue::object();
  v["structure"] = cone.structure == CriticalConeBasis::Structure::OpenLoop
                       ? "open-loop" : "feedback";
  v["agent"] = cone.agent;
  v["dim"] = static_cast<int>(cone.basis.cols());
  v["policy_rows_dropped"] = cone.policy_rows_dropped;
  v["constraint_residual"] = cone.constraint_residual;
  v["min_singular_value"] = cone.min_singular_value;
  return v;
}

JsonValue theorem1_audit_to_json(const Theorem1Audit& audit) {
  JsonValue v = JsonValue::object();
  v["verdict"] = to_string(audit.verdict);
  if (!audit.refusal_reason.empty()) v["refusal_reason"] = audit.refusal_reason;
  if (audit.verdict == AuditVerdict::Refused) {
    v["fb_report"] = residual_report_to_json(audit.fb_report);
    return v;
  }
  v["lambda_negation_max"] = audit.lambda_negation_max;
  v["psi_max"] = audit.psi_max;
  v["cascade_pass"] = audit.cascade_pass;
  v["ol_first_order_pass"] = audit.ol_first_order_pass;
  v["containment_pass"] = audit.containment_pass;
  v["fb_report"] = residual_report_to_json(audit.fb_report);
  v["ol_report"] = residual_report_to_json(audit.ol_report);
  JsonValue so = JsonValue::array();
  for (int a = 0; a < 2; ++a) {
    JsonValue pair = JsonValue::object();
    pair["agent"] = a + 1;
    pair["feedback"] = second_order_to_json(audit.fb_second_order[a]);
    pair["open_loop"] = second_order_to_json(audit.ol_second_order[a]);
    JsonValue cont = JsonValue::object();
    cont["contained"] = audit.containment[a].contained;
    cont["max_lift_residual"] = audit.containment[a].max_lift_residual;
    pair["containment"] = std::move(cont);
    so.push_back(std::move(pair));
  }
  v["second_order"] = std::move(so);
  return v;
}

JsonValue theorem1_converse_to_json(const Theorem1ConverseAudit& audit) {
  JsonValue v = JsonValue::object();
  v["refused"] = audit.refused;
  if (!audit.refusal_reason.empty()) v["refusal_reason"] = audit.refusal_reason;
  v["pass"] = audit.pass;
  v["ol_report"] = residual_report_to_json(audit.ol_report);
  if (!audit.refused) v["fb_report"] = residual_report_to_json(audit.fb_report);
  return v;
}

JsonValue theorem2_audit_to_json(const Theorem2Audit& audit) {
  JsonValue v = JsonValue::object();
  v["verdict"] = to_string(audit.verdict);
  if (!audit.detail.empty()) v["detail"] = audit.detail;
  v["strict_complementarity"] = audit.strict_complementarity;
  v["psi_nu_identity_max"] = audit.psi_nu_identity_max;
  v["annihilation_max"] = audit.annihilation_max;
  v["lambda_negation_max"] = audit.lambda_negation_max;
  v["other_side_residual"] = audit.other_side_residual;
  v["identity_pass"] = audit.identity_pass;
  v["annihilation_pass"] = audit.annihilation_pass;
  v["cascade_pass"] = audit.cascade_pass;
  v["embedding_pass"] = audit.embedding_pass;
  return v;
}

JsonValue active_set_to_json(const ActiveSetClassification& cls) {
  JsonValue v = JsonValue::object();
  v["strict_complementarity"] = cls.strict_complementarity;
  v["any_active"] = cls.any_active;
  v["act_tol"] = cls.act_tol;
  v["strict_tol"] = cls.strict_tol;
  auto agent_to_json = [](const std::vector<std::vector<CoordinateStatus>>& rows) {
    JsonValue stages = JsonValue::array();
    for (size_t t = 0; t < rows.size(); ++t) {
      JsonValue coords = JsonValue::array();
      for (const auto& st : rows[t]) {
        JsonValue c = JsonValue::object();
        c["status"] = st.kind == CoordinateStatus::Kind::LowerActive   ? "lower-active"
                      : st.kind == CoordinateStatus::Kind::UpperActive ? "upper-active"
                                                                       : "inactive";
        c["strict"] = st.strict;
        c["slack"] = st.slack;
        c["multiplier"] = st.multiplier;
        coords.push_back(std::move(c));
      }
      stages.push_back(std::move(coords));
    }
    return stages;
  };
  v["agent1"] = agent_to_json(cls.agent1);
  v["agent2"] = agent_to_json(cls.agent2);
  return v;
}

}  // namespace zsg
