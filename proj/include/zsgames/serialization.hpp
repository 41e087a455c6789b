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

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "zsgames/constrained.hpp"
#include "zsgames/equilibrium_verify.hpp"
#include "zsgames/game.hpp"
#include "zsgames/solver_types.hpp"

namespace zsg {

// Report emission goes through this tiny ordered JSON value so output is
// byte-deterministic: fixed field order and every float printed as %.12e.
// (Config *parsing* uses nlohmann::json; this type is write-only.)
class JsonValue {
 public:
  JsonValue() : kind_(Kind::Null) {}
  JsonValue(bool b) : kind_(Kind::Bool), bool_(b) {}
  JsonValue(int v) : kind_(Kind::Int), int_(v) {}
  JsonValue(long long v) : kind_(Kind::Int), int_(v) {}
  JsonValue(double v) : kind_(Kind::Double), double_(v) {}
  JsonValue(const char* s) : kind_(Kind::String), string_(s) {}
  JsonValue(std::string s) : kind_(Kind::String), string_(std::move(s)) {}

  static JsonValue object();
  static JsonValue array();

  // Object access: inserts the key at the end on first use.
  JsonValue& operator[](const std::string& key);
  void push_back(JsonValue v);

  bool is_object() const { return kind_ == Kind::Object; }
  std::string dump() const;

 private:
  enum class Kind { Null, Bool, Int, Double, String, Array, Object };
  Kind kind_;
  bool bool_ = false;
  long long int_ = 0;
  double double_ = 0.0;
  std::string string_;
  std::vector<JsonValue> items_;
  std::vector<std::pair<std::string, JsonValue>> members_;

  void write(std::string& out) const;
};

// %.12e, the fixed float format of all report files.
std::string format_double(double v);

JsonValue to_json(const Vector& v);
JsonValue to_json(const Matrix& m);  // row-major nested arrays

std::string trajectory_to_csv(const GameDefinition& game, const Trajectory& traj);
JsonValue trajectory_to_json(const GameDefinition& game, const Trajectory& traj);
JsonValue policies_to_json(const AffinePolicySet& policies, int agent);
JsonValue multipliers_to_json(const MultiplierSet& m);
JsonValue solve_log_to_json(const SolveLog& log);
JsonValue residual_report_to_json(const KktResidualReport& report);
JsonValue second_order_to_json(const SecondOrderReport& report);
JsonValue cone_to_json(const CriticalConeBasis& cone);
JsonValue theorem1_audit_to_json(const Theorem1Audit& audit);
JsonValue theorem1_converse_to_json(const Theorem1ConverseAudit& audit);
JsonValue theorem2_audit_to_json(const Theorem2Audit& audit);
JsonValue active_set_to_json(const ActiveSetClassification& cls);

}  // namespace zsg
