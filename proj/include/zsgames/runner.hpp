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

#include <string>
#include <vector>

#include <json.hpp>

#include "zsgames/constrained.hpp"
#include "zsgames/equilibrium_verify.hpp"
#include "zsgames/solver_types.hpp"

namespace zsg {

// Exit code contract: 0 all requested audits pass, 1 an audit failed,
// 2 solver non-convergence (or numerical failure), 3 configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAuditFailed = 1;
inline constexpr int kExitSolverFailed = 2;
inline constexpr int kExitConfigError = 3;

enum class SolveStructure { OpenLoop, Feedback, Both };

struct VerifySettings {
  bool first_order = true;
  bool second_order = false;
  bool theorem1 = false;
  bool theorem2 = false;
  double first_order_tol = 1e-8;
  Theorem1Tolerances theorem1_tol;
  Theorem1ConverseTolerances converse_tol;
  Theorem2Tolerances theorem2_tol;
  double pd_tol_scale = 1e-8;
};

struct OutputSettings {
  std::string directory = ".";
  bool json = true;
  bool csv = false;
  bool emit_trajectory = false;
};

struct RunConfig {
  std::string run_id;  // derived from problem/structure when empty
  std::string problem_name;
  nlohmann::json problem_params = nlohmann::json::object();
  SolveStructure structure = SolveStructure::Both;
  bool constrained = false;
  SolveOptions options;
  VerifySettings verify;
  OutputSettings output;
};

// Parses and validates a config object. Throws ConfigError on schema
// violations (unknown keys, theorem2 without the constrained flag, ...).
RunConfig parse_run_config(const nlohmann::json& j);

// One row of the aggregate CSV; columns are fixed (see csv_header()).
struct CsvRow {
  std::string run_id, problem, structure;
  int K = 0;
  bool converged = false;
  int iters = 0;
  std::string ol_residual, fb_residual, lambda_negation_max, psi_max;
  std::string soc_min_eig_a1, soc_min_eig_a2;
  std::string cone_containment, strict_complementarity;
  std::string theorem1_verdict, theorem2_verdict;
  long long wall_ms = 0;
};

std::string csv_header();
std::string csv_line(const CsvRow& row);

struct RunResult {
  int exit_code = kExitOk;
  CsvRow row;
  std::string report_path;  // JSON report file, when written
  std::string error;        // human-readable diagnostic for nonzero exits
};

// Executes the solves and audits requested by the config and writes report
// files into output.directory. Never throws; errors map to exit codes.
RunResult run(const RunConfig& config);

// Runs each config independently and writes an aggregate sweep.csv; the
// returned exit code is the max of the per-run codes. Per-run errors are
// recorded in their rows and do not abort the sweep.
int sweep(const std::vector<RunConfig>& configs, const std::string& out_dir);

// Expands a sweep config: either {"runs": [...]} or {"base": {...},
// "grid": {"dotted.path": [values...], ...}} (cartesian product).
std::vector<RunConfig> parse_sweep_config(const nlohmann::json& j);

}  // namespace zsg
