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

#include "zsgames/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "zsgames/fbne_solver.hpp"
#include "zsgames/olne_solver.hpp"
#include "zsgames/problems.hpp"
#include "zsgames/serialization.hpp"

namespace zsg {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok) throw ConfigError(std::string("unknown key in ") + where + ": " + it.key());
  }
}

SolveStructure parse_structure(const std::string& s) {
  if (s == "open-loop") return SolveStructure::OpenLoop;
  if (s == "feedback") return SolveStructure::Feedback;
  if (s == "both") return SolveStructure::Both;
  throw ConfigError("solver.structure must be open-loop, feedback or both");
}

const char* structure_name(SolveStructure s) {
  switch (s) {
    case SolveStructure::OpenLoop: return "open-loop";
    case SolveStructure::Feedback: return "feedback";
    case SolveStructure::Both: return "both";
  }
  return "?";
}

SolveOptions parse_solve_options(const json& j) {
  check_keys(j, {"max_iters", "residual_tol", "step_tol", "levenberg_initial",
                 "levenberg_growth", "levenberg_shrink", "levenberg_max",
                 "line_search_shrink", "line_search_min_step"},
             "solver.options");
  SolveOptions o;
  o.max_iters = j.value("max_iters", o.max_iters);
  o.residual_tol = j.value("residual_tol", o.residual_tol);
  o.step_tol = j.value("step_tol", o.step_tol);
  o.levenberg_initial = j.value("levenberg_initial", o.levenberg_initial);
  o.levenberg_growth = j.value("levenberg_growth", o.levenberg_growth);
  o.levenberg_shrink = j.value("levenberg_shrink", o.levenberg_shrink);
  o.levenberg_max = j.value("levenberg_max", o.levenberg_max);
  o.line_search_shrink = j.value("line_search_shrink", o.line_search_shrink);
  o.line_search_min_step = j.value("line_search_min_step", o.line_search_min_step);
  if (o.max_iters <= 0 || o.residual_tol <= 0 || o.residual_tol >= 1 || o.step_tol <= 0)
    throw ConfigError("solver.options: tolerances must be in (0, 1) and max_iters positive");
  return o;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  check_keys(j, {"run_id", "problem", "solver", "verify", "output"}, "config");
  RunConfig cfg;
  if (!j.contains("problem")) throw ConfigError("config requires a problem section");
  check_keys(j["problem"], {"name", "params"}, "problem");
  if (!j["problem"].contains("name")) throw ConfigError("problem.name is required");
  cfg.problem_name = j["problem"]["name"].get<std::string>();
  if (j["problem"].contains("params")) cfg.problem_params = j["problem"]["params"];

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, {"structure", "constrained", "options"}, "solver");
    if (s.contains("structure")) cfg.structure = parse_structure(s["structure"].get<std::string>());
    cfg.constrained = s.value("constrained", false);
    if (s.contains("options")) cfg.options = parse_solve_options(s["options"]);
  }

  if (j.contains("verify")) {
    const json& v = j["verify"];
    check_keys(v, {"first_order", "second_order", "theorem1", "theorem2", "tolerances"},
               "verify");
    cfg.verify.first_order = v.value("first_order", cfg.verify.first_order);
    cfg.verify.second_order = v.value("second_order", cfg.verify.second_order);
    cfg.verify.theorem1 = v.value("theorem1", cfg.verify.theorem1);
    cfg.verify.theorem2 = v.value("theorem2", cfg.verify.theorem2);
    if (v.contains("tolerances")) {
      const json& t = v["tolerances"];
      check_keys(t, {"first_order", "fb_residual", "ol_residual", "cascade", "weak_active",
                     "containment", "pd_tol_scale", "identity", "annihilation", "embedding"},
                 "verify.tolerances");
      cfg.verify.first_order_tol = t.value("first_order", cfg.verify.first_order_tol);
      cfg.verify.theorem1_tol.fb_residual =
          t.value("fb_residual", cfg.verify.theorem1_tol.fb_residual);
      cfg.verify.theorem1_tol.ol_residual =
          t.value("ol_residual", cfg.verify.theorem1_tol.ol_residual);
      cfg.verify.theorem1_tol.cascade = t.value("cascade", cfg.verify.theorem1_tol.cascade);
      cfg.verify.theorem1_tol.weak_active =
          t.value("weak_active", cfg.verify.theorem1_tol.weak_active);
      cfg.verify.theorem1_tol.containment =
          t.value("containment", cfg.verify.theorem1_tol.containment);
      cfg.verify.theorem1_tol.pd_tol_scale =
          t.value("pd_tol_scale", cfg.verify.theorem1_tol.pd_tol_scale);
      cfg.verify.pd_tol_scale = cfg.verify.theorem1_tol.pd_tol_scale;
      cfg.verify.converse_tol.fb_residual =
          t.value("fb_residual", cfg.verify.converse_tol.fb_residual);
      cfg.verify.theorem2_tol.first_order =
          t.value("first_order", cfg.verify.theorem2_tol.first_order);
      cfg.verify.theorem2_tol.identity = t.value("identity", cfg.verify.theorem2_tol.identity);
      cfg.verify.theorem2_tol.annihilation =
          t.value("annihilation", cfg.verify.theorem2_tol.annihilation);
      cfg.verify.theorem2_tol.embedding =
          t.value("embedding", cfg.verify.theorem2_tol.embedding);
    }
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, {"directory", "formats", "emit_trajectory"}, "output");
    cfg.output.directory = o.value("directory", cfg.output.directory);
    if (o.contains("formats")) {
      cfg.output.json = false;
      cfg.output.csv = false;
      for (const auto& f : o["formats"]) {
        const std::string name = f.get<std::string>();
        if (name == "json") cfg.output.json = true;
        else if (name == "csv") cfg.output.csv = true;
        else throw ConfigError("output.formats entries must be json or csv");
      }
    }
    cfg.output.emit_trajectory = o.value("emit_trajectory", false);
  }

  cfg.run_id = j.value("run_id", "");
  if (cfg.run_id.empty())
    cfg.run_id = cfg.problem_name + "-" + structure_name(cfg.structure);

  // Cross-field invariants, checked before any solve.
  if (cfg.verify.theorem2 && !cfg.constrained)
    throw ConfigError("verify.theorem2 requires solver.constrained = true");
  if (cfg.verify.theorem1 && cfg.constrained)
    throw ConfigError("verify.theorem1 applies to unconstrained solves; use theorem2");
  return cfg;
}

std::string csv_header() {
  return "run_id,problem,K,structure,converged,iters,ol_residual,fb_residual,"
         "lambda_negation_max,psi_max,soc_min_eig_a1,soc_min_eig_a2,cone_containment,"
         "strict_complementarity,theorem1_verdict,theorem2_verdict,wall_ms";
}

std::string csv_line(const CsvRow& r) {
  std::string out;
  out += r.run_id + ',' + r.problem + ',' + std::to_string(r.K) + ',' + r.structure + ',';
  out += (r.converged ? "true" : "false");
  out += ',' + std::to_string(r.iters) + ',' + r.ol_residual + ',' + r.fb_residual + ',';
  out += r.lambda_negation_max + ',' + r.psi_max + ',' + r.soc_min_eig_a1 + ',' +
         r.soc_min_eig_a2 + ',' + r.cone_containment + ',' + r.strict_complementarity + ',' +
         r.theorem1_verdict + ',' + r.theorem2_verdict + ',' + std::to_string(r.wall_ms);
  return out;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw NumericalError("cannot write " + path);
  f << content;
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  RunResult result;
  result.row.run_id = cfg.run_id;
  result.row.problem = cfg.problem_name;
  result.row.structure = structure_name(cfg.structure);

  const auto t0 = std::chrono::steady_clock::now();
  JsonValue report = JsonValue::object();
  report["run_id"] = cfg.run_id;
  report["problem"] = cfg.problem_name;
  report["structure"] = structure_name(cfg.structure);

  try {
    const GameDefinition game = make_problem(cfg.problem_name, cfg.problem_params);
    game.validate();
    result.row.K = game.horizon;
    report["K"] = game.horizon;

    if (cfg.constrained && !game.bounds)
      throw ConfigError("solver.constrained = true but the problem has no control bounds");

    const bool want_ol =
        cfg.structure == SolveStructure::OpenLoop || cfg.structure == SolveStructure::Both;
    const bool want_fb =
        cfg.structure == SolveStructure::Feedback || cfg.structure == SolveStructure::Both;

    bool all_converged = true;
    bool audits_pass = true;
    bool any_audit = false;
    int iters = 0;

    std::optional<OlneSolution> ol;
    std::optional<FbneSolution> fb;

    if (want_ol) {
      if (cfg.constrained) {
        ConstrainedOlneOptions copts;
        copts.base = cfg.options;
        ol = solve_constrained_olne(game, copts);
      } else {
        ol = solve_olne(game, cfg.options);
      }
      all_converged = all_converged && ol->log.converged;
      iters += static_cast<int>(ol->log.iterations.size());
      result.row.ol_residual = format_double(ol->log.final_residual);
      JsonValue side = JsonValue::object();
      side["log"] = solve_log_to_json(ol->log);
      if (cfg.output.emit_trajectory)
        side["trajectory"] = trajectory_to_json(game, ol->trajectory);
      side["multipliers"] = multipliers_to_json(ol->multipliers);
      report["open_loop"] = std::move(side);
    }
    if (want_fb) {
      if (cfg.constrained) {
        ConstrainedFbneOptions fopts;
        fopts.base.base = cfg.options;
        fb = solve_constrained_fbne(game, fopts);
      } else {
        FbneOptions fopts;
        fopts.base = cfg.options;
        fb = solve_fbne_ilq(game, fopts);
      }
      all_converged = all_converged && fb->log.converged;
      iters += static_cast<int>(fb->log.iterations.size());
      result.row.fb_residual = format_double(fb->log.final_residual);
      JsonValue side = JsonValue::object();
      side["log"] = solve_log_to_json(fb->log);
      if (cfg.output.emit_trajectory)
        side["trajectory"] = trajectory_to_json(game, fb->trajectory);
      side["policies1"] = policies_to_json(fb->policy1, 1);
      side["policies2"] = policies_to_json(fb->policy2, 2);
      report["feedback"] = std::move(side);
    }
    result.row.converged = all_converged;
    result.row.iters = iters;

    // --- verification ---
    if (cfg.verify.first_order) {
      JsonValue v = JsonValue::object();
      if (ol) {
        const KktResidualReport rep = ol_first_order_report(
            game, ol->trajectory, ol->multipliers, cfg.verify.first_order_tol);
        result.row.lambda_negation_max = format_double(rep.lambda_negation_max);
        v["open_loop"] = residual_report_to_json(rep);
      }
      if (fb) {
        MultiplierSet m;
        if (cfg.constrained) {
          m = recover_constrained_multipliers(game, fb->trajectory, &fb->policy1, &fb->policy2);
        } else {
          m = recover_fb_multipliers(game, fb->trajectory, fb->policy1, fb->policy2);
        }
        const KktResidualReport rep = fb_first_order_report(
            game, fb->trajectory, fb->policy1, fb->policy2, m, cfg.verify.first_order_tol);
        result.row.lambda_negation_max = format_double(rep.lambda_negation_max);
        if (rep.psi_max) result.row.psi_max = format_double(*rep.psi_max);
        v["feedback"] = residual_report_to_json(rep);
      }
      report["first_order"] = std::move(v);
    }

    if (cfg.verify.second_order && !cfg.constrained) {
      JsonValue v = JsonValue::array();
      const Trajectory& traj = fb ? fb->trajectory : ol->trajectory;
      for (int agent = 1; agent <= 2; ++agent) {
        JsonValue entry = JsonValue::object();
        entry["agent"] = agent;
        const CriticalConeBasis ol_cone = build_critical_cone(
            game, traj, CriticalConeBasis::Structure::OpenLoop, agent);
        auto [l1, l2] = recover_ol_costates(game, traj);
        MultiplierSet olm;
        olm.lambda1 = std::move(l1);
        olm.lambda2 = std::move(l2);
        const SecondOrderReport rep =
            second_order_report(game, traj, olm, ol_cone, agent, cfg.verify.pd_tol_scale);
        entry["open_loop"] = second_order_to_json(rep);
        entry["cone"] = cone_to_json(ol_cone);
        if (agent == 1) result.row.soc_min_eig_a1 = format_double(rep.min_eig);
        else result.row.soc_min_eig_a2 = format_double(rep.min_eig);
        v.push_back(std::move(entry));
      }
      report["second_order"] = std::move(v);
    }

    if (cfg.verify.theorem1) {
      if (fb) {
        const Theorem1Audit audit = theorem1_audit(game, fb->policy1, fb->policy2,
                                                   fb->trajectory, cfg.verify.theorem1_tol);
        any_audit = true;
        result.row.theorem1_verdict = to_string(audit.verdict);
        result.row.lambda_negation_max = format_double(audit.lambda_negation_max);
        result.row.psi_max = format_double(audit.psi_max);
        if (audit.verdict != AuditVerdict::Refused) {
          result.row.soc_min_eig_a1 = format_double(audit.fb_second_order[0].min_eig);
          result.row.soc_min_eig_a2 = format_double(audit.fb_second_order[1].min_eig);
          result.row.cone_containment = audit.containment_pass ? "true" : "false";
        }
        const bool ok = audit.verdict == AuditVerdict::OlneCertified ||
                        audit.verdict == AuditVerdict::NecessaryOnly;
        audits_pass = audits_pass && ok;
        report["theorem1"] = theorem1_audit_to_json(audit);
      }
      if (ol) {
        const Theorem1ConverseAudit audit = theorem1_converse_audit(
            game, ol->trajectory, ol->multipliers, cfg.verify.converse_tol);
        any_audit = true;
        audits_pass = audits_pass && !audit.refused && audit.pass;
        report["theorem1_converse"] = theorem1_converse_to_json(audit);
        if (result.row.theorem1_verdict.empty())
          result.row.theorem1_verdict = audit.pass ? "converse-pass" : "converse-fail";
      }
    }

    if (cfg.verify.theorem2) {
      if (fb) {
        const Theorem2Audit audit = theorem2_audit(game, fb->policy1, fb->policy2,
                                                   fb->trajectory, cfg.verify.theorem2_tol);
        any_audit = true;
        result.row.theorem2_verdict = to_string(audit.verdict);
        result.row.strict_complementarity = audit.strict_complementarity ? "true" : "false";
        audits_pass = audits_pass && audit.verdict == Theorem2Verdict::Pass;
        report["theorem2"] = theorem2_audit_to_json(audit);
      }
      if (ol) {
        const Theorem2Audit audit =
            theorem2_audit(game, ol->trajectory, ol->multipliers, cfg.verify.theorem2_tol);
        any_audit = true;
        if (result.row.theorem2_verdict.empty())
          result.row.theorem2_verdict = to_string(audit.verdict);
        if (result.row.strict_complementarity.empty())
          result.row.strict_complementarity = audit.strict_complementarity ? "true" : "false";
        audits_pass = audits_pass && audit.verdict == Theorem2Verdict::Pass;
        report["theorem2_converse"] = theorem2_audit_to_json(audit);
      }
    }

    if (cfg.output.emit_trajectory) {
      std::filesystem::create_directories(cfg.output.directory);
      if (ol && cfg.output.csv)
        write_file(cfg.output.directory + "/" + cfg.run_id + "_ol_trajectory.csv",
                   trajectory_to_csv(game, ol->trajectory));
      if (fb && cfg.output.csv)
        write_file(cfg.output.directory + "/" + cfg.run_id + "_fb_trajectory.csv",
                   trajectory_to_csv(game, fb->trajectory));
    }

    if (!all_converged) {
      result.exit_code = kExitSolverFailed;
      result.error = "a requested solve did not converge";
    } else if (any_audit && !audits_pass) {
      result.exit_code = kExitAuditFailed;
      result.error = "an audit failed";
    }
  } catch (const ConfigError& e) {
    result.exit_code = kExitConfigError;
    result.error = e.what();
  } catch (const InputError& e) {
    result.exit_code = kExitConfigError;
    result.error = e.what();
  } catch (const std::exception& e) {
    result.exit_code = kExitSolverFailed;
    result.error = e.what();
  }

  const auto t1 = std::chrono::steady_clock::now();
  result.row.wall_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  report["exit_code"] = result.exit_code;
  if (!result.error.empty()) report["error"] = result.error;

  // Report files; wall time stays out of the JSON so identical configs give
  // byte-identical reports.
  try {
    std::filesystem::create_directories(cfg.output.directory);
    if (cfg.output.json) {
      result.report_path = cfg.output.directory + "/" + cfg.run_id + ".json";
      write_file(result.report_path, report.dump() + "\n");
    }
    if (cfg.output.csv) {
      write_file(cfg.output.directory + "/" + cfg.run_id + ".csv",
                 csv_header() + "\n" + csv_line(result.row) + "\n");
    }
  } catch (const std::exception& e) {
    if (result.exit_code == kExitOk) {
      result.exit_code = kExitSolverFailed;
      result.error = e.what();
    }
  }
  return result;
}

int sweep(const std::vector<RunConfig>& configs, const std::string& out_dir) {
  if (configs.empty()) throw ConfigError("sweep requires at least one config");
  int exit_code = 0;
  std::string csv = csv_header() + "\n";
  for (size_t i = 0; i < configs.size(); ++i) {
    RunConfig cfg = configs[i];
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    cfg.output.csv = false;  // rows go into the aggregate file
    const RunResult res = run(cfg);
    exit_code = std::max(exit_code, res.exit_code);
    csv += csv_line(res.row) + "\n";
  }
  std::filesystem::create_directories(out_dir.empty() ? "." : out_dir);
  write_file((out_dir.empty() ? "." : out_dir) + std::string("/sweep.csv"), csv);
  return exit_code;
}

namespace {

void set_by_path(json& obj, const std::string& dotted, const json& value) {
  json* cur = &obj;
  size_t start = 0;
  while (true) {
    const size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

}  // namespace

std::vector<RunConfig> parse_sweep_config(const json& j) {
  std::vector<RunConfig> configs;
  if (j.contains("runs")) {
    int idx = 0;
    for (const auto& rj : j["runs"]) {
      RunConfig cfg = parse_run_config(rj);
      if (!rj.contains("run_id")) cfg.run_id += "-" + std::to_string(idx);
      configs.push_back(std::move(cfg));
      ++idx;
    }
    return configs;
  }
  if (!j.contains("base") || !j.contains("grid"))
    throw ConfigError("sweep config requires either runs or base+grid");

  std::vector<json> expanded{j["base"]};
  for (auto it = j["grid"].begin(); it != j["grid"].end(); ++it) {
    std::vector<json> next;
    for (const json& base : expanded) {
      for (const auto& value : it.value()) {
        json copy = base;
        set_by_path(copy, it.key(), value);
        next.push_back(std::move(copy));
      }
    }
    expanded = std::move(next);
  }
  int idx = 0;
  for (const json& rj : expanded) {
    RunConfig cfg = parse_run_config(rj);
    cfg.run_id += "-" + std::to_string(idx);
    configs.push_back(std::move(cfg));
    ++idx;
  }
  return configs;
}

}  // namespace zsg
