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

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "zsgames/runner.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw zsg::ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw zsg::ConfigError(std::string("config parse error: ") + e.what());
  }
  return j;
}

void apply_overrides(zsg::RunConfig& cfg, const std::string& out_dir,
                     const std::string& formats) {
  if (!out_dir.empty()) cfg.output.directory = out_dir;
  if (!formats.empty()) {
    cfg.output.json = false;
    cfg.output.csv = false;
    size_t start = 0;
    while (start <= formats.size()) {
      const size_t comma = formats.find(',', start);
      const std::string f = formats.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      if (f == "json") cfg.output.json = true;
      else if (f == "csv") cfg.output.csv = true;
      else if (!f.empty()) throw zsg::ConfigError("--format entries must be json or csv");
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-sum dynamic game solver and equilibrium verifier"};
  app.require_subcommand(1);

  std::string config_path, out_dir, formats;
  long long seed = 0;  // reserved; all algorithms are deterministic
  app.add_option("--seed", seed, "reserved, currently unused");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--format", formats, "comma-separated subset of json,csv");
  };

  CLI::App* cmd_solve = app.add_subcommand("solve", "run the requested solver(s) only");
  CLI::App* cmd_audit = app.add_subcommand("audit", "run solver(s) and the configured audits");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a batch of configs and aggregate a CSV");
  add_common(cmd_solve);
  add_common(cmd_audit);
  add_common(cmd_sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_sweep->parsed()) {
      std::vector<zsg::RunConfig> configs = zsg::parse_sweep_config(load_json(config_path));
      for (auto& cfg : configs) apply_overrides(cfg, out_dir, formats);
      const std::string dir = out_dir.empty()
                                  ? (configs.empty() ? "." : configs.front().output.directory)
                                  : out_dir;
      return zsg::sweep(configs, dir);
    }

    zsg::RunConfig cfg = zsg::parse_run_config(load_json(config_path));
    apply_overrides(cfg, out_dir, formats);
    if (cmd_solve->parsed()) {
      cfg.verify.first_order = false;
      cfg.verify.second_order = false;
      cfg.verify.theorem1 = false;
      cfg.verify.theorem2 = false;
    }
    const zsg::RunResult res = zsg::run(cfg);
    if (!res.error.empty()) std::cerr << res.error << "\n";
    return res.exit_code;
  } catch (const zsg::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return zsg::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return zsg::kExitSolverFailed;
  }
}
