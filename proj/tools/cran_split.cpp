// SPDX-License-Identifier: Apache-2.0
//
// cran-split: functional-split evaluation for cloud radio access networks
// Copyright 2026 The cran-split Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
#include "cran/harness.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

using namespace cran::harness;

namespace {

constexpr int kValidationError = 2;
constexpr int kNotConverged = 3;

// A config file refines the named preset unless it names its own.
Preset resolve(const std::string& preset_name, const std::string& config) {
  if (config.empty()) {
    try {
      return preset(preset_name);
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(std::string("preset: ") + e.what());
    }
  }
  if (preset_name.empty()) return load_config(config);
  std::ifstream in(config);
  if (!in) throw ScenarioError(config + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(config + ": not valid JSON: " + e.what());
  }
  if (j.is_object() && !j.contains("preset")) j["preset"] = preset_name;
  return parse_config(j.dump(), config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional-split evaluation for cloud radio access networks"};
  app.require_subcommand(1);

  std::string preset_name, config, out, format = "csv", variants;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  bool strict = false, timing = false, quiet = false;
  int threads = 1;

  auto* run = app.add_subcommand("run", "run a sweep and write the results");
  run->add_option("--preset", preset_name, "built-in experiment");
  run->add_option("--config", config, "scenario file (JSON)");
  run->add_option("--out", out, "output path")->required();
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--seed", seed, "master seed");
  run->add_option("--samples", samples, "Monte-Carlo samples per point")->check(CLI::PositiveNumber);
  run->add_option("--variants", variants, "comma-separated variant list");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--strict", strict, "exit 3 if any row has unconverged trials");
  run->add_flag("--timing", timing, "record wall-clock time per row");
  run->add_flag("--quiet", quiet, "no progress output");

  auto* validate = app.add_subcommand("validate", "check a scenario file");
  std::string validate_config;
  validate->add_option("--config", validate_config, "scenario file (JSON)")->required();

  auto* presets = app.add_subcommand("presets", "list built-in experiments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      for (const auto& name : preset_names()) {
        const Preset p = preset(name);
        std::string values;
        for (double v : p.sweep.values) values += (values.empty() ? "" : ",") + CLI::detail::to_string(v);
        std::cout << name << "\n  " << p.description << "\n  sweep " << p.sweep.variable << " = {" << values
                  << "}\n";
      }
      return 0;
    }
    if (validate->parsed()) {
      const Preset p = load_config(validate_config);
      std::cout << "ok: " << p.scenario.experiment << " (" << to_string(p.scenario.direction) << ", "
                << p.sweep.values.size() << " sweep points, " << p.variants.size() << " variants)\n";
      return 0;
    }

    if (preset_name.empty() && config.empty()) throw ScenarioError("run: need --preset or --config");
    Preset p = resolve(preset_name, config);
    if (seed) p.scenario.seed = *seed;
    if (samples) p.scenario.mc_samples = *samples;
    if (!variants.empty()) p.variants = parse_variants(p.scenario.direction, variants, p.scenario);
    p.scenario.validate();

    RunOptions opt;
    opt.threads = threads;
    opt.timing = timing;
    if (!quiet) opt.progress = [](const std::string& m) { std::cerr << m << "\n"; };
    const SweepResult r = run_sweep(p.scenario, p.sweep, p.variants, opt);
    emit(r, format_from_string(format), out);

    int unconverged = 0;
    for (const auto& row : r.rows) unconverged += row.unconverged > 0 ? 1 : 0;
    if (unconverged > 0) {
      std::cerr << unconverged << " row(s) include trials that stopped before convergence\n";
      if (strict) return kNotConverged;
    }
    return 0;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
