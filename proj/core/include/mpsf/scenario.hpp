/*
 Copyright 2026 The mpsf Authors

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

#ifndef MPSF_SCENARIO_HPP_
#define MPSF_SCENARIO_HPP_

#include <optional>
#include <string>
#include <vector>

#include "mpsf/filter.hpp"
#include "mpsf/model.hpp"
#include "mpsf/sim.hpp"
#include "mpsf/terminal.hpp"

namespace mpsf {

/// A fully materialized run setup: plant, constraints, weights, certified
/// ingredients, filter configuration, reference, input policy.
struct Scenario {
  LinearDynamics dyn;
  BoxConstraints box;
  StabilityCost cost;
  TerminalIngredients ti;
  FilterConfig cfg;
  std::optional<ReferenceTrajectory> reference;
  DesiredInputPolicy policy;
  Eigen::VectorXd x0;
  RolloutOptions run;
  VerifyThresholds thresholds;
  double terminal_margin = 0.9;
};

/// Thrown on malformed configs (maps to exit code 2 in the CLI).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Applies `--override key.path=value` entries (value parsed as a JSON
/// literal) and returns the effective config text, pretty-printed.
std::string apply_overrides_to_config_text(
    const std::string& json_text, const std::vector<std::string>& overrides);

/// Builds a scenario from JSON text; file references are resolved against
/// base_dir. Validates dimensions and invariants before any solve.
Scenario scenario_from_config_text(const std::string& json_text,
                                   const std::string& base_dir);

/// Convenience: read + overrides + build; effective config text out.
Scenario load_scenario(const std::string& config_path,
                       const std::vector<std::string>& overrides,
                       std::string* effective_config_text = nullptr);

}  // namespace mpsf

#endif  // MPSF_SCENARIO_HPP_
