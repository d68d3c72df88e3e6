#pragma once
#include <stdexcept>
#include <string>
#include <vector>

#include "xslice/ransim.hpp"

namespace xslice {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// JSON scenario files; errors name the offending field (or parse byte).
Scenario load_scenario(const std::string& path);
void save_scenario(const std::string& path, const Scenario& sc);
std::string scenario_to_json(const Scenario& sc);
Scenario scenario_from_json(const std::string& text);

// Built-in presets: light / medium / intensive (10 sessions, 3 slices, the
// matching traffic class), bandit (2 slices, one loaded / one idle, 50 PRBs)
// and starvation (tight band, 3x2 sessions).
bool is_preset(const std::string& name);
Scenario preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

// `name` is a preset name or a file path.
Scenario resolve_scenario(const std::string& name);

}  // namespace xslice
