#include <algorithm>

#include "susytb/harness.hpp"

namespace susytb {

namespace {

struct PresetEntry {
  const char* name;
  const char* text;
};

// Generated at configure time from presets/*.json.
constexpr PresetEntry kPresets[] = {
#include "susytb_presets.inc"
};

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : kPresets) names.emplace_back(p.name);
  std::sort(names.begin(), names.end());
  return names;
}

std::string preset_text(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) return p.text;
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown preset '" + name + "' (available: " + known + ")");
}

ScenarioConfig preset(const std::string& name) { return parse_config(preset_text(name)); }

}  // namespace susytb
