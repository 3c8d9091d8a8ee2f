#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bwm/interaction.hpp"

namespace bwm::interaction {

// {"t": s, "method": "gesture", "triggers": bool, "rate": m/s}
// {"t": s, "method": "joystick", "side": "left"|"right", "tilt": x}
// {"t": s, "method": "objects", "touch": "plus"|"minus"|"none"}
nlohmann::json to_json(const InputSample& sample);
// Unknown keys are ignored; missing method-specific fields take their defaults.
InputSample input_from_json(const nlohmann::json& j);

std::vector<InputSample> parse_input_lines(std::string_view text);
std::string format_input_lines(const std::vector<InputSample>& samples);

}  // namespace bwm::interaction
