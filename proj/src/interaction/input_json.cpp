#include "bwm/input_json.hpp"

#include "bwm/error.hpp"
#include "bwm/text_io.hpp"

namespace bwm::interaction {

nlohmann::json to_json(const InputSample& s) {
  nlohmann::json j;
  j["t"] = s.t;
  j["method"] = std::string(to_string(s.method));
  switch (s.method) {
    case ModMethod::Gesture:
      j["triggers"] = s.triggers;
      j["rate"] = s.rate;
      break;
    case ModMethod::Joystick:
      j["side"] = std::string(to_string(s.side));
      j["tilt"] = s.tilt;
      break;
    case ModMethod::Objects:
      j["touch"] = std::string(to_string(s.touch));
      break;
  }
  return j;
}

InputSample input_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::Data, "input sample must be a JSON object");
  try {
    InputSample s;
    s.t = j.at("t").get<double>();
    s.method = parse_method(j.at("method").get<std::string>());
    switch (s.method) {
      case ModMethod::Gesture:
        s.triggers = j.value("triggers", false);
        s.rate = j.value("rate", 0.0);
        break;
      case ModMethod::Joystick:
        s.side = parse_side(j.value("side", std::string("right")));
        s.tilt = j.value("tilt", 0.0);
        break;
      case ModMethod::Objects:
        s.touch = parse_touch(j.value("touch", std::string("none")));
        break;
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("malformed input sample: ") + e.what());
  }
}

std::vector<InputSample> parse_input_lines(std::string_view text) {
  std::vector<InputSample> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    try {
      out.push_back(input_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Data, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorKind::Data, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string format_input_lines(const std::vector<InputSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += to_json(s).dump() + '\n';
  return out;
}

}  // namespace bwm::interaction
