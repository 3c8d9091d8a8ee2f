#include "bwm/config.hpp"
#include "bwm/error.hpp"
#include "bwm/text_io.hpp"

namespace bwm {

std::vector<std::string> config_keys() {
  return {"solver_tolerance", "joystick_deadzone", "morph_grid_spacing_kg", "controller_radius_m",
          "wilcoxon_exact_max"};
}

void Config::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  try {
    if (key == "solver_tolerance") {
      solver_tolerance = parse_double(value);
    } else if (key == "joystick_deadzone") {
      joystick_deadzone = parse_double(value);
    } else if (key == "morph_grid_spacing_kg") {
      morph_grid_spacing_kg = parse_double(value);
    } else if (key == "controller_radius_m") {
      controller_radius_m = parse_double(value);
    } else if (key == "wilcoxon_exact_max") {
      wilcoxon_exact_max = static_cast<int>(parse_int(value));
    } else {
      fail(ErrorKind::Usage, "unknown config key '" + std::string(key) + "'");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Usage) throw;
    fail(ErrorKind::Usage, "config " + std::string(key) + ": " + e.what());
  }
}

void Config::validate() const {
  if (!(solver_tolerance > 0.0 && solver_tolerance < 1.0)) fail(ErrorKind::Usage, "solver_tolerance must be in (0, 1)");
  if (!(joystick_deadzone >= 0.0 && joystick_deadzone < 1.0)) fail(ErrorKind::Usage, "joystick_deadzone must be in [0, 1)");
  if (!(morph_grid_spacing_kg > 0.0)) fail(ErrorKind::Usage, "morph_grid_spacing_kg must be positive");
  if (!(controller_radius_m >= 0.0)) fail(ErrorKind::Usage, "controller_radius_m must be >= 0");
  if (wilcoxon_exact_max < 0 || wilcoxon_exact_max > 50) fail(ErrorKind::Usage, "wilcoxon_exact_max must be in [0, 50]");
}

Config parse_config(std::string_view text) {
  Config c;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::Usage, "config line " + std::to_string(line_no) + ": expected key=value");
    }
    c.set(line.substr(0, eq), line.substr(eq + 1));
  }
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

void apply_overrides(Config& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Usage, "override '" + o + "' is not key=value");
    config.set(std::string_view(o).substr(0, eq), std::string_view(o).substr(eq + 1));
  }
  config.validate();
}

}  // namespace bwm
