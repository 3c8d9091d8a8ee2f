#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bwm/interaction.hpp"
#include "bwm/stats.hpp"

namespace bwm {

// Operator settings read from a key=value file. Keys:
//   solver_tolerance       relative residual for the stitching solve
//   joystick_deadzone      tilt below which the joystick is at rest
//   morph_grid_spacing_kg  maximum spacing of precomputed morph targets
//   controller_radius_m    controller radius for the ground calibration
//   wilcoxon_exact_max     largest m using the exact Wilcoxon distribution
struct Config {
  double solver_tolerance = 1e-8;
  double joystick_deadzone = interaction::kDefaultDeadzone;
  double morph_grid_spacing_kg = 1.0;
  double controller_radius_m = 0.03;
  int wilcoxon_exact_max = stats::kDefaultExactSwitch;

  void set(std::string_view key, std::string_view value);
  void validate() const;
};

std::vector<std::string> config_keys();
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
// Applies "key=value" overrides in order.
void apply_overrides(Config& config, const std::vector<std::string>& overrides);

}  // namespace bwm
