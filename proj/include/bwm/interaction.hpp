#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bwm::interaction {

enum class ModMethod { Gesture, Joystick, Objects };
enum class Side { None, Left, Right };
enum class Touch { None, Plus, Minus };

std::string_view to_string(ModMethod m);
std::string_view to_string(Side s);
std::string_view to_string(Touch t);
ModMethod parse_method(std::string_view s);
Side parse_side(std::string_view s);
Touch parse_touch(std::string_view s);

inline constexpr double kDefaultDeadzone = 0.05;
inline constexpr double kClampFraction = 0.35;
inline constexpr double kObjectRampSeconds = 1.5;

struct InteractionConfig {
  double joystick_deadzone = kDefaultDeadzone;
};

// kg/s. Positive rate (hands moving apart) gains weight.
double gesture_velocity(double rate_m_per_s);
// kg/s. Zero inside the deadzone; positive tilt gains weight.
double joystick_velocity(double tilt, double deadzone = kDefaultDeadzone);
// kg/s magnitude after `contact_s` seconds of continuous contact.
double object_velocity(double contact_s);
// Integral of object_velocity over [contact_s, contact_s + dt] (kg).
double object_displacement(double contact_s, double dt);

// One controller reading. Only the fields of `method` are meaningful.
struct InputSample {
  double t = 0.0;
  ModMethod method = ModMethod::Joystick;
  bool triggers = false;  // gesture: both triggers held
  double rate = 0.0;      // gesture: hand-distance change rate (m/s)
  Side side = Side::Right;  // joystick: which stick
  double tilt = 0.0;        // joystick: [-1, 1]
  Touch touch = Touch::None;  // objects

  bool operator==(const InputSample&) const = default;
};

struct WeightState {
  double weight_kg = 0.0;
  double base_kg = 0.0;
  double lower_kg = 0.0;
  double upper_kg = 0.0;
  ModMethod method = ModMethod::Joystick;
  Side joystick_lock = Side::None;
  Touch contact = Touch::None;
  double contact_s = 0.0;
  std::optional<double> t;  // unset until the first sample starts the clock

  // Fresh state at the base weight with bounds base * (1 -/+ 0.35).
  static WeightState start(double base_kg, ModMethod method, std::optional<double> t0 = std::nullopt);

  bool operator==(const WeightState&) const = default;
};

// Advances to input.t. The sample's input is held constant over (state.t, input.t];
// when the clock has not started the sample only starts it (and may set the lock).
WeightState step(const WeightState& state, const InputSample& input, const InteractionConfig& config = {});

// States after each input, preceded by the initial state.
std::vector<WeightState> replay(const WeightState& initial, std::span<const InputSample> inputs,
                                const InteractionConfig& config = {});

}  // namespace bwm::interaction
