#include "bwm/interaction.hpp"

#include <algorithm>
#include <cmath>

#include "bwm/error.hpp"

namespace bwm::interaction {

std::string_view to_string(ModMethod m) {
  switch (m) {
    case ModMethod::Gesture: return "gesture";
    case ModMethod::Joystick: return "joystick";
    case ModMethod::Objects: return "objects";
  }
  return "?";
}

std::string_view to_string(Side s) {
  switch (s) {
    case Side::None: return "none";
    case Side::Left: return "left";
    case Side::Right: return "right";
  }
  return "?";
}

std::string_view to_string(Touch t) {
  switch (t) {
    case Touch::None: return "none";
    case Touch::Plus: return "plus";
    case Touch::Minus: return "minus";
  }
  return "?";
}

ModMethod parse_method(std::string_view s) {
  if (s == "gesture") return ModMethod::Gesture;
  if (s == "joystick") return ModMethod::Joystick;
  if (s == "objects") return ModMethod::Objects;
  fail(ErrorKind::Data, "unknown method '" + std::string(s) + "'");
}

Side parse_side(std::string_view s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  if (s == "none") return Side::None;
  fail(ErrorKind::Data, "unknown joystick side '" + std::string(s) + "'");
}

Touch parse_touch(std::string_view s) {
  if (s == "plus") return Touch::Plus;
  if (s == "minus") return Touch::Minus;
  if (s == "none") return Touch::None;
  fail(ErrorKind::Data, "unknown touch '" + std::string(s) + "'");
}

double gesture_velocity(double r) {
  const double a = std::abs(r);
  return std::copysign(3.5 * a * a + 15.0 * a, r) + 0.0;
}

double joystick_velocity(double tilt, double deadzone) {
  const double a = std::abs(tilt);
  if (a < deadzone) return 0.0;
  return std::copysign(10.0 * a * a + 5.0, tilt);
}

double object_velocity(double contact_s) {
  const double x = std::min(std::max(contact_s, 0.0), kObjectRampSeconds) / kObjectRampSeconds;
  return 3.0 + 12.0 * x * x;
}

namespace {

// Antiderivative of object_velocity from 0.
double object_travel(double d) {
  constexpr double T = kObjectRampSeconds;
  if (d <= T) return 3.0 * d + 4.0 * d * d * d / (T * T);
  return 3.0 * T + 4.0 * T + 15.0 * (d - T);
}

void validate(const InputSample& in) {
  if (!std::isfinite(in.t)) fail(ErrorKind::Data, "input timestamp must be finite");
  if (!std::isfinite(in.rate)) fail(ErrorKind::Data, "gesture rate must be finite");
  if (!std::isfinite(in.tilt) || std::abs(in.tilt) > 1.0) fail(ErrorKind::Data, "joystick tilt must be in [-1, 1]");
  if (in.method == ModMethod::Joystick && in.side == Side::None) fail(ErrorKind::Data, "joystick input needs a side");
}

}  // namespace

double object_displacement(double contact_s, double dt) {
  return object_travel(contact_s + dt) - object_travel(contact_s);
}

WeightState WeightState::start(double base_kg, ModMethod method, std::optional<double> t0) {
  if (!(base_kg > 0.0) || !std::isfinite(base_kg)) fail(ErrorKind::Data, "base weight must be positive");
  WeightState s;
  s.weight_kg = base_kg;
  s.base_kg = base_kg;
  s.lower_kg = base_kg * (1.0 - kClampFraction);
  s.upper_kg = base_kg * (1.0 + kClampFraction);
  s.method = method;
  s.t = t0;
  return s;
}

WeightState step(const WeightState& state, const InputSample& input, const InteractionConfig& config) {
  validate(input);
  if (input.method != state.method) {
    fail(ErrorKind::Data, "input for " + std::string(to_string(input.method)) + " while " +
                              std::string(to_string(state.method)) + " is active");
  }
  if (state.t && !(input.t > *state.t)) {
    fail(ErrorKind::Data, "non-monotone timestamp " + std::to_string(input.t) + " after " + std::to_string(*state.t));
  }
  const double dt = state.t ? input.t - *state.t : 0.0;
  WeightState next = state;
  next.t = input.t;
  double delta = 0.0;

  switch (state.method) {
    case ModMethod::Gesture:
      if (input.triggers) delta = gesture_velocity(input.rate) * dt;
      break;
    case ModMethod::Joystick: {
      const double v = joystick_velocity(input.tilt, config.joystick_deadzone);
      if (v != 0.0) {
        if (next.joystick_lock == Side::None) next.joystick_lock = input.side;
        if (input.side == next.joystick_lock) delta = v * dt;
      }
      break;
    }
    case ModMethod::Objects:
      if (input.touch == Touch::None) {
        next.contact = Touch::None;
        next.contact_s = 0.0;
      } else {
        if (input.touch != state.contact) next.contact_s = 0.0;
        next.contact = input.touch;
        const double d = object_displacement(next.contact_s, dt);
        delta = input.touch == Touch::Plus ? d : -d;
        next.contact_s += dt;
      }
      break;
  }
  next.weight_kg = std::clamp(state.weight_kg + delta, state.lower_kg, state.upper_kg);
  return next;
}

std::vector<WeightState> replay(const WeightState& initial, std::span<const InputSample> inputs,
                                const InteractionConfig& config) {
  std::vector<WeightState> out;
  out.reserve(inputs.size() + 1);
  out.push_back(initial);
  for (const auto& in : inputs) out.push_back(step(out.back(), in, config));
  return out;
}

}  // namespace bwm::interaction
