#include "nodefdm/units.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace nodefdm::units {
namespace {

constexpr std::array<std::pair<Unit, std::string_view>, 8> kUnitNames{{
    {Unit::si, "si"},
    {Unit::feet, "ft"},
    {Unit::knots, "kt"},
    {Unit::feet_per_minute, "ft/min"},
    {Unit::degrees, "deg"},
    {Unit::celsius, "degC"},
    {Unit::kilograms_per_hour, "kg/h"},
    {Unit::nautical_miles, "nm"},
}};

}  // namespace

double to_si(Unit unit, double value) {
  switch (unit) {
    case Unit::si: return value;
    case Unit::feet: return value * kFeetToMeters;
    case Unit::knots: return value * kKnotsToMetersPerSecond;
    case Unit::feet_per_minute: return value * kFeetPerMinuteToMetersPerSecond;
    case Unit::degrees: return value * kDegreesToRadians;
    case Unit::celsius: return value + kCelsiusToKelvinOffset;
    case Unit::kilograms_per_hour: return value * kKilogramsPerHourToKilogramsPerSecond;
    case Unit::nautical_miles: return value * kNauticalMilesToMeters;
  }
  return value;
}

double from_si(Unit unit, double value) {
  switch (unit) {
    case Unit::si: return value;
    case Unit::feet: return value / kFeetToMeters;
    case Unit::knots: return value / kKnotsToMetersPerSecond;
    case Unit::feet_per_minute: return value / kFeetPerMinuteToMetersPerSecond;
    case Unit::degrees: return value / kDegreesToRadians;
    case Unit::celsius: return value - kCelsiusToKelvinOffset;
    case Unit::kilograms_per_hour: return value / kKilogramsPerHourToKilogramsPerSecond;
    case Unit::nautical_miles: return value / kNauticalMilesToMeters;
  }
  return value;
}

Unit parse_unit(std::string_view name) {
  for (const auto& [unit, text] : kUnitNames) {
    if (text == name) return unit;
  }
  throw std::invalid_argument("unknown unit '" + std::string(name) + "'");
}

std::string_view unit_name(Unit unit) {
  for (const auto& [u, text] : kUnitNames) {
    if (u == unit) return text;
  }
  return "si";
}

}  // namespace nodefdm::units
