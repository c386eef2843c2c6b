#pragma once

#include <numbers>
#include <string>
#include <string_view>

namespace nodefdm::units {

inline constexpr double kFeetToMeters = 0.3048;
inline constexpr double kKnotsToMetersPerSecond = 1852.0 / 3600.0;
inline constexpr double kFeetPerMinuteToMetersPerSecond = 0.3048 / 60.0;
inline constexpr double kDegreesToRadians = std::numbers::pi / 180.0;
inline constexpr double kCelsiusToKelvinOffset = 273.15;
inline constexpr double kKilogramsPerHourToKilogramsPerSecond = 1.0 / 3600.0;
inline constexpr double kNauticalMilesToMeters = 1852.0;

/// Recorder units a CSV column may be declared in. `si` means the column is
/// already in the SI unit of its feature.
enum class Unit {
  si,
  feet,
  knots,
  feet_per_minute,
  degrees,
  celsius,
  kilograms_per_hour,
  nautical_miles,
};

double to_si(Unit unit, double value);
double from_si(Unit unit, double value);

/// Accepts the short names used in CSV schema files: "si", "ft", "kt",
/// "ft/min", "deg", "degC", "kg/h", "nm". Throws std::invalid_argument.
Unit parse_unit(std::string_view name);
std::string_view unit_name(Unit unit);

}  // namespace nodefdm::units
