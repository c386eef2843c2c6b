#pragma once

#include <array>
#include <filesystem>
#include <string>

namespace nodefdm::perf {

struct DragPolar {
  double cd0 = 0.0;
  double k = 0.0;

  bool operator==(const DragPolar&) const = default;
};

/// Generic twin-jet point-mass performance coefficients. Thrust is the
/// all-engine climb rating; fuel flow is TSFC times thrust times the airframe's
/// engine efficiency multiplier.
struct PerformanceConfig {
  double reference_mass = 64000.0;  // kg
  double wing_area = 122.6;         // m^2

  std::array<DragPolar, 5> polar{{
      {0.0240, 0.0375}, {0.0300, 0.0390}, {0.0450, 0.0400}, {0.0650, 0.0420}, {0.0900, 0.0450}}};
  double gear_cd0 = 0.018;
  double speed_brake_cd0 = 0.020;

  std::array<double, 5> cl0{{0.20, 0.45, 0.65, 0.85, 1.10}};
  double cl_alpha = 5.2;  // 1/rad

  double max_thrust_sea_level = 150000.0;  // N
  double thrust_lapse = 0.7;               // exponent on density ratio
  double thrust_mach_slope = 0.3;
  double idle_fraction = 0.07;

  double tsfc_base = 1.2e-5;  // kg/(N s)
  double tsfc_mach_slope = 0.5;
  double fuel_multiplier = 1.0;

  double n1_idle = 22.0;       // %
  double n1_altitude_gain = 4.0;  // % per 10 km

  double cas_min = 60.0;  // m/s
  double cas_max = 180.0;
  double mach_max = 0.82;
  double max_altitude = 12500.0;

  bool operator==(const PerformanceConfig&) const = default;
};

/// Throws std::invalid_argument if a coefficient is non-finite or a
/// physically positive one is not positive.
void validate(const PerformanceConfig& cfg);

/// Model-mismatch copy: drag coefficients scaled by (1 + eps), maximum thrust
/// and TSFC by (1 - eps).
PerformanceConfig perturbed(const PerformanceConfig& cfg, double eps);

/// Airframe variant: lift curve and N1 map scaled by (1 + eps).
PerformanceConfig airframe_variant(const PerformanceConfig& cfg, double eps, double fuel_multiplier);

struct AeroState {
  double h = 0.0;
  double v_tas = 0.0;
  double m = 0.0;
  double cos_gamma = 1.0;
  double t_oat = 288.15;
  int flap = 0;
  int gear = 0;
  int speed_brake = 0;
};

double lift_coefficient(const PerformanceConfig& cfg, const AeroState& s);
double drag(const PerformanceConfig& cfg, const AeroState& s);
double max_thrust(const PerformanceConfig& cfg, double h, double t_oat, double mach);
double idle_thrust(const PerformanceConfig& cfg, double h, double t_oat, double mach);
double fuel_flow(const PerformanceConfig& cfg, double thrust, double mach);
double angle_of_attack(const PerformanceConfig& cfg, double cl, int flap);
double n1(const PerformanceConfig& cfg, double thrust, double idle, double max, double h);

std::string to_json(const PerformanceConfig& cfg);
PerformanceConfig from_json(const std::string& text);
PerformanceConfig load(const std::filesystem::path& path);
void save(const PerformanceConfig& cfg, const std::filesystem::path& path);

}  // namespace nodefdm::perf
