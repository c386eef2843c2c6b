#pragma once

// ISA atmosphere and airspeed conversions. Pressure follows the ISA profile
// of pressure altitude; the recorded outside air temperature is used wherever
// temperature enters directly (speed of sound, gas-law density).

namespace nodefdm::atmosphere {

inline constexpr double kGammaAir = 1.4;
inline constexpr double kGasConstant = 287.05287;  // J/(kg K)
inline constexpr double kG0 = 9.80665;
inline constexpr double kSeaLevelTemperature = 288.15;
inline constexpr double kSeaLevelPressure = 101325.0;
inline constexpr double kSeaLevelDensity = kSeaLevelPressure / (kGasConstant * kSeaLevelTemperature);
inline constexpr double kTroposphereLapseRate = 0.0065;  // K/m
inline constexpr double kTropopauseAltitude = 11000.0;
inline constexpr double kTropopauseTemperature =
    kSeaLevelTemperature - kTroposphereLapseRate * kTropopauseAltitude;
inline constexpr double kMinAltitude = -2000.0;
inline constexpr double kMaxAltitude = 20000.0;

struct AtmosphereSample {
  double t_oat = 0.0;  // K
  double p = 0.0;      // Pa
  double rho = 0.0;    // kg/m^3
  double a = 0.0;      // m/s
};

double speed_of_sound(double t_oat);
double isa_temperature(double h);
double isa_pressure(double h);
/// dp/dh of the ISA profile, i.e. -p g0 / (R T_isa(h)).
double isa_pressure_gradient(double h);

/// Local atmosphere at pressure altitude `h` with the given static temperature.
AtmosphereSample sample(double h, double t_oat);

double mach(double v_tas, double t_oat);

double tas_to_cas(double v_tas, double h, double t_oat);
double cas_to_tas(double v_cas, double h, double t_oat);

struct CasWithPartials {
  double cas = 0.0;
  double d_cas_d_tas = 0.0;
  double d_cas_d_h = 0.0;
};

/// CAS together with its partial derivatives in TAS and altitude, for use in
/// differentiable rollouts.
CasWithPartials tas_to_cas_with_partials(double v_tas, double h, double t_oat);

/// d(TAS)/dh while holding CAS and the ISA temperature deviation constant.
double tas_gradient_at_constant_cas(double v_cas, double h, double delta_isa);

}  // namespace nodefdm::atmosphere
