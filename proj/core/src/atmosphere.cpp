#include "nodefdm/atmosphere.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nodefdm::atmosphere {
namespace {

constexpr double kPressureExponent = kG0 / (kGasConstant * kTroposphereLapseRate);
// (gamma - 1) / gamma and its inverse for the Saint-Venant relations.
constexpr double kKappa = (kGammaAir - 1.0) / kGammaAir;
constexpr double kInverseKappa = kGammaAir / (kGammaAir - 1.0);
// 2 gamma / (gamma - 1) * p0 / rho0
constexpr double kCasScale = 2.0 * kInverseKappa * kSeaLevelPressure / kSeaLevelDensity;

void check_altitude(double h) {
  if (!(h >= kMinAltitude && h <= kMaxAltitude)) {
    throw std::domain_error("altitude " + std::to_string(h) + " m outside ISA model range");
  }
}

void check_temperature(double t_oat) {
  if (!(t_oat > 0.0)) {
    throw std::domain_error("non-positive static temperature " + std::to_string(t_oat) + " K");
  }
}

double cas_from_impact_pressure(double qc) {
  const double y = qc / kSeaLevelPressure + 1.0;
  return std::sqrt(kCasScale * (std::pow(y, kKappa) - 1.0));
}

}  // namespace

double speed_of_sound(double t_oat) {
  check_temperature(t_oat);
  return std::sqrt(kGammaAir * kGasConstant * t_oat);
}

double isa_temperature(double h) {
  check_altitude(h);
  if (h <= kTropopauseAltitude) return kSeaLevelTemperature - kTroposphereLapseRate * h;
  return kTropopauseTemperature;
}

double isa_pressure(double h) {
  check_altitude(h);
  if (h <= kTropopauseAltitude) {
    return kSeaLevelPressure * std::pow(isa_temperature(h) / kSeaLevelTemperature, kPressureExponent);
  }
  const double p11 =
      kSeaLevelPressure * std::pow(kTropopauseTemperature / kSeaLevelTemperature, kPressureExponent);
  return p11 * std::exp(-kG0 * (h - kTropopauseAltitude) / (kGasConstant * kTropopauseTemperature));
}

double isa_pressure_gradient(double h) {
  return -isa_pressure(h) * kG0 / (kGasConstant * isa_temperature(h));
}

AtmosphereSample sample(double h, double t_oat) {
  check_temperature(t_oat);
  AtmosphereSample s;
  s.t_oat = t_oat;
  s.p = isa_pressure(h);
  s.rho = s.p / (kGasConstant * t_oat);
  s.a = speed_of_sound(t_oat);
  return s;
}

double mach(double v_tas, double t_oat) { return v_tas / speed_of_sound(t_oat); }

double tas_to_cas(double v_tas, double h, double t_oat) {
  return tas_to_cas_with_partials(v_tas, h, t_oat).cas;
}

double cas_to_tas(double v_cas, double h, double t_oat) {
  if (!(v_cas >= 0.0)) throw std::domain_error("negative calibrated airspeed");
  const double p = isa_pressure(h);
  const double a = speed_of_sound(t_oat);
  const double qc = kSeaLevelPressure *
                    (std::pow(1.0 + v_cas * v_cas / kCasScale, kInverseKappa) - 1.0);
  const double m2 = 2.0 / (kGammaAir - 1.0) * (std::pow(qc / p + 1.0, kKappa) - 1.0);
  if (m2 >= 1.0) throw std::domain_error("calibrated airspeed maps to supersonic flight");
  return std::sqrt(m2) * a;
}

CasWithPartials tas_to_cas_with_partials(double v_tas, double h, double t_oat) {
  const double p = isa_pressure(h);
  const double a = speed_of_sound(t_oat);
  if (!(v_tas >= 0.0)) throw std::domain_error("negative true airspeed");
  if (v_tas >= a) throw std::domain_error("supersonic true airspeed " + std::to_string(v_tas));

  CasWithPartials out;
  const double a2 = a * a;
  if (v_tas == 0.0) {
    // Incompressible limit: CAS ~ v sqrt(rho / rho0).
    out.d_cas_d_tas = std::sqrt(p / (kGasConstant * t_oat) / kSeaLevelDensity);
    return out;
  }
  const double m = v_tas / a;
  const double x = 1.0 + 0.5 * (kGammaAir - 1.0) * m * m;
  const double bracket = std::pow(x, kInverseKappa) - 1.0;
  const double qc = p * bracket;
  out.cas = cas_from_impact_pressure(qc);

  const double y = qc / kSeaLevelPressure + 1.0;
  const double d_cas_d_qc =
      kCasScale * kKappa * std::pow(y, kKappa - 1.0) / kSeaLevelPressure / (2.0 * out.cas);
  const double d_qc_d_v = p * kInverseKappa * std::pow(x, kInverseKappa - 1.0) *
                          (kGammaAir - 1.0) * v_tas / a2;
  const double d_qc_d_h = isa_pressure_gradient(h) * bracket;
  out.d_cas_d_tas = d_cas_d_qc * d_qc_d_v;
  out.d_cas_d_h = d_cas_d_qc * d_qc_d_h;
  return out;
}

double tas_gradient_at_constant_cas(double v_cas, double h, double delta_isa) {
  constexpr double step = 1.0;
  const double lo = std::max(kMinAltitude, h - step);
  const double hi = std::min(kMaxAltitude, h + step);
  const double v_lo = cas_to_tas(v_cas, lo, isa_temperature(lo) + delta_isa);
  const double v_hi = cas_to_tas(v_cas, hi, isa_temperature(hi) + delta_isa);
  return (v_hi - v_lo) / (hi - lo);
}

}  // namespace nodefdm::atmosphere
