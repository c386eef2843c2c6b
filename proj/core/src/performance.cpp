#include "nodefdm/performance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "nodefdm/atmosphere.hpp"

namespace nodefdm::perf {
namespace {

using json = nlohmann::json;
namespace atm = nodefdm::atmosphere;

void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || !(v > 0.0)) {
    throw std::invalid_argument(std::string("performance coefficient '") + name + "' must be positive");
  }
}

}  // namespace

void validate(const PerformanceConfig& cfg) {
  require_positive(cfg.reference_mass, "reference_mass");
  require_positive(cfg.wing_area, "wing_area");
  for (const auto& p : cfg.polar) {
    require_positive(p.cd0, "cd0");
    require_positive(p.k, "k");
  }
  require_positive(cfg.gear_cd0, "gear_cd0");
  require_positive(cfg.speed_brake_cd0, "speed_brake_cd0");
  require_positive(cfg.cl_alpha, "cl_alpha");
  for (double c : cfg.cl0) {
    if (!std::isfinite(c)) throw std::invalid_argument("performance coefficient 'cl0' not finite");
  }
  require_positive(cfg.max_thrust_sea_level, "max_thrust_sea_level");
  require_positive(cfg.thrust_lapse, "thrust_lapse");
  if (!(cfg.thrust_mach_slope >= 0.0 && cfg.thrust_mach_slope < 1.0)) {
    throw std::invalid_argument("performance coefficient 'thrust_mach_slope' must lie in [0, 1)");
  }
  if (!(cfg.idle_fraction > 0.0 && cfg.idle_fraction < 1.0)) {
    throw std::invalid_argument("performance coefficient 'idle_fraction' must lie in (0, 1)");
  }
  require_positive(cfg.tsfc_base, "tsfc_base");
  if (!(cfg.tsfc_mach_slope >= 0.0)) throw std::invalid_argument("tsfc_mach_slope must be >= 0");
  require_positive(cfg.fuel_multiplier, "fuel_multiplier");
  require_positive(cfg.n1_idle, "n1_idle");
  require_positive(cfg.cas_min, "cas_min");
  require_positive(cfg.cas_max, "cas_max");
  require_positive(cfg.mach_max, "mach_max");
  require_positive(cfg.max_altitude, "max_altitude");
  if (cfg.cas_min >= cfg.cas_max) throw std::invalid_argument("cas_min must be below cas_max");
}

PerformanceConfig perturbed(const PerformanceConfig& cfg, double eps) {
  PerformanceConfig out = cfg;
  for (auto& p : out.polar) {
    p.cd0 *= 1.0 + eps;
    p.k *= 1.0 + eps;
  }
  out.gear_cd0 *= 1.0 + eps;
  out.speed_brake_cd0 *= 1.0 + eps;
  out.max_thrust_sea_level *= 1.0 - eps;
  out.tsfc_base *= 1.0 - eps;
  return out;
}

PerformanceConfig airframe_variant(const PerformanceConfig& cfg, double eps, double fuel_multiplier) {
  PerformanceConfig out = cfg;
  out.cl_alpha *= 1.0 + eps;
  for (auto& c : out.cl0) c *= 1.0 + eps;
  out.n1_idle *= 1.0 + eps;
  out.n1_altitude_gain *= 1.0 + eps;
  out.fuel_multiplier = fuel_multiplier;
  return out;
}

double lift_coefficient(const PerformanceConfig& cfg, const AeroState& s) {
  const auto air = atm::sample(s.h, s.t_oat);
  const double q = 0.5 * air.rho * s.v_tas * s.v_tas;
  return s.m * atm::kG0 * s.cos_gamma / (q * cfg.wing_area);
}

double drag(const PerformanceConfig& cfg, const AeroState& s) {
  const auto air = atm::sample(s.h, s.t_oat);
  const double q = 0.5 * air.rho * s.v_tas * s.v_tas;
  const double cl = s.m * atm::kG0 * s.cos_gamma / (q * cfg.wing_area);
  const auto& polar = cfg.polar.at(static_cast<std::size_t>(std::clamp(s.flap, 0, 4)));
  double cd = polar.cd0 + polar.k * cl * cl;
  if (s.gear) cd += cfg.gear_cd0;
  if (s.speed_brake) cd += cfg.speed_brake_cd0;
  return q * cfg.wing_area * cd;
}

double max_thrust(const PerformanceConfig& cfg, double h, double t_oat, double mach) {
  const auto air = atm::sample(h, t_oat);
  const double sigma = air.rho / atm::kSeaLevelDensity;
  return cfg.max_thrust_sea_level * std::pow(sigma, cfg.thrust_lapse) *
         (1.0 - cfg.thrust_mach_slope * mach);
}

double idle_thrust(const PerformanceConfig& cfg, double h, double t_oat, double mach) {
  return cfg.idle_fraction * max_thrust(cfg, h, t_oat, mach);
}

double fuel_flow(const PerformanceConfig& cfg, double thrust, double mach) {
  return cfg.fuel_multiplier * cfg.tsfc_base * (1.0 + cfg.tsfc_mach_slope * mach) *
         std::max(thrust, 0.0);
}

double angle_of_attack(const PerformanceConfig& cfg, double cl, int flap) {
  return (cl - cfg.cl0.at(static_cast<std::size_t>(std::clamp(flap, 0, 4)))) / cfg.cl_alpha;
}

double n1(const PerformanceConfig& cfg, double thrust, double idle, double max, double h) {
  const double frac = max > idle ? std::clamp((thrust - idle) / (max - idle), 0.0, 1.2) : 0.0;
  const double value = cfg.n1_idle + (100.0 - cfg.n1_idle) * frac + cfg.n1_altitude_gain * h / 10000.0;
  return std::clamp(value, 0.0, 110.0);
}

std::string to_json(const PerformanceConfig& cfg) {
  json j;
  j["reference_mass"] = cfg.reference_mass;
  j["wing_area"] = cfg.wing_area;
  json polar = json::array();
  for (const auto& p : cfg.polar) polar.push_back({{"cd0", p.cd0}, {"k", p.k}});
  j["drag_polar"] = polar;
  j["gear_cd0"] = cfg.gear_cd0;
  j["speed_brake_cd0"] = cfg.speed_brake_cd0;
  j["cl0"] = cfg.cl0;
  j["cl_alpha"] = cfg.cl_alpha;
  j["max_thrust_sea_level"] = cfg.max_thrust_sea_level;
  j["thrust_lapse"] = cfg.thrust_lapse;
  j["thrust_mach_slope"] = cfg.thrust_mach_slope;
  j["idle_fraction"] = cfg.idle_fraction;
  j["tsfc_base"] = cfg.tsfc_base;
  j["tsfc_mach_slope"] = cfg.tsfc_mach_slope;
  j["fuel_multiplier"] = cfg.fuel_multiplier;
  j["n1_idle"] = cfg.n1_idle;
  j["n1_altitude_gain"] = cfg.n1_altitude_gain;
  j["cas_min"] = cfg.cas_min;
  j["cas_max"] = cfg.cas_max;
  j["mach_max"] = cfg.mach_max;
  j["max_altitude"] = cfg.max_altitude;
  return j.dump(2);
}

PerformanceConfig from_json(const std::string& text) {
  const json j = json::parse(text);
  PerformanceConfig cfg;
  auto get = [&](const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>();
  };
  get("reference_mass", cfg.reference_mass);
  get("wing_area", cfg.wing_area);
  if (j.contains("drag_polar")) {
    const auto& polar = j.at("drag_polar");
    if (polar.size() != cfg.polar.size()) throw std::invalid_argument("drag_polar needs 5 entries");
    for (std::size_t i = 0; i < cfg.polar.size(); ++i) {
      cfg.polar[i] = {polar[i].at("cd0").get<double>(), polar[i].at("k").get<double>()};
    }
  }
  get("gear_cd0", cfg.gear_cd0);
  get("speed_brake_cd0", cfg.speed_brake_cd0);
  if (j.contains("cl0")) cfg.cl0 = j.at("cl0").get<std::array<double, 5>>();
  get("cl_alpha", cfg.cl_alpha);
  get("max_thrust_sea_level", cfg.max_thrust_sea_level);
  get("thrust_lapse", cfg.thrust_lapse);
  get("thrust_mach_slope", cfg.thrust_mach_slope);
  get("idle_fraction", cfg.idle_fraction);
  get("tsfc_base", cfg.tsfc_base);
  get("tsfc_mach_slope", cfg.tsfc_mach_slope);
  get("fuel_multiplier", cfg.fuel_multiplier);
  get("n1_idle", cfg.n1_idle);
  get("n1_altitude_gain", cfg.n1_altitude_gain);
  get("cas_min", cfg.cas_min);
  get("cas_max", cfg.cas_max);
  get("mach_max", cfg.mach_max);
  get("max_altitude", cfg.max_altitude);
  validate(cfg);
  return cfg;
}

PerformanceConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open performance config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void save(const PerformanceConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(cfg) << '\n';
}

}  // namespace nodefdm::perf
