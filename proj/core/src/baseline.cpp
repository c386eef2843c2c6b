#include "nodefdm/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nodefdm/atmosphere.hpp"

namespace nodefdm::baseline {
namespace {

namespace atm = nodefdm::atmosphere;
constexpr double g0 = atm::kG0;

perf::AeroState aero_state(const BaselineState& s, double cos_gamma, const data::ControlVector& u,
                           const data::ContextVector& e0) {
  return {s.h, s.v_tas, s.m, cos_gamma, e0.t_oat, u.flap, u.gear, u.speed_brake};
}

double cos_from_vz(double vz, double v) {
  const double sg = std::clamp(vz / v, -1.0, 1.0);
  return std::sqrt(1.0 - sg * sg);
}

double level_vz(double dh, const GuidanceSettings& g) {
  return std::clamp(g.altitude_gain * dh, -g.max_capture_vz, g.max_capture_vz);
}

}  // namespace

std::string_view routine_name(RoutineKind kind) {
  switch (kind) {
    case RoutineKind::acc_dec: return "ACC_DEC";
    case RoutineKind::constant_speed_level: return "CONSTANT_SPEED_LEVEL";
    case RoutineKind::constant_speed_rating: return "CONSTANT_SPEED_RATING";
    case RoutineKind::constant_speed_rocd: return "CONSTANT_SPEED_ROCD";
  }
  return "?";
}

BaselineState make_state(double h, double d, double v_tas, double m, double t_oat) {
  BaselineState s{h, d, v_tas, m, 0.0, 0.0, false};
  s.v_cas = atm::tas_to_cas(v_tas, h, t_oat);
  s.mach = atm::mach(v_tas, t_oat);
  return s;
}

RoutineKind select_routine(const BaselineState& state, const data::ControlVector& u,
                           const GuidanceSettings& guidance) {
  if (std::abs(u.v_sel - state.v_cas) > guidance.speed_tolerance) return RoutineKind::acc_dec;
  if (std::abs(u.h_sel - state.h) <= guidance.altitude_tolerance) {
    return RoutineKind::constant_speed_level;
  }
  if (u.vz_sel != 0.0) return RoutineKind::constant_speed_rocd;
  return RoutineKind::constant_speed_rating;
}

Command command(const BaselineState& s, RoutineKind routine, const data::ControlVector& u,
                const data::ContextVector& e0, const perf::PerformanceConfig& cfg,
                const GuidanceSettings& guidance) {
  const double v = s.v_tas;
  const double dh = u.h_sel - s.h;
  const bool level = std::abs(dh) <= guidance.altitude_tolerance;
  const double t_max = perf::max_thrust(cfg, s.h, e0.t_oat, s.mach);
  const double t_idle = perf::idle_thrust(cfg, s.h, e0.t_oat, s.mach);
  const double delta_isa = e0.t_oat - atm::isa_temperature(s.h);
  const double v_target = atm::cas_to_tas(std::max(u.v_sel, 1.0), s.h, e0.t_oat);
  const double speed_error = v_target - v;
  const double dv_dh = atm::tas_gradient_at_constant_cas(s.v_cas, s.h, delta_isa);
  const double vz_limit = v * std::sin(guidance.max_gamma);

  // Specific excess power (m/s) for a trial thrust and vertical speed.
  auto excess_power = [&](double thrust, double vz) {
    const double d = perf::drag(cfg, aero_state(s, cos_from_vz(vz, v), u, e0));
    return (thrust - d) * v / (s.m * g0);
  };
  // Thrust that realises vz together with a target TAS rate.
  auto thrust_for = [&](double vz, double dv_dt) {
    const double d = perf::drag(cfg, aero_state(s, cos_from_vz(vz, v), u, e0));
    return std::clamp(d + s.m * g0 * vz / v + s.m * dv_dt, t_idle, t_max);
  };

  Command cmd;
  switch (routine) {
    case RoutineKind::constant_speed_level: {
      cmd.vz = level_vz(dh, guidance);
      cmd.thrust = thrust_for(cmd.vz, guidance.speed_gain * speed_error);
      break;
    }
    case RoutineKind::acc_dec: {
      const bool accelerate = u.v_sel > s.v_cas;
      cmd.thrust = accelerate ? t_max : t_idle;
      if (level) {
        // All excess power goes to speed; altitude is held.
        cmd.vz = level_vz(dh, guidance) * guidance.level_accel_share;
      } else if (dh > 0.0) {
        const double p = excess_power(cmd.thrust, 0.0);
        cmd.vz = accelerate ? guidance.climb_accel_share * p
                            : p + v * guidance.speed_change_rate / g0;
        cmd.vz = std::clamp(cmd.vz, 0.0, vz_limit);
      } else {
        const double p = excess_power(cmd.thrust, 0.0);
        cmd.vz = accelerate ? p - v * guidance.speed_change_rate / g0
                            : guidance.climb_accel_share * p;
        cmd.vz = std::clamp(cmd.vz, -vz_limit, 0.0);
      }
      break;
    }
    case RoutineKind::constant_speed_rating: {
      cmd.thrust = dh > 0.0 ? t_max : t_idle;
      const double p = excess_power(cmd.thrust, 0.0);
      const double vz = (g0 * p - v * guidance.speed_gain * speed_error) / (g0 + v * dv_dh);
      cmd.vz = dh > 0.0 ? std::clamp(vz, 0.0, vz_limit) : std::clamp(vz, -vz_limit, 0.0);
      break;
    }
    case RoutineKind::constant_speed_rocd: {
      cmd.vz = std::clamp(u.vz_sel, -vz_limit, vz_limit);
      cmd.thrust = thrust_for(cmd.vz, dv_dh * cmd.vz + guidance.speed_gain * speed_error);
      break;
    }
  }
  return cmd;
}

StepResult propagate(const BaselineState& s, const Command& cmd, const data::ControlVector& u,
                     const data::ContextVector& e0, const perf::PerformanceConfig& cfg, double dt,
                     const GuidanceSettings& guidance) {
  StepResult r;
  const double v = s.v_tas;
  if (!(v > 0.0)) throw std::domain_error("non-positive airspeed in point-mass propagation");
  const double vz_limit = v * std::sin(guidance.max_gamma);
  r.vz = std::clamp(cmd.vz, -vz_limit, vz_limit);
  r.gamma = std::asin(r.vz / v);
  r.thrust = std::max(cmd.thrust, 0.0);

  const auto aero = aero_state(s, std::cos(r.gamma), u, e0);
  r.drag = perf::drag(cfg, aero);
  r.dv_dt = (r.thrust - r.drag) / s.m - g0 * std::sin(r.gamma);
  r.fuel_flow = perf::fuel_flow(cfg, r.thrust, s.mach);
  r.v_gs = v - e0.wind_par;
  r.alpha = perf::angle_of_attack(cfg, perf::lift_coefficient(cfg, aero), u.flap);
  r.n1 = perf::n1(cfg, r.thrust, perf::idle_thrust(cfg, s.h, e0.t_oat, s.mach),
                  perf::max_thrust(cfg, s.h, e0.t_oat, s.mach), s.h);

  BaselineState n;
  n.h = s.h + dt * r.vz;
  n.d = s.d + dt * r.v_gs;
  n.v_tas = v + dt * r.dv_dt;
  n.m = s.m - dt * r.fuel_flow;
  if (!std::isfinite(n.h) || n.h < -100.0) throw std::domain_error("altitude below -100 m");
  n.h = std::min(n.h, atm::kMaxAltitude);

  // Envelope: clamp CAS and Mach, flagging the step.
  const double t_next = e0.t_oat;
  const double a = atm::speed_of_sound(t_next);
  double v_hi = cfg.mach_max * a;
  if (atm::tas_to_cas(0.999 * a, n.h, t_next) > cfg.cas_max) {
    v_hi = std::min(v_hi, atm::cas_to_tas(cfg.cas_max, n.h, t_next));
  }
  double v_lo = atm::cas_to_tas(cfg.cas_min, n.h, t_next);
  if (n.v_tas > v_hi || n.v_tas < v_lo) {
    n.v_tas = std::clamp(n.v_tas, v_lo, v_hi);
    n.envelope_flag = true;
  }
  n.v_cas = atm::tas_to_cas(n.v_tas, n.h, t_next);
  n.mach = n.v_tas / a;
  r.next = n;
  return r;
}

StepResult advance(const BaselineState& state, RoutineKind routine, const data::ControlVector& u,
                   const data::ContextVector& e0, const perf::PerformanceConfig& cfg, double dt,
                   const GuidanceSettings& guidance) {
  return propagate(state, command(state, routine, u, e0, cfg, guidance), u, e0, cfg, dt, guidance);
}

data::FlightRecord make_record(double time, const BaselineState& s, const StepResult& step,
                               const data::ControlVector& u, const data::ContextVector& e0,
                               double theta_offset) {
  data::FlightRecord r;
  r.time = time;
  r.x = {s.h, s.d, step.gamma, s.v_tas, s.m};
  r.u = u;
  r.e0 = e0;
  r.e.mach = s.mach;
  r.e.v_cas = s.v_cas;
  r.e.vz = step.vz;
  r.e.v_gs = step.v_gs;
  r.e.dh_sel = u.h_sel - s.h;
  r.e.dv_sel = u.v_sel - s.v_cas;
  r.e.alpha = step.alpha;
  r.e.theta = step.alpha + step.gamma + theta_offset;
  r.e.n1 = step.n1;
  r.e.fuel_flow = step.fuel_flow;
  return r;
}

SimulationResult simulate_flight(const data::FlightSeries& reference, const perf::PerformanceConfig& cfg,
                                 const GuidanceSettings& guidance) {
  SimulationResult out;
  out.series.tag = reference.tag;
  out.series.dt = reference.dt;
  const auto& recs = reference.records;
  if (recs.empty()) return out;

  const auto& p0 = recs.front();
  BaselineState state = make_state(p0.x.h, p0.x.d, p0.x.v_tas, p0.x.m, p0.e0.t_oat);
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& rec = recs[k];
    try {
      // Recorded context applies at each step; re-derive CAS/Mach under it.
      state = make_state(state.h, state.d, state.v_tas, state.m, rec.e0.t_oat);
      const auto routine = select_routine(state, rec.u, guidance);
      const auto step = advance(state, routine, rec.u, rec.e0, cfg, reference.dt, guidance);
      out.series.records.push_back(make_record(rec.time, state, step, rec.u, rec.e0));
      out.routines.push_back(routine);
      if (step.next.envelope_flag) ++out.envelope_flags;
      state = step.next;
    } catch (const std::domain_error&) {
      out.failure_index = k;
      break;
    }
  }
  return out;
}

}  // namespace nodefdm::baseline
