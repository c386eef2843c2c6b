#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nodefdm/flight_data.hpp"
#include "nodefdm/performance.hpp"

// Model-driven benchmark: a point-mass performance model driven by four
// trajectory-control routines, re-selected every 4 s from the fed-back state
// and the recorded autopilot targets.

namespace nodefdm::baseline {

enum class RoutineKind {
  acc_dec,
  constant_speed_level,
  constant_speed_rating,
  constant_speed_rocd,
};

std::string_view routine_name(RoutineKind kind);

/// Capture bands and guidance gains shared by the baseline and the synthetic
/// flight generator.
struct GuidanceSettings {
  double altitude_tolerance = 60.0;  // m
  double speed_tolerance = 2.0;      // m/s CAS
  double altitude_gain = 0.05;       // 1/s, vertical speed per metre of altitude error
  double max_capture_vz = 3.0;       // m/s
  double speed_gain = 0.05;          // 1/s
  double climb_accel_share = 0.3;    // fraction of excess power spent on climbing while accelerating
  double level_accel_share = 1.0;    // fraction spent on speed when level
  double speed_change_rate = 0.4;    // m/s^2, for accelerating descents / decelerating climbs
  double max_gamma = 0.2;            // rad
};

struct BaselineState {
  double h = 0.0;
  double d = 0.0;
  double v_tas = 0.0;
  double m = 0.0;
  double v_cas = 0.0;
  double mach = 0.0;
  bool envelope_flag = false;
};

BaselineState make_state(double h, double d, double v_tas, double m, double t_oat);

RoutineKind select_routine(const BaselineState& state, const data::ControlVector& u,
                           const GuidanceSettings& guidance = {});

/// Thrust and vertical speed chosen by a routine.
struct Command {
  double thrust = 0.0;  // N
  double vz = 0.0;      // m/s
};

Command command(const BaselineState& state, RoutineKind routine, const data::ControlVector& u,
                const data::ContextVector& e0, const perf::PerformanceConfig& cfg,
                const GuidanceSettings& guidance = {});

/// One explicit step under a command, with everything needed to fill a record.
struct StepResult {
  BaselineState next;
  double gamma = 0.0;
  double vz = 0.0;
  double v_gs = 0.0;
  double dv_dt = 0.0;
  double thrust = 0.0;
  double drag = 0.0;
  double fuel_flow = 0.0;
  double alpha = 0.0;
  double n1 = 0.0;
};

StepResult propagate(const BaselineState& state, const Command& cmd, const data::ControlVector& u,
                     const data::ContextVector& e0, const perf::PerformanceConfig& cfg, double dt,
                     const GuidanceSettings& guidance = {});

StepResult advance(const BaselineState& state, RoutineKind routine, const data::ControlVector& u,
                   const data::ContextVector& e0, const perf::PerformanceConfig& cfg,
                   double dt = data::kSampleInterval, const GuidanceSettings& guidance = {});

/// Record for `state` given the step taken from it.
data::FlightRecord make_record(double time, const BaselineState& state, const StepResult& step,
                               const data::ControlVector& u, const data::ContextVector& e0,
                               double theta_offset = 0.0);

struct SimulationResult {
  data::FlightSeries series;
  std::vector<RoutineKind> routines;
  std::optional<std::size_t> failure_index;
  std::size_t envelope_flags = 0;
};

/// Full-flight benchmark rollout from the first recorded point, reusing the
/// recorded controls and context at every step over the same horizon.
SimulationResult simulate_flight(const data::FlightSeries& reference, const perf::PerformanceConfig& cfg,
                                 const GuidanceSettings& guidance = {});

}  // namespace nodefdm::baseline
