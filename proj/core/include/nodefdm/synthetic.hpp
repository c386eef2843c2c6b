#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nodefdm/baseline.hpp"
#include "nodefdm/flight_csv.hpp"
#include "nodefdm/flight_data.hpp"
#include "nodefdm/performance.hpp"

namespace nodefdm::synth {

class InfeasibleScript : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScriptPhase { climb, level, descent };

struct StepClimb {
  double distance = 0.0;  // m along track at which the new level is selected
  double level = 0.0;     // m
};

/// Where a vertical-speed mode is engaged during the flight.
struct VerticalSpeedSegment {
  enum class Where { final_climb, initial_descent, approach };
  Where where = Where::initial_descent;
  double vz = -5.0;       // m/s
  double span = 1500.0;   // m of altitude over which the mode stays engaged
};

struct WindProfile {
  double par_surface = 0.0;   // m/s, headwind at h = 0
  double par_gradient = 0.0;  // m/s per 10 km
  double perp_surface = 0.0;
  double perp_gradient = 0.0;

  double par(double h) const { return par_surface + par_gradient * h / 10000.0; }
  double perp(double h) const { return perp_surface + perp_gradient * h / 10000.0; }
};

struct NoiseSettings {
  double thrust_sigma = 0.01;   // relative
  double vz_sigma = 0.1;        // m/s
  double correlation_time = 40.0;  // s
  double theta_sigma = 0.002;   // rad, attitude measurement scatter
};

struct FlightScript {
  double takeoff_mass = 64000.0;     // kg, at the first record
  double initial_altitude = 500.0;   // m
  double initial_cas = 85.0;         // m/s
  double cruise_level = 10668.0;     // m
  double climb_cas = 150.0;          // m/s
  double descent_cas = 145.0;        // m/s
  double cruise_mach = 0.78;
  double terminal_cas = 128.6;       // below 3048 m
  double approach_cas = 85.0;
  double final_altitude = 450.0;     // m, selected for the final descent
  double end_altitude = 500.0;       // m, generation stops below this in descent
  std::vector<StepClimb> step_climbs;
  double descent_distance = 500000.0;  // m along track where descent starts
  std::vector<VerticalSpeedSegment> vs_segments;
  WindProfile wind;
  double delta_isa = 0.0;  // K
  NoiseSettings noise;
  bool noise_enabled = true;
  std::uint64_t seed = 1;
  double max_duration = 6.0 * 3600.0;  // s
};

struct GeneratedFlight {
  data::FlightSeries series;
  std::vector<ScriptPhase> phases;  // per record, from the active altitude target
};

/// Scripted autopilot flying the shared point-mass model. Throws
/// InfeasibleScript naming the violated constraint.
GeneratedFlight generate_flight(const perf::PerformanceConfig& cfg, const FlightScript& script,
                                const baseline::GuidanceSettings& guidance = {});

/// Draws a plausible random script.
FlightScript random_script(std::uint64_t seed);

struct Airframe {
  std::string tag;
  std::string split;
  double variant = 0.0;          // relative perturbation of the lift curve and N1 map
  double fuel_multiplier = 1.0;  // engine efficiency degradation
};

struct DatasetRequest {
  std::size_t train = 10;
  std::size_t val = 2;
  std::size_t test = 2;
  std::uint64_t seed = 1;
  std::size_t airframes_train = 5;
  std::size_t airframes_val = 2;
  std::size_t airframes_test = 2;
  double variant_magnitude = 0.03;
  double min_fuel_multiplier = 1.02;
  double max_fuel_multiplier = 1.06;
};

struct DatasetSummary {
  data::DatasetManifest manifest;
  std::vector<Airframe> airframes;
  std::size_t infeasible_retries = 0;
  std::vector<std::string> infeasible;  // one message per rejected script
};

/// Writes <out>/manifest.json, <out>/performance.json, <out>/airframes.json and
/// one CSV per flight under <out>/<split>/. Deterministic for a fixed seed.
DatasetSummary generate_dataset(const perf::PerformanceConfig& cfg, const DatasetRequest& request,
                                const std::filesystem::path& out);

}  // namespace nodefdm::synth
