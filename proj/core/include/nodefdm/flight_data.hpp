#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nodefdm::data {

inline constexpr double kSampleInterval = 4.0;  // s, 0.25 Hz
inline constexpr std::size_t kSequenceLength = 60;

struct StateVector {
  double h = 0.0;      // m
  double d = 0.0;      // m
  double gamma = 0.0;  // rad
  double v_tas = 0.0;  // m/s
  double m = 0.0;      // kg
};

struct ControlVector {
  double h_sel = 0.0;   // m
  double v_sel = 0.0;   // m/s, CAS target
  double vz_sel = 0.0;  // m/s, 0 when no vertical-speed mode is engaged
  int flap = 0;         // 0..4
  int gear = 0;         // 0 up, 1 down
  int speed_brake = 0;  // 0 retracted, 1 deployed
};

struct ContextVector {
  double t_oat = 288.15;    // K
  double wind_par = 0.0;    // m/s, headwind positive
  double wind_perp = 0.0;   // m/s
};

struct IntermediateVector {
  double mach = 0.0;
  double v_cas = 0.0;
  double vz = 0.0;
  double v_gs = 0.0;
  double dh_sel = 0.0;
  double dv_sel = 0.0;
  double alpha = 0.0;
  double theta = 0.0;
  double n1 = 0.0;
  double fuel_flow = 0.0;  // kg/s
};

struct FlightRecord {
  double time = 0.0;  // s since first record
  StateVector x;
  ControlVector u;
  ContextVector e0;
  IntermediateVector e;
};

struct FlightSeries {
  std::string tag;
  double dt = kSampleInterval;
  std::vector<FlightRecord> records;
};

/// Every scalar channel the model or the data pipeline can address by name.
/// The two trailing entries are state derivatives estimated from consecutive
/// records; they only exist as normalisation targets.
enum class Feature : std::size_t {
  h, d, gamma, v_tas, m,
  h_sel, v_sel, vz_sel, flap, gear, speed_brake,
  t_oat, wind_par, wind_perp,
  mach, v_cas, vz, v_gs, dh_sel, dv_sel,
  alpha, theta, n1, fuel_flow,
  dv_tas_dt, dgamma_dt,
};
inline constexpr std::size_t kFeatureCount = 26;

std::string_view feature_name(Feature f);
std::optional<Feature> feature_from_name(std::string_view name);
/// Binary and index channels (flap, gear, speed brake) are never z-scored.
bool is_discrete(Feature f);
/// Value of a recorded channel. Derivative features are not recorded and throw.
double feature_value(const FlightRecord& r, Feature f);

struct FeatureStats {
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const FeatureStats&) const = default;
};

class NormStats {
 public:
  NormStats();

  const FeatureStats& operator[](Feature f) const { return stats_[static_cast<std::size_t>(f)]; }
  FeatureStats& operator[](Feature f) { return stats_[static_cast<std::size_t>(f)]; }

  double normalize(Feature f, double value) const;
  double denormalize(Feature f, double value) const;

  bool operator==(const NormStats&) const = default;

 private:
  std::array<FeatureStats, kFeatureCount> stats_;
};

/// Population mean/std per feature across every record of every training
/// flight. Throws std::invalid_argument naming a zero-variance continuous
/// feature, or on an empty set.
NormStats compute_norm_stats(std::span<const FlightSeries> train);

struct Sequence {
  std::string tag;
  std::size_t start = 0;  // index of the first record in the source flight
  std::vector<FlightRecord> records;
};

/// Non-overlapping windows of `length` records. A window never spans a gap in
/// the time column; the remainder after the last full window is dropped.
std::vector<Sequence> slice_sequences(const FlightSeries& flight,
                                      std::size_t length = kSequenceLength);

struct ValidationIssue {
  std::size_t index = 0;
  std::string message;
};

/// Checks the FlightSeries invariants; an empty result means valid.
std::vector<ValidationIssue> validate(const FlightSeries& flight);

}  // namespace nodefdm::data
