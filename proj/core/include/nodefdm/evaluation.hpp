#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nodefdm/flight_data.hpp"

namespace nodefdm::eval {

enum class Phase { climb, level, descent };
inline constexpr Phase kPhases[] = {Phase::climb, Phase::level, Phase::descent};

std::string_view phase_name(Phase p);
std::optional<Phase> phase_from_name(std::string_view name);

inline constexpr double kPhaseVzThreshold = 1.27;  // m/s, 250 ft/min
inline constexpr std::size_t kPhaseHysteresis = 5;
inline constexpr std::size_t kSmoothingWindow = 5;

/// Centered moving average of the recorded vertical speed, thresholded, then
/// runs shorter than `hysteresis` records merged into a neighbouring run.
std::vector<Phase> label_phases(const data::FlightSeries& reference, double vz_threshold = kPhaseVzThreshold,
                                std::size_t hysteresis = kPhaseHysteresis);

enum class Parameter { h, v_tas, gamma, m };
inline constexpr Parameter kParameters[] = {Parameter::h, Parameter::v_tas, Parameter::gamma, Parameter::m};

std::string_view parameter_name(Parameter p);
std::string_view parameter_unit(Parameter p);
std::optional<Parameter> parameter_from_name(std::string_view name);
/// Reference values with magnitude below this are skipped for MAPE; NaN means MAPE is not reported.
double mape_floor(Parameter p);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct MetricCell {
  std::size_t points = 0;
  Stat mae;
  Stat me;
  std::optional<Stat> mape;  // absent for gamma or when no point clears the floor
  std::size_t mape_points = 0;
};

struct PhaseMetricsRow {
  Parameter parameter = Parameter::h;
  std::optional<Phase> phase;  // empty: all phases pooled
  MetricCell cell;
};

struct PhaseMetricsTable {
  std::vector<PhaseMetricsRow> rows;  // parameter-major, phases in kPhases order then all

  const PhaseMetricsRow* find(Parameter p, std::optional<Phase> phase) const;
};

/// Pools points across flights; the table is independent of insertion order up to rounding.
class PhaseMetricsBuilder {
 public:
  /// Throws std::invalid_argument when lengths differ.
  void add(const data::FlightSeries& pred, const data::FlightSeries& ref, std::span<const Phase> labels);
  PhaseMetricsTable build() const;
  std::size_t points() const { return points_; }

 private:
  struct Samples {
    std::vector<double> error;
    std::vector<double> percent;
  };
  // [parameter][phase]
  Samples samples_[4][3];
  std::size_t points_ = 0;
};

PhaseMetricsTable phase_metrics(const data::FlightSeries& pred, const data::FlightSeries& ref,
                                std::span<const Phase> labels);

struct ConsumptionRow {
  std::string tag;
  double reference = 0.0;  // kg, m(t0) - m(t_end)
  double predicted = 0.0;
  double error = 0.0;  // predicted - reference
};

struct ConsumptionMetrics {
  std::size_t flights = 0;
  Stat mae;
  Stat mape;
  Stat me;
  std::vector<ConsumptionRow> rows;
  std::vector<std::string> warnings;
};

struct FlightPair {
  const data::FlightSeries* pred = nullptr;
  const data::FlightSeries* ref = nullptr;
};

/// Flights whose reference mass ever increases are excluded with a warning.
ConsumptionMetrics consumption_metrics(std::span<const FlightPair> flights);

/// Population mean and standard deviation.
Stat describe(std::span<const double> values);

}  // namespace nodefdm::eval
