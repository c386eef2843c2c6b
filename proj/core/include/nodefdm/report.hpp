#pragma once

#include <string>
#include <vector>

#include "nodefdm/evaluation.hpp"
#include "nodefdm/flight_data.hpp"

namespace nodefdm::eval {

struct ModelEvaluation {
  std::string model;
  std::size_t flights = 0;
  std::size_t points = 0;
  PhaseMetricsTable phases;
  ConsumptionMetrics consumption;
};

struct EvaluationReport {
  std::vector<ModelEvaluation> models;
};

/// Published reference values, shown for context only.
struct LiteratureReference {
  const char* model;
  double altitude_mae_mean;
  double altitude_mae_std;
  double consumption_mape;
};
inline constexpr LiteratureReference kLiterature[] = {
    {"node-fdm", 61.90, 145.54, 1.54},
    {"bada", 167.47, 402.75, 3.03},
};

struct TextOptions {
  int decimals = 2;  // negative: shortest round-trip representation
  bool literature = true;
};

/// Throws std::invalid_argument("no flights") when nothing was evaluated.
std::string render_text(const EvaluationReport& report, const TextOptions& options = {});
std::string to_json_text(const EvaluationReport& report);
EvaluationReport from_json_text(const std::string& text);
/// One row per (model, parameter, phase) plus one consumption row per model.
std::string to_csv(const EvaluationReport& report);

/// Documented header of the per-flight comparison CSV.
inline constexpr const char* kPlotHeader =
    "time_s,h_sel_m,h_ref_m,h_node_m,h_base_m,v_tas_ref_mps,v_tas_node_mps,v_tas_base_mps,"
    "gamma_ref_deg,gamma_node_deg,gamma_base_deg,m_ref_kg,m_node_kg,m_base_kg";

/// Either prediction may be null; missing cells are left empty.
std::string plot_csv(const data::FlightSeries& ref, const data::FlightSeries* node, const data::FlightSeries* baseline);
/// Static altitude and TAS chart of the same data.
std::string plot_svg(const data::FlightSeries& ref, const data::FlightSeries* node, const data::FlightSeries* baseline);

}  // namespace nodefdm::eval
