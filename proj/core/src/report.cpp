#include "nodefdm/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"

namespace nodefdm::eval {

using nlohmann::json;

namespace {

std::string num(double v, int decimals) {
  if (!std::isfinite(v)) return "N/A";
  return decimals < 0 ? fmt::format("{}", v) : fmt::format("{:.{}f}", v, decimals);
}

std::string stat(const Stat& s, int decimals) { return num(s.mean, decimals) + " (" + num(s.std, decimals) + ")"; }

std::string phase_label(const std::optional<Phase>& p) { return p ? std::string(phase_name(*p)) : "all"; }

void require_flights(const EvaluationReport& r) {
  bool any = false;
  for (const auto& m : r.models) any = any || m.flights > 0;
  if (!any) throw std::invalid_argument("no flights");
}

json stat_json(const Stat& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

Stat stat_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

std::string render_text(const EvaluationReport& report, const TextOptions& o) {
  require_flights(report);
  const int w = o.decimals < 0 ? 44 : 22;
  std::string out;
  for (const auto& m : report.models) {
    out += fmt::format("Per-phase errors: {} ({} flights, {} points)\n", m.model, m.flights, m.points);
    out += fmt::format("{:<14}{:<10}{:>9}  {:<{}}{:<{}}{:<{}}\n", "parameter", "phase", "points", "MAE", w, "MAPE [%]", w,
                       "ME", w);
    for (const auto& row : m.phases.rows) {
      const std::string param = fmt::format("{} [{}]", parameter_name(row.parameter), parameter_unit(row.parameter));
      out += fmt::format("{:<14}{:<10}{:>9}  {:<{}}{:<{}}{:<{}}\n", param, phase_label(row.phase), row.cell.points,
                         stat(row.cell.mae, o.decimals), w, row.cell.mape ? stat(*row.cell.mape, o.decimals) : "N/A", w,
                         stat(row.cell.me, o.decimals), w);
    }
    out += "\n";
  }
  out += "Flight consumption\n";
  out += fmt::format("{:<12}{:>8}  {:<{}}{:<{}}{:<{}}\n", "model", "flights", "MAE [kg]", w, "MAPE [%]", w, "ME [kg]", w);
  for (const auto& m : report.models) {
    const auto& c = m.consumption;
    out += fmt::format("{:<12}{:>8}  {:<{}}{:<{}}{:<{}}\n", m.model, c.flights, stat(c.mae, o.decimals), w,
                       stat(c.mape, o.decimals), w, stat(c.me, o.decimals), w);
  }
  for (const auto& m : report.models)
    for (const auto& warn : m.consumption.warnings) out += "warning: " + m.model + ": " + warn + "\n";
  if (o.literature) {
    out += "\nLiterature reference (different data and aircraft; context only)\n";
    for (const auto& l : kLiterature) {
      out += fmt::format("{:<12}altitude MAE all phases {:.2f} ({:.2f}) m, consumption MAPE {:.2f} %\n", l.model,
                         l.altitude_mae_mean, l.altitude_mae_std, l.consumption_mape);
    }
  }
  return out;
}

std::string to_json_text(const EvaluationReport& report) {
  require_flights(report);
  json models = json::array();
  for (const auto& m : report.models) {
    json rows = json::array();
    for (const auto& r : m.phases.rows) {
      json row = {{"parameter", parameter_name(r.parameter)},
                  {"phase", phase_label(r.phase)},
                  {"points", r.cell.points},
                  {"mae", stat_json(r.cell.mae)},
                  {"me", stat_json(r.cell.me)},
                  {"mape_points", r.cell.mape_points},
                  {"mape", r.cell.mape ? stat_json(*r.cell.mape) : json(nullptr)}};
      rows.push_back(std::move(row));
    }
    json flights = json::array();
    for (const auto& f : m.consumption.rows) {
      flights.push_back({{"tag", f.tag}, {"reference", f.reference}, {"predicted", f.predicted}, {"error", f.error}});
    }
    json consumption = {{"flights", m.consumption.flights},
                        {"mae", stat_json(m.consumption.mae)},
                        {"mape", stat_json(m.consumption.mape)},
                        {"me", stat_json(m.consumption.me)},
                        {"per_flight", flights},
                        {"warnings", m.consumption.warnings}};
    models.push_back({{"model", m.model},
                      {"flights", m.flights},
                      {"points", m.points},
                      {"phases", rows},
                      {"consumption", consumption}});
  }
  json lit = json::array();
  for (const auto& l : kLiterature) {
    lit.push_back({{"model", l.model},
                   {"altitude_mae_mean", l.altitude_mae_mean},
                   {"altitude_mae_std", l.altitude_mae_std},
                   {"consumption_mape", l.consumption_mape}});
  }
  json j = {{"format", "nodefdm-evaluation"}, {"version", 1}, {"models", models}, {"literature_reference", lit}};
  return j.dump(2) + "\n";
}

EvaluationReport from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "nodefdm-evaluation") throw std::invalid_argument("not an evaluation report");
    EvaluationReport r;
    for (const auto& m : j.at("models")) {
      ModelEvaluation e;
      e.model = m.at("model").get<std::string>();
      e.flights = m.at("flights").get<std::size_t>();
      e.points = m.at("points").get<std::size_t>();
      for (const auto& row : m.at("phases")) {
        PhaseMetricsRow pr;
        const auto p = parameter_from_name(row.at("parameter").get<std::string>());
        if (!p) throw std::invalid_argument("unknown parameter in report");
        pr.parameter = *p;
        const auto ph = row.at("phase").get<std::string>();
        if (ph != "all") {
          const auto phase = phase_from_name(ph);
          if (!phase) throw std::invalid_argument("unknown phase '" + ph + "' in report");
          pr.phase = *phase;
        }
        pr.cell.points = row.at("points").get<std::size_t>();
        pr.cell.mae = stat_from(row.at("mae"));
        pr.cell.me = stat_from(row.at("me"));
        pr.cell.mape_points = row.at("mape_points").get<std::size_t>();
        if (!row.at("mape").is_null()) pr.cell.mape = stat_from(row.at("mape"));
        e.phases.rows.push_back(pr);
      }
      const auto& c = m.at("consumption");
      e.consumption.flights = c.at("flights").get<std::size_t>();
      e.consumption.mae = stat_from(c.at("mae"));
      e.consumption.mape = stat_from(c.at("mape"));
      e.consumption.me = stat_from(c.at("me"));
      for (const auto& f : c.at("per_flight")) {
        e.consumption.rows.push_back({f.at("tag").get<std::string>(), f.at("reference").get<double>(),
                                      f.at("predicted").get<double>(), f.at("error").get<double>()});
      }
      e.consumption.warnings = c.at("warnings").get<std::vector<std::string>>();
      r.models.push_back(std::move(e));
    }
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string to_csv(const EvaluationReport& report) {
  require_flights(report);
  std::string out = "model,table,parameter,phase,points,mae_mean,mae_std,mape_mean,mape_std,me_mean,me_std\n";
  auto v = [](double x) { return std::isfinite(x) ? fmt::format("{}", x) : std::string(); };
  for (const auto& m : report.models) {
    for (const auto& r : m.phases.rows) {
      const Stat mape = r.cell.mape.value_or(Stat{std::numeric_limits<double>::quiet_NaN(),
                                                  std::numeric_limits<double>::quiet_NaN()});
      out += fmt::format("{},phase,{},{},{},{},{},{},{},{},{}\n", m.model, parameter_name(r.parameter),
                         phase_label(r.phase), r.cell.points, v(r.cell.mae.mean), v(r.cell.mae.std), v(mape.mean),
                         v(mape.std), v(r.cell.me.mean), v(r.cell.me.std));
    }
    const auto& c = m.consumption;
    out += fmt::format("{},consumption,fuel,all,{},{},{},{},{},{},{}\n", m.model, c.flights, v(c.mae.mean), v(c.mae.std),
                       v(c.mape.mean), v(c.mape.std), v(c.me.mean), v(c.me.std));
  }
  return out;
}

namespace {

void check_aligned(const data::FlightSeries& ref, const data::FlightSeries* s) {
  if (s != nullptr && s->records.size() != ref.records.size()) {
    throw std::invalid_argument("flight '" + ref.tag + "': series lengths differ");
  }
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace

std::string plot_csv(const data::FlightSeries& ref, const data::FlightSeries* node, const data::FlightSeries* baseline) {
  check_aligned(ref, node);
  check_aligned(ref, baseline);
  std::string out = std::string(kPlotHeader) + "\n";
  auto cell = [](const data::FlightSeries* s, std::size_t i, auto get) {
    return s == nullptr ? std::string() : fmt::format("{}", get(s->records[i]));
  };
  const auto h = [](const data::FlightRecord& r) { return r.x.h; };
  const auto v = [](const data::FlightRecord& r) { return r.x.v_tas; };
  const auto g = [](const data::FlightRecord& r) { return deg(r.x.gamma); };
  const auto m = [](const data::FlightRecord& r) { return r.x.m; };
  for (std::size_t i = 0; i < ref.records.size(); ++i) {
    const auto& r = ref.records[i];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.time, r.u.h_sel, r.x.h, cell(node, i, h),
                       cell(baseline, i, h), r.x.v_tas, cell(node, i, v), cell(baseline, i, v), deg(r.x.gamma),
                       cell(node, i, g), cell(baseline, i, g), r.x.m, cell(node, i, m), cell(baseline, i, m));
  }
  return out;
}

std::string plot_svg(const data::FlightSeries& ref, const data::FlightSeries* node, const data::FlightSeries* baseline) {
  check_aligned(ref, node);
  check_aligned(ref, baseline);
  if (ref.records.empty()) throw std::invalid_argument("flight '" + ref.tag + "' has no records");
  constexpr double width = 900, panel = 260, margin = 50;
  const double t0 = ref.records.front().time;
  const double t1 = std::max(ref.records.back().time, t0 + 1.0);

  struct Channel {
    const char* title;
    double (*get)(const data::FlightRecord&);
  };
  const Channel channels[] = {{"altitude [m]", [](const data::FlightRecord& r) { return r.x.h; }},
                              {"true airspeed [m/s]", [](const data::FlightRecord& r) { return r.x.v_tas; }}};
  struct Line {
    const data::FlightSeries* s;
    const char* colour;
    const char* name;
  };
  const Line lines[] = {{&ref, "#222222", "reference"}, {node, "#1f77b4", "node-fdm"}, {baseline, "#d62728", "baseline"}};

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{3}</text>\n",
      width, 2 * (panel + margin) + margin, margin, ref.tag);
  for (std::size_t c = 0; c < 2; ++c) {
    const double top = margin + static_cast<double>(c) * (panel + margin);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& l : lines) {
      if (l.s == nullptr) continue;
      for (const auto& r : l.s->records) {
        lo = std::min(lo, channels[c].get(r));
        hi = std::max(hi, channels[c].get(r));
      }
    }
    if (hi - lo < 1e-9) hi = lo + 1.0;
    out += fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999999\"/>\n"
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{} ({:.0f} to {:.0f})</text>\n",
        margin, top, width - 2 * margin, panel, margin, top - 6, channels[c].title, lo, hi);
    for (const auto& l : lines) {
      if (l.s == nullptr) continue;
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"", l.colour);
      for (std::size_t i = 0; i < l.s->records.size(); ++i) {
        const double x = margin + (ref.records[i].time - t0) / (t1 - t0) * (width - 2 * margin);
        const double y = top + panel - (channels[c].get(l.s->records[i]) - lo) / (hi - lo) * panel;
        out += fmt::format("{}{:.1f},{:.1f}", i == 0 ? "" : " ", x, y);
      }
      out += "\"/>\n";
    }
  }
  double lx = margin;
  for (const auto& l : lines) {
    if (l.s == nullptr) continue;
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n", lx,
                       2 * (panel + margin) + margin - 10, l.colour, l.name);
    lx += 110;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace nodefdm::eval
