#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nodefdm/baseline.hpp"
#include "nodefdm/evaluation.hpp"
#include "nodefdm/report.hpp"
#include "support.hpp"

using namespace nodefdm::eval;
namespace data = nodefdm::data;
namespace synth = nodefdm::synth;

namespace {

data::FlightSeries with_altitudes(const std::vector<double>& h) {
  data::FlightSeries f;
  f.tag = "toy";
  for (std::size_t k = 0; k < h.size(); ++k) {
    data::FlightRecord r;
    r.time = 4.0 * static_cast<double>(k);
    r.x = {h[k], 0.0, 0.0, 200.0, 60000.0 - static_cast<double>(k)};
    f.records.push_back(r);
  }
  return f;
}

data::FlightSeries burning(double burn, const std::string& tag) {
  data::FlightSeries f = with_altitudes({1000.0, 1000.0, 1000.0});
  f.tag = tag;
  for (std::size_t k = 0; k < 3; ++k) f.records[k].x.m = 60000.0 - burn * static_cast<double>(k) / 2.0;
  return f;
}

data::FlightSeries vz_series(const std::vector<double>& vz) {
  data::FlightSeries f;
  for (std::size_t k = 0; k < vz.size(); ++k) {
    data::FlightRecord r;
    r.time = 4.0 * static_cast<double>(k);
    r.e.vz = vz[k];
    f.records.push_back(r);
  }
  return f;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

EvaluationReport sample_report() {
  EvaluationReport report;
  ModelEvaluation eval;
  eval.model = "baseline";
  PhaseMetricsBuilder builder;
  std::vector<data::FlightSeries> preds;
  const auto& refs = testing::sample_flights();
  for (const auto& ref : refs) preds.push_back(nodefdm::baseline::simulate_flight(ref, {}).series);
  std::vector<FlightPair> pairs;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    builder.add(preds[i], refs[i], label_phases(refs[i]));
    pairs.push_back({&preds[i], &refs[i]});
  }
  eval.flights = refs.size();
  eval.points = builder.points();
  eval.phases = builder.build();
  eval.consumption = consumption_metrics(pairs);
  report.models.push_back(eval);
  return report;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("phase labels from smoothed vertical speed") {
  CHECK(label_phases(vz_series(std::vector<double>(30, 8.0))) == std::vector<Phase>(30, Phase::climb));
  CHECK(label_phases(vz_series(std::vector<double>(30, -6.0))) == std::vector<Phase>(30, Phase::descent));
  CHECK(label_phases(vz_series(std::vector<double>(30, 0.5))) == std::vector<Phase>(30, Phase::level));
  CHECK(label_phases(vz_series(std::vector<double>(30, 1.27))) == std::vector<Phase>(30, Phase::level));

  // A two-record spike inside a level segment is absorbed.
  std::vector<double> spike(40, 0.0);
  spike[20] = spike[21] = 6.0;
  CHECK(label_phases(vz_series(spike)) == std::vector<Phase>(40, Phase::level));

  std::vector<double> steps(60, 0.0);
  std::fill(steps.begin(), steps.begin() + 20, 10.0);
  std::fill(steps.begin() + 40, steps.end(), -10.0);
  const auto labels = label_phases(vz_series(steps));
  CHECK(labels[5] == Phase::climb);
  CHECK(labels[30] == Phase::level);
  CHECK(labels[55] == Phase::descent);
  CHECK(label_phases(data::FlightSeries{}).empty());
}

TEST_CASE("phase labels agree with the generator") {
  std::size_t agree = 0, total = 0;
  for (std::uint64_t seed : {50u, 51u, 52u, 53u}) {
    const auto g = synth::generate_flight({}, synth::random_script(seed));
    const auto labels = label_phases(g.series);
    REQUIRE(labels.size() == g.phases.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const auto expected = g.phases[k] == synth::ScriptPhase::climb   ? Phase::climb
                            : g.phases[k] == synth::ScriptPhase::level ? Phase::level
                                                                       : Phase::descent;
      agree += labels[k] == expected;
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) >= 0.98 * static_cast<double>(total));
}

TEST_CASE("per-phase toy metrics") {
  const auto ref = with_altitudes({100.0, 200.0, 400.0});
  const auto pred = with_altitudes({101.0, 199.0, 404.0});
  const std::vector<Phase> labels(3, Phase::level);
  const auto table = phase_metrics(pred, ref, labels);
  const auto* all = table.find(Parameter::h, std::nullopt);
  REQUIRE(all != nullptr);
  CHECK(all->cell.points == 3);
  CHECK(all->cell.mae.mean == doctest::Approx(2.0));
  CHECK(all->cell.mae.std == doctest::Approx(std::sqrt(2.0)));
  CHECK(all->cell.me.mean == doctest::Approx(4.0 / 3.0));
  CHECK(all->cell.me.std == doctest::Approx(std::sqrt(114.0 / 27.0)));
  REQUIRE(all->cell.mape.has_value());
  CHECK(all->cell.mape->mean == doctest::Approx((1.0 + 0.5 + 1.0) / 3.0));
  const auto* level = table.find(Parameter::h, Phase::level);
  REQUIRE(level != nullptr);
  CHECK(level->cell.mae.mean == all->cell.mae.mean);
  const auto* climb = table.find(Parameter::h, Phase::climb);
  CHECK((climb == nullptr || climb->cell.points == 0));

  const auto offset = with_altitudes({110.0, 210.0, 410.0});
  const auto flat = phase_metrics(offset, ref, labels).find(Parameter::h, std::nullopt);
  CHECK(flat->cell.mae.mean == doctest::Approx(10.0));
  CHECK(flat->cell.me.mean == doctest::Approx(10.0));
  CHECK(flat->cell.me.std == doctest::Approx(0.0).scale(1.0));

  const auto gamma = table.find(Parameter::gamma, std::nullopt);
  REQUIRE(gamma != nullptr);
  CHECK_FALSE(gamma->cell.mape.has_value());
  CHECK(std::isnan(mape_floor(Parameter::gamma)));
  CHECK(mape_floor(Parameter::h) == 1.0);
  CHECK(mape_floor(Parameter::m) == 0.0);

  CHECK_THROWS_AS(phase_metrics(with_altitudes({1.0, 2.0}), ref, labels), std::invalid_argument);
}

TEST_CASE("gamma errors are reported in degrees") {
  auto ref = with_altitudes({100.0, 100.0});
  auto pred = ref;
  pred.records[0].x.gamma = 0.01;
  pred.records[1].x.gamma = 0.01;
  const auto table = phase_metrics(pred, ref, std::vector<Phase>(2, Phase::level));
  CHECK(table.find(Parameter::gamma, std::nullopt)->cell.mae.mean == doctest::Approx(0.01 * 180.0 / std::numbers::pi));
}

TEST_CASE("pooled metrics do not depend on flight order") {
  const auto& refs = testing::sample_flights();
  std::vector<data::FlightSeries> preds;
  for (const auto& r : refs) preds.push_back(nodefdm::baseline::simulate_flight(r, nodefdm::perf::perturbed({}, 0.03)).series);
  PhaseMetricsBuilder fwd, rev;
  for (std::size_t i = 0; i < refs.size(); ++i) fwd.add(preds[i], refs[i], label_phases(refs[i]));
  for (std::size_t i = refs.size(); i-- > 0;) rev.add(preds[i], refs[i], label_phases(refs[i]));
  const auto a = fwd.build(), b = rev.build();
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].cell.points == b.rows[i].cell.points);
    CHECK(a.rows[i].cell.mae.mean == doctest::Approx(b.rows[i].cell.mae.mean).epsilon(1e-12));
  }
  CHECK(fwd.points() == b.find(Parameter::h, std::nullopt)->cell.points);
}

TEST_CASE("fuel consumption metrics") {
  const auto r1 = burning(100.0, "a"), r2 = burning(100.0, "b");
  const auto p1 = burning(102.0, "a"), p2 = burning(96.0, "b");
  const std::vector<FlightPair> pairs{{&p1, &r1}, {&p2, &r2}};
  const auto c = consumption_metrics(pairs);
  CHECK(c.flights == 2);
  CHECK(c.mae.mean == doctest::Approx(3.0));
  CHECK(c.me.mean == doctest::Approx(-1.0));
  CHECK(c.me.std == doctest::Approx(3.0));
  CHECK(c.mape.mean == doctest::Approx(3.0));
  REQUIRE(c.rows.size() == 2);
  CHECK(c.rows[0].reference == doctest::Approx(100.0));
  CHECK(c.rows[1].error == doctest::Approx(-4.0));

  const auto single = consumption_metrics(std::vector<FlightPair>{{&p1, &r1}});
  CHECK(single.me.mean == doctest::Approx(2.0));
  CHECK(single.mape.mean == doctest::Approx(2.0));

  auto refuel = burning(100.0, "c");
  refuel.records[2].x.m = refuel.records[0].x.m + 10.0;
  const auto skipped = consumption_metrics(std::vector<FlightPair>{{&p1, &r1}, {&p2, &refuel}});
  CHECK(skipped.flights == 1);
  REQUIRE(skipped.warnings.size() == 1);
  CHECK(skipped.warnings[0].find("c") != std::string::npos);
}

TEST_CASE("describe uses the population deviation") {
  const std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  const auto s = describe(v);
  CHECK(s.mean == 5.0);
  CHECK(s.std == 2.0);
}

TEST_CASE("empty evaluations are an error") {
  const EvaluationReport empty;
  CHECK_THROWS_WITH_AS(render_text(empty), "no flights", std::invalid_argument);
  CHECK_THROWS_AS(to_json_text(empty), std::invalid_argument);
  CHECK_THROWS_AS(to_csv(empty), std::invalid_argument);
}

TEST_CASE("report serialisations agree") {
  const auto report = sample_report();
  const auto back = from_json_text(to_json_text(report));
  REQUIRE(back.models.size() == 1);
  const auto& a = report.models[0];
  const auto& b = back.models[0];
  CHECK(b.model == a.model);
  CHECK(b.flights == a.flights);
  REQUIRE(b.phases.rows.size() == a.phases.rows.size());
  for (std::size_t i = 0; i < a.phases.rows.size(); ++i) {
    const auto& x = a.phases.rows[i];
    const auto& y = b.phases.rows[i];
    CHECK(x.parameter == y.parameter);
    CHECK(x.phase == y.phase);
    CHECK(x.cell.points == y.cell.points);
    CHECK(std::abs(x.cell.mae.mean - y.cell.mae.mean) <= 1e-12 * std::max(1.0, std::abs(x.cell.mae.mean)));
    CHECK(std::abs(x.cell.me.std - y.cell.me.std) <= 1e-12 * std::max(1.0, std::abs(x.cell.me.std)));
    CHECK(x.cell.mape.has_value() == y.cell.mape.has_value());
  }
  CHECK(b.consumption.mape.mean == doctest::Approx(a.consumption.mape.mean).epsilon(1e-12));
  CHECK(to_json_text(back) == to_json_text(report));

  const auto text = render_text(report, {-1, false});
  for (const auto& row : a.phases.rows) {
    CHECK(text.find(shortest(row.cell.mae.mean)) != std::string::npos);
  }
  CHECK(text.find("N/A") != std::string::npos);
  CHECK(text.find("Literature") == std::string::npos);
  const auto with_lit = render_text(report);
  CHECK(with_lit.find("61.90") != std::string::npos);

  const auto csv = to_csv(report);
  CHECK(csv.rfind("model,table,parameter,phase,points,mae_mean,mae_std,mape_mean,mape_std,me_mean,me_std\n", 0) == 0);
  const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(lines == 1 + a.phases.rows.size() + 1);
}

TEST_CASE("plot csv layout") {
  const auto& ref = testing::sample_flights()[0];
  const auto base = nodefdm::baseline::simulate_flight(ref, {}).series;
  const auto csv = plot_csv(ref, nullptr, &base);
  std::istringstream in(csv);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == std::string(kPlotHeader));
  CHECK(header ==
        "time_s,h_sel_m,h_ref_m,h_node_m,h_base_m,v_tas_ref_mps,v_tas_node_mps,v_tas_base_mps,gamma_ref_deg,"
        "gamma_node_deg,gamma_base_deg,m_ref_kg,m_node_kg,m_base_kg");
  CHECK(std::count(first.begin(), first.end(), ',') == 13);
  CHECK(first.find(",,") != std::string::npos);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == ref.records.size() + 1);
  const auto svg = plot_svg(ref, nullptr, &base);
  CHECK(svg.rfind("<svg", 0) == 0);
}

}
