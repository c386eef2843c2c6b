#include "nodefdm/evaluation.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nodefdm::eval {

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::climb: return "climb";
    case Phase::level: return "level";
    case Phase::descent: return "descent";
  }
  return "?";
}

std::optional<Phase> phase_from_name(std::string_view name) {
  for (Phase p : kPhases)
    if (phase_name(p) == name) return p;
  return std::nullopt;
}

std::vector<Phase> label_phases(const data::FlightSeries& reference, double vz_threshold, std::size_t hysteresis) {
  const auto& r = reference.records;
  const std::size_t n = r.size();
  std::vector<Phase> labels(n, Phase::level);
  if (n == 0) return labels;
  const std::size_t half = kSmoothingWindow / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += r[k].e.vz;
    const double vz = s / static_cast<double>(hi - lo + 1);
    labels[i] = vz > vz_threshold ? Phase::climb : (vz < -vz_threshold ? Phase::descent : Phase::level);
  }

  struct Run {
    std::size_t begin, length;
    Phase phase;
  };
  auto runs_of = [&] {
    std::vector<Run> runs;
    for (std::size_t i = 0; i < n; ++i) {
      if (runs.empty() || runs.back().phase != labels[i]) {
        runs.push_back({i, 1, labels[i]});
      } else {
        ++runs.back().length;
      }
    }
    return runs;
  };
  for (;;) {
    const auto runs = runs_of();
    if (runs.size() < 2) break;
    std::size_t shortest = runs.size();
    for (std::size_t k = 0; k < runs.size(); ++k)
      if (runs[k].length < hysteresis && (shortest == runs.size() || runs[k].length < runs[shortest].length)) shortest = k;
    if (shortest == runs.size()) break;
    Phase into;
    if (shortest == 0) {
      into = runs[1].phase;
    } else if (shortest + 1 == runs.size()) {
      into = runs[shortest - 1].phase;
    } else {
      into = runs[shortest - 1].length >= runs[shortest + 1].length ? runs[shortest - 1].phase : runs[shortest + 1].phase;
    }
    for (std::size_t i = 0; i < runs[shortest].length; ++i) labels[runs[shortest].begin + i] = into;
  }
  return labels;
}

std::string_view parameter_name(Parameter p) {
  switch (p) {
    case Parameter::h: return "h";
    case Parameter::v_tas: return "v_tas";
    case Parameter::gamma: return "gamma";
    case Parameter::m: return "m";
  }
  return "?";
}

std::string_view parameter_unit(Parameter p) {
  switch (p) {
    case Parameter::h: return "m";
    case Parameter::v_tas: return "m/s";
    case Parameter::gamma: return "deg";
    case Parameter::m: return "kg";
  }
  return "";
}

std::optional<Parameter> parameter_from_name(std::string_view name) {
  for (Parameter p : kParameters)
    if (parameter_name(p) == name) return p;
  return std::nullopt;
}

double mape_floor(Parameter p) {
  switch (p) {
    case Parameter::h: return 1.0;
    case Parameter::v_tas: return 1.0;
    case Parameter::m: return 0.0;
    case Parameter::gamma: return std::numeric_limits<double>::quiet_NaN();
  }
  return 0.0;
}

namespace {

double value_of(const data::FlightRecord& r, Parameter p) {
  switch (p) {
    case Parameter::h: return r.x.h;
    case Parameter::v_tas: return r.x.v_tas;
    case Parameter::gamma: return r.x.gamma * 180.0 / std::numbers::pi;
    case Parameter::m: return r.x.m;
  }
  return 0.0;
}

MetricCell cell_of(const std::vector<const std::vector<double>*>& errors,
                   const std::vector<const std::vector<double>*>& percents, bool with_mape) {
  std::vector<double> e, a, pc;
  for (const auto* v : errors) e.insert(e.end(), v->begin(), v->end());
  for (const auto* v : percents) pc.insert(pc.end(), v->begin(), v->end());
  a.reserve(e.size());
  for (double x : e) a.push_back(std::abs(x));
  MetricCell c;
  c.points = e.size();
  c.mae = describe(a);
  c.me = describe(e);
  c.mape_points = pc.size();
  if (with_mape && !pc.empty()) c.mape = describe(pc);
  return c;
}

}  // namespace

Stat describe(std::span<const double> values) {
  if (values.empty()) return {};
  double s = 0.0;
  for (double v : values) s += v;
  const double mean = s / static_cast<double>(values.size());
  double q = 0.0;
  for (double v : values) q += (v - mean) * (v - mean);
  return {mean, std::sqrt(q / static_cast<double>(values.size()))};
}

const PhaseMetricsRow* PhaseMetricsTable::find(Parameter p, std::optional<Phase> phase) const {
  for (const auto& r : rows)
    if (r.parameter == p && r.phase == phase) return &r;
  return nullptr;
}

void PhaseMetricsBuilder::add(const data::FlightSeries& pred, const data::FlightSeries& ref,
                              std::span<const Phase> labels) {
  if (pred.records.size() != ref.records.size()) {
    throw std::invalid_argument("flight '" + ref.tag + "': prediction has " + std::to_string(pred.records.size()) +
                                " records, reference has " + std::to_string(ref.records.size()));
  }
  if (labels.size() != ref.records.size()) throw std::invalid_argument("flight '" + ref.tag + "': one label per record required");
  for (std::size_t i = 0; i < ref.records.size(); ++i) {
    const auto phase = static_cast<std::size_t>(labels[i]);
    for (Parameter p : kParameters) {
      const double rv = value_of(ref.records[i], p);
      const double delta = value_of(pred.records[i], p) - rv;
      auto& s = samples_[static_cast<std::size_t>(p)][phase];
      s.error.push_back(delta);
      const double floor = mape_floor(p);
      if (!std::isnan(floor) && std::abs(rv) >= floor && rv != 0.0) s.percent.push_back(std::abs(delta / rv) * 100.0);
    }
  }
  points_ += ref.records.size();
}

PhaseMetricsTable PhaseMetricsBuilder::build() const {
  PhaseMetricsTable t;
  for (Parameter p : kParameters) {
    const auto pi = static_cast<std::size_t>(p);
    const bool with_mape = !std::isnan(mape_floor(p));
    std::vector<const std::vector<double>*> all_e, all_p;
    for (Phase ph : kPhases) {
      const auto& s = samples_[pi][static_cast<std::size_t>(ph)];
      all_e.push_back(&s.error);
      all_p.push_back(&s.percent);
      if (s.error.empty()) continue;
      t.rows.push_back({p, ph, cell_of({&s.error}, {&s.percent}, with_mape)});
    }
    if (points_ > 0) t.rows.push_back({p, std::nullopt, cell_of(all_e, all_p, with_mape)});
  }
  return t;
}

PhaseMetricsTable phase_metrics(const data::FlightSeries& pred, const data::FlightSeries& ref,
                                std::span<const Phase> labels) {
  PhaseMetricsBuilder b;
  b.add(pred, ref, labels);
  return b.build();
}

ConsumptionMetrics consumption_metrics(std::span<const FlightPair> flights) {
  ConsumptionMetrics out;
  std::vector<double> abs_e, pct, e;
  for (const auto& f : flights) {
    if (f.pred == nullptr || f.ref == nullptr) throw std::invalid_argument("flight pair with a missing series");
    const auto& ref = f.ref->records;
    const auto& pred = f.pred->records;
    if (ref.empty() || pred.empty()) {
      out.warnings.push_back("flight '" + f.ref->tag + "': empty series, excluded");
      continue;
    }
    if (ref.size() != pred.size()) throw std::invalid_argument("flight '" + f.ref->tag + "': series span different horizons");
    bool monotone = true;
    for (std::size_t i = 1; i < ref.size(); ++i) monotone = monotone && ref[i].x.m <= ref[i - 1].x.m;
    if (!monotone) {
      out.warnings.push_back("flight '" + f.ref->tag + "': reference mass increases, excluded");
      continue;
    }
    ConsumptionRow row;
    row.tag = f.ref->tag;
    row.reference = ref.front().x.m - ref.back().x.m;
    row.predicted = pred.front().x.m - pred.back().x.m;
    row.error = row.predicted - row.reference;
    if (!(row.reference > 0.0)) {
      out.warnings.push_back("flight '" + f.ref->tag + "': no reference consumption, excluded");
      continue;
    }
    e.push_back(row.error);
    abs_e.push_back(std::abs(row.error));
    pct.push_back(std::abs(row.error / row.reference) * 100.0);
    out.rows.push_back(std::move(row));
  }
  out.flights = out.rows.size();
  out.mae = describe(abs_e);
  out.mape = describe(pct);
  out.me = describe(e);
  return out;
}

}  // namespace nodefdm::eval
