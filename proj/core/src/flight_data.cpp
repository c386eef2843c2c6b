#include "nodefdm/flight_data.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace nodefdm::data {
namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "h",        "d",      "gamma",     "v_tas",  "m",         "h_sel",    "v_sel",
    "vz_sel",   "flap",   "gear",      "speed_brake", "t_oat", "wind_par", "wind_perp",
    "mach",     "v_cas",  "vz",        "v_gs",   "dh_sel",    "dv_sel",   "alpha",
    "theta",    "n1",     "fuel_flow", "dv_tas_dt", "dgamma_dt",
};

std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }

// Continuous time within half a sample of the expected spacing counts as contiguous.
bool contiguous(const FlightRecord& a, const FlightRecord& b, double dt) {
  return std::abs((b.time - a.time) - dt) <= 0.5 * dt;
}

}  // namespace

std::string_view feature_name(Feature f) { return kFeatureNames[index_of(f)]; }

std::optional<Feature> feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  }
  return std::nullopt;
}

bool is_discrete(Feature f) {
  return f == Feature::flap || f == Feature::gear || f == Feature::speed_brake;
}

double feature_value(const FlightRecord& r, Feature f) {
  switch (f) {
    case Feature::h: return r.x.h;
    case Feature::d: return r.x.d;
    case Feature::gamma: return r.x.gamma;
    case Feature::v_tas: return r.x.v_tas;
    case Feature::m: return r.x.m;
    case Feature::h_sel: return r.u.h_sel;
    case Feature::v_sel: return r.u.v_sel;
    case Feature::vz_sel: return r.u.vz_sel;
    case Feature::flap: return r.u.flap;
    case Feature::gear: return r.u.gear;
    case Feature::speed_brake: return r.u.speed_brake;
    case Feature::t_oat: return r.e0.t_oat;
    case Feature::wind_par: return r.e0.wind_par;
    case Feature::wind_perp: return r.e0.wind_perp;
    case Feature::mach: return r.e.mach;
    case Feature::v_cas: return r.e.v_cas;
    case Feature::vz: return r.e.vz;
    case Feature::v_gs: return r.e.v_gs;
    case Feature::dh_sel: return r.e.dh_sel;
    case Feature::dv_sel: return r.e.dv_sel;
    case Feature::alpha: return r.e.alpha;
    case Feature::theta: return r.e.theta;
    case Feature::n1: return r.e.n1;
    case Feature::fuel_flow: return r.e.fuel_flow;
    case Feature::dv_tas_dt:
    case Feature::dgamma_dt:
      break;
  }
  throw std::invalid_argument("feature '" + std::string(feature_name(f)) + "' is not recorded");
}

NormStats::NormStats() = default;

double NormStats::normalize(Feature f, double value) const {
  const auto& s = (*this)[f];
  return (value - s.mean) / s.std;
}

double NormStats::denormalize(Feature f, double value) const {
  const auto& s = (*this)[f];
  return value * s.std + s.mean;
}

NormStats compute_norm_stats(std::span<const FlightSeries> train) {
  std::array<double, kFeatureCount> sum{};
  std::array<std::size_t, kFeatureCount> count{};
  auto each_value = [&](auto&& visit) {
    for (const auto& flight : train) {
      const auto& recs = flight.records;
      for (std::size_t k = 0; k < recs.size(); ++k) {
        for (std::size_t i = 0; i < index_of(Feature::dv_tas_dt); ++i) {
          visit(i, feature_value(recs[k], static_cast<Feature>(i)));
        }
        if (k + 1 < recs.size() && contiguous(recs[k], recs[k + 1], flight.dt)) {
          const double dt = recs[k + 1].time - recs[k].time;
          visit(index_of(Feature::dv_tas_dt), (recs[k + 1].x.v_tas - recs[k].x.v_tas) / dt);
          visit(index_of(Feature::dgamma_dt), (recs[k + 1].x.gamma - recs[k].x.gamma) / dt);
        }
      }
    }
  };

  each_value([&](std::size_t i, double v) {
    sum[i] += v;
    ++count[i];
  });
  if (count[0] == 0) throw std::invalid_argument("normalisation statistics need a non-empty training set");

  std::array<double, kFeatureCount> mean{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    mean[i] = count[i] ? sum[i] / static_cast<double>(count[i]) : 0.0;
  }
  std::array<double, kFeatureCount> sq{};
  each_value([&](std::size_t i, double v) {
    const double dv = v - mean[i];
    sq[i] += dv * dv;
  });

  NormStats stats;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto f = static_cast<Feature>(i);
    if (is_discrete(f)) continue;
    if (count[i] == 0) {
      throw std::invalid_argument("no samples for feature '" + std::string(feature_name(f)) + "'");
    }
    const double sd = std::sqrt(sq[i] / static_cast<double>(count[i]));
    if (!(sd > 0.0)) {
      throw std::invalid_argument("feature '" + std::string(feature_name(f)) +
                                  "' has zero variance over the training set");
    }
    stats[f] = {mean[i], sd};
  }
  return stats;
}

std::vector<Sequence> slice_sequences(const FlightSeries& flight, std::size_t length) {
  std::vector<Sequence> out;
  if (length == 0) return out;
  const auto& recs = flight.records;
  std::size_t run_start = 0;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (k > run_start && !contiguous(recs[k - 1], recs[k], flight.dt)) run_start = k;
    if (k + 1 - run_start == length) {
      Sequence seq;
      seq.tag = flight.tag;
      seq.start = run_start;
      seq.records.assign(recs.begin() + static_cast<std::ptrdiff_t>(run_start),
                         recs.begin() + static_cast<std::ptrdiff_t>(k + 1));
      out.push_back(std::move(seq));
      run_start = k + 1;
    }
  }
  return out;
}

std::vector<ValidationIssue> validate(const FlightSeries& flight) {
  std::vector<ValidationIssue> issues;
  const auto& recs = flight.records;
  auto issue = [&](std::size_t i, std::string msg) { issues.push_back({i, std::move(msg)}); };
  if (recs.size() < kSequenceLength) issue(0, "fewer than 60 records");
  // Mass may fluctuate by the estimation noise of the recorder; allow 1 kg.
  constexpr double kMassTolerance = 1.0;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& r = recs[k];
    if (!(r.x.m > 0.0)) issue(k, "non-positive mass");
    if (!(r.x.v_tas >= 0.0)) issue(k, "negative true airspeed");
    if (!(std::abs(r.x.gamma) < std::numbers::pi / 2)) issue(k, "flight path angle out of range");
    if (r.u.flap < 0 || r.u.flap > 4) issue(k, "flap index out of range");
    if ((r.u.gear != 0 && r.u.gear != 1) || (r.u.speed_brake != 0 && r.u.speed_brake != 1)) {
      issue(k, "binary control out of range");
    }
    if (!(r.e.fuel_flow >= 0.0)) issue(k, "negative fuel flow");
    if (k > 0) {
      const auto& p = recs[k - 1];
      if (!(r.time > p.time)) issue(k, "time not strictly increasing");
      else if (!contiguous(p, r, flight.dt)) issue(k, "gap in time column");
      if (r.x.d < p.x.d) issue(k, "along-track distance decreases");
      if (r.x.m > p.x.m + kMassTolerance) issue(k, "mass increases");
    }
  }
  return issues;
}

}  // namespace nodefdm::data
