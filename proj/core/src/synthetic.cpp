#include "nodefdm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "json.hpp"
#include "nodefdm/atmosphere.hpp"

namespace nodefdm::synth {
namespace {

namespace atm = nodefdm::atmosphere;
using json = nlohmann::json;

constexpr double kTransitionAltitude = 3048.0;  // 10,000 ft speed limit

// Portable draws on top of mt19937_64, whose output sequence is fixed by the standard.
class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// First-order Gauss-Markov perturbation sampled at the record interval.
class Perturbation {
 public:
  Perturbation(double sigma, double correlation_time, double dt)
      : sigma_(sigma), rho_(std::exp(-dt / correlation_time)) {}

  double next(Random& rng) {
    value_ = rho_ * value_ + std::sqrt(1.0 - rho_ * rho_) * sigma_ * rng.normal();
    return value_;
  }

 private:
  double sigma_;
  double rho_;
  double value_ = 0.0;
};

double cas_for_mach(double mach, double h, double t_oat) {
  return atm::tas_to_cas(mach * atm::speed_of_sound(t_oat), h, t_oat);
}

void check_script(const perf::PerformanceConfig& cfg, const FlightScript& s,
                  const baseline::GuidanceSettings& guidance) {
  perf::validate(cfg);
  if (s.cruise_mach > cfg.mach_max) {
    throw InfeasibleScript(fmt::format("cruise Mach {:.3f} exceeds envelope Mach {:.3f}", s.cruise_mach,
                                       cfg.mach_max));
  }
  if (s.climb_cas > cfg.cas_max || s.descent_cas > cfg.cas_max) {
    throw InfeasibleScript("climb/descent CAS schedule exceeds envelope CAS");
  }
  if (s.initial_cas < cfg.cas_min || s.approach_cas < cfg.cas_min) {
    throw InfeasibleScript("initial/approach CAS below envelope minimum");
  }
  if (s.cruise_level <= s.initial_altitude + guidance.altitude_tolerance) {
    throw InfeasibleScript("cruise level must lie above the initial altitude");
  }
  double top = s.cruise_level;
  for (const auto& step : s.step_climbs) top = std::max(top, step.level);
  if (top > cfg.max_altitude) {
    throw InfeasibleScript(fmt::format("cruise level {:.0f} m above ceiling {:.0f} m", top, cfg.max_altitude));
  }
  // Thrust ceiling: at least 1.5 m/s rate of climb at cruise Mach with takeoff mass.
  const double t_oat = atm::isa_temperature(top) + s.delta_isa;
  const double v = s.cruise_mach * atm::speed_of_sound(t_oat);
  const double thrust = perf::max_thrust(cfg, top, t_oat, s.cruise_mach);
  const double d = perf::drag(cfg, {top, v, s.takeoff_mass, 1.0, t_oat, 0, 0, 0});
  const double roc = (thrust - d) * v / (s.takeoff_mass * atm::kG0);
  if (roc < 1.5) {
    throw InfeasibleScript(fmt::format("cruise level {:.0f} m above thrust ceiling (climb rate {:.2f} m/s)",
                                       top, roc));
  }
  for (std::size_t i = 1; i < s.step_climbs.size(); ++i) {
    if (s.step_climbs[i].distance < s.step_climbs[i - 1].distance ||
        s.step_climbs[i].level < s.step_climbs[i - 1].level) {
      throw InfeasibleScript("step-climb schedule must be monotone");
    }
  }
}

}  // namespace

GeneratedFlight generate_flight(const perf::PerformanceConfig& cfg, const FlightScript& script,
                                const baseline::GuidanceSettings& guidance) {
  check_script(cfg, script, guidance);

  Random rng(script.seed);
  const double dt = data::kSampleInterval;
  const auto& noise = script.noise;
  Perturbation thrust_noise(noise.thrust_sigma, noise.correlation_time, dt);
  Perturbation vz_noise(noise.vz_sigma, noise.correlation_time, dt);

  auto context_at = [&](double h) {
    return data::ContextVector{atm::isa_temperature(h) + script.delta_isa, script.wind.par(h),
                               script.wind.perp(h)};
  };

  GeneratedFlight out;
  out.series.tag = "synthetic";
  out.series.dt = dt;

  auto e0 = context_at(script.initial_altitude);
  baseline::BaselineState state = baseline::make_state(
      script.initial_altitude, 0.0, atm::cas_to_tas(script.initial_cas, script.initial_altitude, e0.t_oat),
      script.takeoff_mass, e0.t_oat);

  enum class Mode { climb, cruise, descent } mode = Mode::climb;
  double level = script.cruise_level;
  std::size_t next_step = 0;
  int flap_climb = 1;
  int flap_descent = 0;
  int gear = 0;
  double descent_top = script.cruise_level;

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t > script.max_duration) {
      throw InfeasibleScript("flight did not complete within the maximum duration");
    }
    e0 = context_at(state.h);
    state = baseline::make_state(state.h, state.d, state.v_tas, state.m, e0.t_oat);

    // Lateral-free flight plan: altitude targets from distance flown.
    if (mode != Mode::descent && state.d >= script.descent_distance) {
      mode = Mode::descent;
      descent_top = state.h;
    }
    while (mode != Mode::descent && next_step < script.step_climbs.size() &&
           state.d >= script.step_climbs[next_step].distance) {
      level = script.step_climbs[next_step].level;
      ++next_step;
    }
    if (mode == Mode::climb && std::abs(level - state.h) <= guidance.altitude_tolerance) mode = Mode::cruise;

    data::ControlVector u;
    u.h_sel = mode == Mode::descent ? script.final_altitude : level;

    const double mach_cas = cas_for_mach(script.cruise_mach, state.h, e0.t_oat);
    if (mode == Mode::descent) {
      if (state.h > kTransitionAltitude) u.v_sel = std::min(script.descent_cas, mach_cas);
      else if (state.h > 2000.0) u.v_sel = script.terminal_cas;
      else if (state.h > 1300.0) u.v_sel = 105.0;
      else if (state.h > 900.0) u.v_sel = 95.0;
      else u.v_sel = script.approach_cas;
    } else if (mode == Mode::climb && state.h < kTransitionAltitude) {
      u.v_sel = script.terminal_cas;
    } else {
      u.v_sel = mode == Mode::climb ? std::min(script.climb_cas, mach_cas) : mach_cas;
    }

    for (const auto& seg : script.vs_segments) {
      using Where = VerticalSpeedSegment::Where;
      const bool engaged =
          (seg.where == Where::final_climb && mode == Mode::climb && level - state.h <= seg.span &&
           level - state.h > guidance.altitude_tolerance) ||
          (seg.where == Where::initial_descent && mode == Mode::descent &&
           state.h > descent_top - seg.span) ||
          (seg.where == Where::approach && mode == Mode::descent && state.h < 2000.0 &&
           state.h > 2000.0 - seg.span);
      if (engaged) u.vz_sel = seg.vz;
    }

    if (mode == Mode::climb && (state.h > 1200.0 || state.v_cas > 100.0)) flap_climb = 0;
    if (mode != Mode::climb) flap_climb = 0;
    if (mode == Mode::descent) {
      if (state.h < 2000.0) flap_descent = std::max(flap_descent, 1);
      if (state.h < 1300.0) flap_descent = std::max(flap_descent, 2);
      if (state.h < 900.0) {
        flap_descent = std::max(flap_descent, 3);
        gear = 1;
      }
    }
    u.flap = mode == Mode::descent ? flap_descent : flap_climb;
    u.gear = gear;
    u.speed_brake = (mode == Mode::descent && state.v_cas - u.v_sel > 5.0) ? 1 : 0;

    const auto routine = baseline::select_routine(state, u, guidance);
    auto cmd = baseline::command(state, routine, u, e0, cfg, guidance);
    double theta_offset = 0.0;
    if (script.noise_enabled) {
      cmd.thrust *= 1.0 + thrust_noise.next(rng);
      cmd.vz += vz_noise.next(rng);
      theta_offset = noise.theta_sigma * rng.normal();
    }

    baseline::StepResult step;
    try {
      step = baseline::propagate(state, cmd, u, e0, cfg, dt, guidance);
    } catch (const std::domain_error& e) {
      throw InfeasibleScript(fmt::format("propagation failed at t={} s: {}", t, e.what()));
    }
    out.series.records.push_back(baseline::make_record(t, state, step, u, e0, theta_offset));
    const double dh = u.h_sel - state.h;
    out.phases.push_back(dh > guidance.altitude_tolerance    ? ScriptPhase::climb
                         : dh < -guidance.altitude_tolerance ? ScriptPhase::descent
                                                             : ScriptPhase::level);
    state = step.next;
    if (mode == Mode::descent && state.h <= script.end_altitude) break;
  }
  if (out.series.records.size() < data::kSequenceLength) {
    throw InfeasibleScript("flight shorter than one 60-record sequence");
  }
  return out;
}

FlightScript random_script(std::uint64_t seed) {
  Random rng(mix_seed(seed, 0xA11));
  FlightScript s;
  s.seed = mix_seed(seed, 0xB22);
  s.takeoff_mass = rng.uniform(56000.0, 72000.0);
  const int max_index = s.takeoff_mass > 68000.0 ? 3 : 4;
  s.cruise_level = (29000.0 + 2000.0 * static_cast<double>(rng.index(static_cast<std::size_t>(max_index) + 1))) *
                   0.3048;
  s.cruise_mach = rng.uniform(0.76, 0.79);
  s.climb_cas = rng.uniform(145.0, 157.0);
  s.descent_cas = rng.uniform(140.0, 150.0);
  s.initial_cas = rng.uniform(82.0, 90.0);
  const double cruise_distance = rng.uniform(100e3, 450e3);
  s.descent_distance = 250e3 + cruise_distance;
  if (rng.uniform() < 0.3 && s.cruise_level + 610.0 <= 11887.0) {
    s.step_climbs.push_back({250e3 + 0.5 * cruise_distance, s.cruise_level + 609.6});
  }

  using Where = VerticalSpeedSegment::Where;
  auto draw_segment = [&](Where where) {
    switch (where) {
      case Where::final_climb: return VerticalSpeedSegment{where, rng.uniform(5.0, 8.0), rng.uniform(600.0, 1200.0)};
      case Where::initial_descent:
        return VerticalSpeedSegment{where, rng.uniform(-8.0, -4.0), rng.uniform(1000.0, 2500.0)};
      case Where::approach: return VerticalSpeedSegment{where, rng.uniform(-5.0, -3.5), 600.0};
    }
    return VerticalSpeedSegment{};
  };
  const std::array<Where, 3> wheres{Where::final_climb, Where::initial_descent, Where::approach};
  const std::size_t first = rng.index(3);
  s.vs_segments.push_back(draw_segment(wheres[first]));
  if (rng.uniform() < 0.3) s.vs_segments.push_back(draw_segment(wheres[(first + 1 + rng.index(2)) % 3]));

  s.wind = {rng.uniform(-5.0, 5.0), rng.uniform(-20.0, 20.0), rng.uniform(-5.0, 5.0), rng.uniform(-15.0, 15.0)};
  s.delta_isa = rng.uniform(-10.0, 10.0);
  return s;
}

DatasetSummary generate_dataset(const perf::PerformanceConfig& cfg, const DatasetRequest& request,
                                const std::filesystem::path& out) {
  if (request.train == 0) throw std::invalid_argument("empty training split");
  if (request.val == 0 || request.test == 0) throw std::invalid_argument("validation and test splits need at least one flight");
  perf::validate(cfg);

  Random rng(mix_seed(request.seed, 0xD00));
  DatasetSummary summary;
  summary.manifest.root = out;

  struct SplitPlan {
    const char* name;
    std::size_t flights;
    std::size_t airframes;
    std::vector<data::ManifestEntry>* entries;
    char letter;
  };
  std::array<SplitPlan, 3> plans{{
      {"train", request.train, request.airframes_train, &summary.manifest.train, 'T'},
      {"val", request.val, request.airframes_val, &summary.manifest.val, 'V'},
      {"test", request.test, request.airframes_test, &summary.manifest.test, 'X'},
  }};

  std::filesystem::create_directories(out);
  std::uint64_t flight_counter = 0;
  for (auto& plan : plans) {
    const std::size_t n_air = std::max<std::size_t>(1, plan.airframes);
    std::vector<Airframe> fleet;
    for (std::size_t i = 0; i < n_air; ++i) {
      Airframe a;
      a.tag = fmt::format("SYN-{}{:02d}", plan.letter, i + 1);
      a.split = plan.name;
      a.variant = (i % 2 == 0 ? 1.0 : -1.0) * request.variant_magnitude;
      a.fuel_multiplier = rng.uniform(request.min_fuel_multiplier, request.max_fuel_multiplier);
      fleet.push_back(a);
      summary.airframes.push_back(a);
    }

    std::filesystem::create_directories(out / plan.name);
    for (std::size_t i = 0; i < plan.flights; ++i) {
      const Airframe& airframe = fleet[i % fleet.size()];
      const auto airframe_cfg = perf::airframe_variant(cfg, airframe.variant, airframe.fuel_multiplier);
      GeneratedFlight flight;
      for (int attempt = 0;; ++attempt) {
        const auto script = random_script(mix_seed(request.seed, flight_counter++));
        try {
          flight = generate_flight(airframe_cfg, script);
          break;
        } catch (const InfeasibleScript& e) {
          ++summary.infeasible_retries;
          summary.infeasible.push_back(fmt::format("{} flight {} attempt {}: {}", plan.name, i, attempt, e.what()));
          if (attempt >= 20) throw;
        }
      }
      const std::string file = fmt::format("{}/{}_{:04d}.csv", plan.name, plan.name, i);
      flight.series.tag = std::filesystem::path(file).stem().string();
      data::write_csv(flight.series, out / file);
      plan.entries->push_back({file, airframe.tag});
    }
  }
  data::check_disjoint_splits(summary.manifest);
  data::save_manifest(summary.manifest, out / "manifest.json");
  perf::save(cfg, out / "performance.json");

  json fleet = json::array();
  for (const auto& a : summary.airframes) {
    fleet.push_back({{"tag", a.tag}, {"split", a.split}, {"variant", a.variant},
                     {"fuel_multiplier", a.fuel_multiplier}});
  }
  std::ofstream af(out / "airframes.json", std::ios::binary);
  af << json{{"airframes", fleet}}.dump(2) << '\n';
  return summary;
}

}  // namespace nodefdm::synth
