#include "nodefdm/node_fdm.hpp"

#include <algorithm>
#include <cmath>

#include "nodefdm/atmosphere.hpp"

namespace nodefdm::model {

namespace atm = nodefdm::atmosphere;
using data::Feature;
using nn::Tensor2;
using nn::Var;

namespace {

constexpr std::size_t kExogenous = 9;  // h_sel, v_sel, vz_sel, flap, gear, speed_brake, t_oat, wind_par, wind_perp
constexpr double kMinRolloutAltitude = -100.0;

std::uint64_t layer_seed(std::uint64_t seed, std::uint64_t layer) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (layer + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

nn::HeadSpec head(const data::NormStats& stats, Feature f) {
  return nn::HeadSpec{std::string(data::feature_name(f)), nn::HeadKind::continuous, {stats[f]}};
}

nn::StructuredLayerSpec layer(const std::string& name, const data::NormStats& stats, const std::vector<Feature>& inputs,
                              std::vector<nn::HeadSpec> heads) {
  nn::StructuredLayerSpec s;
  s.name = name;
  for (Feature f : inputs) {
    s.inputs.emplace_back(data::feature_name(f));
    s.input_stats.push_back(stats[f]);
  }
  s.heads = std::move(heads);
  return s;
}

void exogenous_row(const data::FlightRecord& r, double* out) {
  out[0] = r.u.h_sel;
  out[1] = r.u.v_sel;
  out[2] = r.u.vz_sel;
  out[3] = r.u.flap;
  out[4] = r.u.gear;
  out[5] = r.u.speed_brake;
  out[6] = r.e0.t_oat;
  out[7] = r.e0.wind_par;
  out[8] = r.e0.wind_perp;
}

struct StateVars {
  Var h, d, gamma, v, m;
};

struct StepVars {
  Var vz, mach, v_cas, v_gs, dh_sel, dv_sel;
  Var alpha, theta, n1, fuel_flow;
  Var dv, dgamma;
};

// CAS of every row with its partials. In strict mode a domain violation aborts
// the rollout; otherwise inputs are clamped into the valid domain and the
// clamped direction carries no gradient.
Var cas_on_tape(Var v, Var h, const Tensor2& exo, bool strict, std::size_t step) {
  const Tensor2& vv = v.value();
  const Tensor2& hv = h.value();
  Tensor2 value(vv.rows, 1), dv(vv.rows, 1), dh(vv.rows, 1);
  for (std::size_t r = 0; r < vv.rows; ++r) {
    const double t = exo(r, 6);
    double vr = vv.values[r];
    double hr = hv.values[r];
    bool v_free = true, h_free = true;
    if (!strict) {
      const double v_hi = 0.95 * atm::speed_of_sound(t);
      if (!(vr >= 0.0) || !(vr <= v_hi)) {
        vr = std::isnan(vr) ? 0.0 : std::clamp(vr, 0.0, v_hi);
        v_free = false;
      }
      if (!(hr >= atm::kMinAltitude) || !(hr <= atm::kMaxAltitude)) {
        hr = std::isnan(hr) ? 0.0 : std::clamp(hr, atm::kMinAltitude, atm::kMaxAltitude);
        h_free = false;
      }
    }
    try {
      const auto c = atm::tas_to_cas_with_partials(vr, hr, t);
      value.values[r] = c.cas;
      dv.values[r] = v_free ? c.d_cas_d_tas : 0.0;
      dh.values[r] = h_free ? c.d_cas_d_h : 0.0;
    } catch (const std::domain_error& e) {
      throw RolloutError(step, e.what());
    }
  }
  return nn::elementwise2(v, h, std::move(value), std::move(dv), std::move(dh));
}

StepVars step_on_tape(nn::Tape& tape, const NodeFdmModel& model, const StateVars& s, const Tensor2& exo, bool strict,
                      std::size_t step) {
  const std::size_t rows = exo.rows;
  Tensor2 inv_a(rows, 1), neg_wind(rows, 1), h_sel(rows, 1), v_sel(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    inv_a.values[r] = 1.0 / atm::speed_of_sound(exo(r, 6));
    neg_wind.values[r] = -exo(r, 7);
    h_sel.values[r] = exo(r, 0);
    v_sel.values[r] = exo(r, 1);
  }
  StepVars o;
  o.vz = s.v * nn::sin(s.gamma);
  o.mach = nn::mul_constant(s.v, inv_a);
  o.v_cas = cas_on_tape(s.v, s.h, exo, strict, step);
  o.v_gs = nn::add_constant(s.v, neg_wind);
  o.dh_sel = nn::sub_from_constant(h_sel, s.h);
  o.dv_sel = nn::sub_from_constant(v_sel, o.v_cas);

  const Var parts[] = {s.h,    s.gamma,  s.v,    s.m,      tape.constant(exo),
                       o.mach, o.v_cas,  o.vz,   o.v_gs,   o.dh_sel,
                       o.dv_sel};
  const Var inputs = nn::concat_cols(parts);

  const auto angle = nn::forward(tape, model.angle, model.params, model.angle_offset(), inputs);
  const auto engine = nn::forward(tape, model.engine, model.params, model.engine_offset(), inputs);
  o.alpha = angle[0];
  o.theta = angle[1];
  o.n1 = engine[0];
  o.fuel_flow = nn::softplus(engine[1], model.softplus_beta);

  const Var deriv_parts[] = {inputs, o.alpha, o.theta, o.n1, o.fuel_flow};
  const auto deriv = nn::forward(tape, model.derivative, model.params, model.derivative_offset(),
                                 nn::concat_cols(deriv_parts));
  o.dv = deriv[0];
  o.dgamma = deriv[1];
  return o;
}

StateVars advance(const StateVars& s, const StepVars& o, double dt) {
  return StateVars{s.h + o.vz * dt, s.d + o.v_gs * dt, s.gamma + o.dgamma * dt, s.v + o.dv * dt,
                   s.m + o.fuel_flow * (-dt)};
}

Var supervised_var(const StateVars& s, const StepVars& o, Feature f) {
  switch (f) {
    case Feature::h: return s.h;
    case Feature::d: return s.d;
    case Feature::gamma: return s.gamma;
    case Feature::v_tas: return s.v;
    case Feature::m: return s.m;
    case Feature::alpha: return o.alpha;
    case Feature::theta: return o.theta;
    case Feature::n1: return o.n1;
    case Feature::fuel_flow: return o.fuel_flow;
    default: throw std::invalid_argument("feature '" + std::string(data::feature_name(f)) + "' is not supervised");
  }
}

double scalar(Var v) { return v.value().values[0]; }

}  // namespace

const std::vector<Feature>& layer_inputs() {
  static const std::vector<Feature> v = {
      Feature::h,         Feature::gamma,    Feature::v_tas,     Feature::m,      Feature::h_sel,
      Feature::v_sel,     Feature::vz_sel,   Feature::flap,      Feature::gear,   Feature::speed_brake,
      Feature::t_oat,     Feature::wind_par, Feature::wind_perp, Feature::mach,   Feature::v_cas,
      Feature::vz,        Feature::v_gs,     Feature::dh_sel,    Feature::dv_sel,
  };
  return v;
}

const std::vector<Feature>& derivative_inputs() {
  static const std::vector<Feature> v = [] {
    auto out = layer_inputs();
    out.insert(out.end(), {Feature::alpha, Feature::theta, Feature::n1, Feature::fuel_flow});
    return out;
  }();
  return v;
}

std::size_t NodeFdmModel::parameter_count() const {
  return angle.parameter_count() + engine.parameter_count() + derivative.parameter_count();
}

void NodeFdmModel::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("integration step must be positive");
  if (!(softplus_beta > 0.0)) throw std::invalid_argument("softplus sharpness must be positive");
  for (const auto* spec : {&angle, &engine, &derivative}) {
    spec->validate();
    if (spec->hidden != 24 || spec->depth != 2) {
      throw std::invalid_argument("layer '" + spec->name + "' must have two hidden layers of 24 units");
    }
    if (spec->heads.size() != 2) throw std::invalid_argument("layer '" + spec->name + "' must have two heads");
    for (const auto& h : spec->heads)
      if (h.dim() != 1 || h.kind != nn::HeadKind::continuous)
        throw std::invalid_argument("layer '" + spec->name + "' heads must be scalar and continuous");
  }
  if (angle.inputs.size() != layer_inputs().size() || engine.inputs.size() != layer_inputs().size() ||
      derivative.inputs.size() != derivative_inputs().size()) {
    throw std::invalid_argument("layer input sets do not match the model definition");
  }
  if (params.size() != angle.tensor_count() + engine.tensor_count() + derivative.tensor_count()) {
    throw std::invalid_argument("parameter count does not match layer definitions");
  }
  nn::check_params(angle, params, angle_offset());
  nn::check_params(engine, params, engine_offset());
  nn::check_params(derivative, params, derivative_offset());
}

NodeFdmModel make_model(const data::NormStats& stats, std::uint64_t seed) {
  NodeFdmModel m;
  m.stats = stats;
  m.angle = layer("angle", stats, layer_inputs(), {head(stats, Feature::alpha), head(stats, Feature::theta)});
  m.engine = layer("engine", stats, layer_inputs(), {head(stats, Feature::n1), head(stats, Feature::fuel_flow)});
  m.derivative = layer("derivative", stats, derivative_inputs(),
                       {head(stats, Feature::dv_tas_dt), head(stats, Feature::dgamma_dt)});
  std::uint64_t k = 0;
  for (const auto* spec : {&m.angle, &m.engine, &m.derivative}) {
    auto p = nn::init_params(*spec, layer_seed(seed, k++));
    m.params.insert(m.params.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  m.validate();
  return m;
}

TrajectoryIntermediates trajectory_layer(const data::StateVector& x, const data::ControlVector& u,
                                         const data::ContextVector& e0) {
  TrajectoryIntermediates e;
  e.vz = x.v_tas * std::sin(x.gamma);
  e.mach = x.v_tas * (1.0 / atm::speed_of_sound(e0.t_oat));
  e.v_cas = atm::tas_to_cas(x.v_tas, x.h, e0.t_oat);
  e.v_gs = x.v_tas + (-e0.wind_par);
  e.dh_sel = u.h_sel - x.h;
  e.dv_sel = u.v_sel - e.v_cas;
  return e;
}

RolloutError::RolloutError(std::size_t step, const std::string& what)
    : std::runtime_error("rollout aborted at step " + std::to_string(step) + ": " + what), step_(step) {}

namespace {

StepOutput evaluate_step(nn::Tape& tape, const NodeFdmModel& model, const data::StateVector& x,
                         const data::FlightRecord& driver, std::size_t step) {
  tape.clear();
  Tensor2 exo(1, kExogenous);
  exogenous_row(driver, exo.values.data());
  const StateVars s{tape.constant(Tensor2::scalar(x.h)), tape.constant(Tensor2::scalar(x.d)),
                    tape.constant(Tensor2::scalar(x.gamma)), tape.constant(Tensor2::scalar(x.v_tas)),
                    tape.constant(Tensor2::scalar(x.m))};
  const StepVars o = step_on_tape(tape, model, s, exo, true, step);
  StepOutput out;
  out.e.vz = scalar(o.vz);
  out.e.mach = scalar(o.mach);
  out.e.v_cas = scalar(o.v_cas);
  out.e.v_gs = scalar(o.v_gs);
  out.e.dh_sel = scalar(o.dh_sel);
  out.e.dv_sel = scalar(o.dv_sel);
  out.e.alpha = scalar(o.alpha);
  out.e.theta = scalar(o.theta);
  out.e.n1 = scalar(o.n1);
  out.e.fuel_flow = scalar(o.fuel_flow);
  out.dx = StateDerivative{out.e.vz, out.e.v_gs, scalar(o.dgamma), scalar(o.dv), -out.e.fuel_flow};
  const double checks[] = {out.dx.dh, out.dx.dd, out.dx.dgamma, out.dx.dv_tas, out.dx.dm,
                           out.e.alpha, out.e.theta, out.e.n1};
  for (double c : checks)
    if (!std::isfinite(c)) throw RolloutError(step, "non-finite network output");
  return out;
}

}  // namespace

StepOutput step_derivative(const NodeFdmModel& model, const data::StateVector& x, const data::ControlVector& u,
                           const data::ContextVector& e0) {
  nn::Tape tape;
  data::FlightRecord r;
  r.u = u;
  r.e0 = e0;
  return evaluate_step(tape, model, x, r, 0);
}

data::StateVector euler_step(const data::StateVector& x, const StateDerivative& dx, double dt) {
  return data::StateVector{x.h + dx.dh * dt, x.d + dx.dd * dt, x.gamma + dx.dgamma * dt, x.v_tas + dx.dv_tas * dt,
                           x.m + dx.dm * dt};
}

namespace {

void check_state(const data::StateVector& x, std::size_t step) {
  if (!std::isfinite(x.h) || !std::isfinite(x.d) || !std::isfinite(x.gamma) || !std::isfinite(x.v_tas) ||
      !std::isfinite(x.m)) {
    throw RolloutError(step, "non-finite state");
  }
  if (x.h < kMinRolloutAltitude) {
    throw RolloutError(step, "altitude " + std::to_string(x.h) + " m below " + std::to_string(kMinRolloutAltitude) + " m");
  }
}

}  // namespace

Rollout rollout(const NodeFdmModel& model, const data::StateVector& x0, std::span<const data::FlightRecord> drivers) {
  model.validate();
  Rollout out;
  out.states.reserve(drivers.size());
  out.outputs.reserve(drivers.size());
  nn::Tape tape;
  data::StateVector x = x0;
  check_state(x, 0);
  for (std::size_t k = 0; k < drivers.size(); ++k) {
    StepOutput s;
    try {
      s = evaluate_step(tape, model, x, drivers[k], k);
    } catch (const std::domain_error& e) {
      throw RolloutError(k, e.what());
    }
    out.states.push_back(x);
    out.outputs.push_back(s.e);
    x = euler_step(x, s.dx, model.dt);
    check_state(x, k + 1);
  }
  out.final_state = x;
  return out;
}

std::vector<data::StateVector> integrate(const Field& field, const data::StateVector& x0, std::size_t steps, double dt) {
  std::vector<data::StateVector> out;
  out.reserve(steps + 1);
  out.push_back(x0);
  for (std::size_t k = 0; k < steps; ++k) out.push_back(euler_step(out.back(), field(out.back(), k), dt));
  return out;
}

LossWeights LossWeights::from_stats(const data::NormStats& stats, WeightConvention convention, bool include_distance) {
  LossWeights w;
  std::vector<Feature> features = {Feature::h,     Feature::gamma, Feature::v_tas, Feature::m,
                                   Feature::alpha, Feature::theta, Feature::n1,    Feature::fuel_flow};
  if (include_distance) features.insert(features.begin() + 1, Feature::d);
  for (Feature f : features) {
    const double s = stats[f].std;
    if (!(s > 0.0)) throw std::invalid_argument("feature '" + std::string(data::feature_name(f)) + "' has zero spread");
    w.features.push_back(f);
    w.weights.push_back(convention == WeightConvention::inverse_variance ? 1.0 / (s * s) : 1.0 / s);
  }
  return w;
}

void LossWeights::validate() const {
  if (features.empty() || features.size() != weights.size()) throw std::invalid_argument("one weight per supervised feature required");
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) throw std::invalid_argument("loss weights must be positive");
    supervised_value(data::StateVector{}, data::IntermediateVector{}, features[i]);
  }
}

double supervised_value(const data::StateVector& x, const data::IntermediateVector& e, Feature f) {
  switch (f) {
    case Feature::h: return x.h;
    case Feature::d: return x.d;
    case Feature::gamma: return x.gamma;
    case Feature::v_tas: return x.v_tas;
    case Feature::m: return x.m;
    case Feature::alpha: return e.alpha;
    case Feature::theta: return e.theta;
    case Feature::n1: return e.n1;
    case Feature::fuel_flow: return e.fuel_flow;
    default: throw std::invalid_argument("feature '" + std::string(data::feature_name(f)) + "' is not supervised");
  }
}

double composite_loss(const Rollout& pred, std::span<const data::FlightRecord> truth, const LossWeights& weights) {
  weights.validate();
  if (pred.states.size() != truth.size() || pred.outputs.size() != truth.size()) {
    throw std::invalid_argument("prediction has " + std::to_string(pred.states.size()) + " steps, truth has " +
                                std::to_string(truth.size()));
  }
  if (truth.empty()) throw std::invalid_argument("empty window");
  double loss = 0.0;
  for (std::size_t i = 0; i < weights.features.size(); ++i) {
    const Feature f = weights.features[i];
    double sse = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const double e = supervised_value(pred.states[k], pred.outputs[k], f) - supervised_value(truth[k].x, truth[k].e, f);
      sse += e * e;
    }
    loss += weights.weights[i] * (sse / static_cast<double>(truth.size()));
  }
  return loss;
}

Var batch_loss(nn::Tape& tape, const NodeFdmModel& model, std::span<const data::Sequence* const> batch,
               const LossWeights& weights) {
  weights.validate();
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t length = batch.front()->records.size();
  if (length == 0) throw std::invalid_argument("empty window");
  for (const auto* s : batch)
    if (s->records.size() != length) throw std::invalid_argument("windows in a batch must have equal length");
  const std::size_t rows = batch.size();
  const std::size_t nf = weights.features.size();

  Tensor2 h(rows, 1), d(rows, 1), g(rows, 1), v(rows, 1), m(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& x = batch[r]->records.front().x;
    h.values[r] = x.h;
    d.values[r] = x.d;
    g.values[r] = x.gamma;
    v.values[r] = x.v_tas;
    m.values[r] = x.m;
  }
  StateVars s{tape.constant(std::move(h)), tape.constant(std::move(d)), tape.constant(std::move(g)),
              tape.constant(std::move(v)), tape.constant(std::move(m))};

  std::vector<Var> step_losses;
  step_losses.reserve(length);
  std::vector<Var> cols(nf);
  for (std::size_t k = 0; k < length; ++k) {
    Tensor2 exo(rows, kExogenous), target(rows, nf);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& rec = batch[r]->records[k];
      exogenous_row(rec, &exo.values[r * kExogenous]);
      for (std::size_t i = 0; i < nf; ++i) target(r, i) = supervised_value(rec.x, rec.e, weights.features[i]);
    }
    const StepVars o = step_on_tape(tape, model, s, exo, false, k);
    for (std::size_t i = 0; i < nf; ++i) cols[i] = supervised_var(s, o, weights.features[i]);
    step_losses.push_back(nn::weighted_squared_error(nn::concat_cols(cols), target, weights.weights));
    if (k + 1 < length) s = advance(s, o, model.dt);
  }
  Var total = step_losses.front();
  for (std::size_t k = 1; k < step_losses.size(); ++k) total = total + step_losses[k];
  return total * (1.0 / static_cast<double>(rows * length));
}

nn::Checkpoint to_checkpoint(const NodeFdmModel& model, const LossWeights& weights) {
  model.validate();
  weights.validate();
  nn::Checkpoint c;
  c.stats = model.stats;
  c.layers = {model.angle, model.engine, model.derivative};
  c.params = model.params;
  c.dt = model.dt;
  c.softplus_beta = model.softplus_beta;
  for (std::size_t i = 0; i < weights.features.size(); ++i) {
    c.loss_weights.emplace_back(std::string(data::feature_name(weights.features[i])), weights.weights[i]);
  }
  return c;
}

NodeFdmModel model_from_checkpoint(const nn::Checkpoint& c) {
  if (c.layers.size() != 3) throw nn::CheckpointError("model checkpoint must hold three layers");
  NodeFdmModel m;
  m.stats = c.stats;
  m.dt = c.dt;
  m.softplus_beta = c.softplus_beta;
  m.angle = c.layers[0];
  m.engine = c.layers[1];
  m.derivative = c.layers[2];
  m.params = c.params;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw nn::CheckpointError(e.what());
  }
  return m;
}

LossWeights weights_from_checkpoint(const nn::Checkpoint& c) {
  LossWeights w;
  for (const auto& [name, value] : c.loss_weights) {
    const auto f = data::feature_from_name(name);
    if (!f) throw nn::CheckpointError("unknown loss feature '" + name + "'");
    w.features.push_back(*f);
    w.weights.push_back(value);
  }
  w.validate();
  return w;
}

}  // namespace nodefdm::model
