#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nodefdm/flight_data.hpp"
#include "nodefdm/nn/checkpoint.hpp"
#include "nodefdm/nn/structured_layer.hpp"
#include "nodefdm/nn/tape.hpp"

namespace nodefdm::model {

/// Inputs shared by the angle and engine layers.
const std::vector<data::Feature>& layer_inputs();
/// Inputs of the derivative layer: layer_inputs() followed by alpha, theta, n1, fuel_flow.
const std::vector<data::Feature>& derivative_inputs();

struct NodeFdmModel {
  data::NormStats stats;
  double dt = data::kSampleInterval;
  double softplus_beta = 100.0;
  nn::StructuredLayerSpec angle;       // heads: alpha, theta
  nn::StructuredLayerSpec engine;      // heads: n1, fuel_flow (pre-softplus)
  nn::StructuredLayerSpec derivative;  // heads: dv_tas_dt, dgamma_dt
  nn::ParameterSet params;             // angle, then engine, then derivative tensors

  std::size_t angle_offset() const { return 0; }
  std::size_t engine_offset() const { return angle.tensor_count(); }
  std::size_t derivative_offset() const { return angle.tensor_count() + engine.tensor_count(); }
  std::size_t parameter_count() const;
  void validate() const;
};

NodeFdmModel make_model(const data::NormStats& stats, std::uint64_t seed);

/// Analytical part of the model: e1 from (x, u, e0).
struct TrajectoryIntermediates {
  double vz = 0.0;
  double mach = 0.0;
  double v_cas = 0.0;
  double v_gs = 0.0;
  double dh_sel = 0.0;
  double dv_sel = 0.0;
};

TrajectoryIntermediates trajectory_layer(const data::StateVector& x, const data::ControlVector& u,
                                         const data::ContextVector& e0);

struct StateDerivative {
  double dh = 0.0;
  double dd = 0.0;
  double dgamma = 0.0;
  double dv_tas = 0.0;
  double dm = 0.0;
};

struct StepOutput {
  StateDerivative dx;
  data::IntermediateVector e;  // e1, e2 and e3 of this step
};

/// Thrown when a rollout leaves the valid domain; `step` is the failing index.
class RolloutError : public std::runtime_error {
 public:
  RolloutError(std::size_t step, const std::string& what);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

StepOutput step_derivative(const NodeFdmModel& model, const data::StateVector& x, const data::ControlVector& u,
                           const data::ContextVector& e0);

data::StateVector euler_step(const data::StateVector& x, const StateDerivative& dx, double dt);

struct Rollout {
  std::vector<data::StateVector> states;          // x_0 .. x_{N-1}
  std::vector<data::IntermediateVector> outputs;  // evaluated at each state
  data::StateVector final_state;                  // x_N
};

/// Explicit Euler from x0 driven by the controls and context of `drivers`
/// (one record per step).
Rollout rollout(const NodeFdmModel& model, const data::StateVector& x0, std::span<const data::FlightRecord> drivers);

using Field = std::function<StateDerivative(const data::StateVector&, std::size_t)>;
/// Same integrator on an arbitrary field; returns x_0 .. x_N.
std::vector<data::StateVector> integrate(const Field& field, const data::StateVector& x0, std::size_t steps, double dt);

enum class WeightConvention { inverse_variance, inverse_std };

struct LossWeights {
  std::vector<data::Feature> features;
  std::vector<double> weights;

  static LossWeights from_stats(const data::NormStats& stats, WeightConvention convention = WeightConvention::inverse_variance,
                                bool include_distance = false);
  void validate() const;
};

/// Supervised channels of a rollout output or a record.
double supervised_value(const data::StateVector& x, const data::IntermediateVector& e, data::Feature f);

/// sum_i w_i * mean_k (pred_i - truth_i)^2 over aligned windows.
double composite_loss(const Rollout& pred, std::span<const data::FlightRecord> truth, const LossWeights& weights);

/// Batched forward of whole windows on a tape; returns the mean of the
/// per-window composite losses. All windows must have equal length.
nn::Var batch_loss(nn::Tape& tape, const NodeFdmModel& model, std::span<const data::Sequence* const> batch,
                   const LossWeights& weights);

nn::Checkpoint to_checkpoint(const NodeFdmModel& model, const LossWeights& weights);
NodeFdmModel model_from_checkpoint(const nn::Checkpoint& checkpoint);
LossWeights weights_from_checkpoint(const nn::Checkpoint& checkpoint);

}  // namespace nodefdm::model
