#include "nodefdm/nn/adamw.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nodefdm::nn {

void AdamWConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

void adamw_step(const AdamWConfig& config, ParameterSet& params, std::span<const Tensor2> grads, AdamWState& state) {
  config.validate();
  if (grads.size() != params.size()) throw std::invalid_argument("gradient count does not match parameter count");
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.rows, p.value.cols);
      state.v.emplace_back(p.value.rows, p.value.cols);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i].value) || !state.m[i].same_shape(params[i].value) ||
        !state.v[i].same_shape(params[i].value)) {
      throw std::invalid_argument("shape mismatch for parameter '" + params[i].name + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - config.learning_rate * config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value.values;
    auto& m = state.m[i].values;
    auto& v = state.v[i].values;
    const auto& g = grads[i].values;
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] *= decay;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double global_norm(std::span<const Tensor2> grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double x : g.values) s += x * x;
  return std::sqrt(s);
}

}  // namespace nodefdm::nn
