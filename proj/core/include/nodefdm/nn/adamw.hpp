#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nodefdm/nn/tape.hpp"

namespace nodefdm::nn {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamWState {
  std::size_t step = 0;
  std::vector<Tensor2> m;
  std::vector<Tensor2> v;
};

/// One decoupled-weight-decay Adam update. State is lazily sized on first use.
void adamw_step(const AdamWConfig& config, ParameterSet& params, std::span<const Tensor2> grads, AdamWState& state);

/// Global L2 norm over a set of gradients.
double global_norm(std::span<const Tensor2> grads);

}  // namespace nodefdm::nn
