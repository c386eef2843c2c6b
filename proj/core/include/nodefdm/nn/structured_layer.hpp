#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nodefdm/flight_data.hpp"
#include "nodefdm/nn/tape.hpp"

namespace nodefdm::nn {

enum class HeadKind { continuous, binary };

struct HeadSpec {
  std::string name;
  HeadKind kind = HeadKind::continuous;
  /// One entry per output unit; used to denormalize continuous heads.
  std::vector<data::FeatureStats> stats;

  std::size_t dim() const { return stats.size(); }
};

/// Normalize -> ReLU backbone -> per-head linear -> denormalize.
struct StructuredLayerSpec {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<data::FeatureStats> input_stats;
  std::size_t hidden = 24;
  std::size_t depth = 2;
  std::vector<HeadSpec> heads;

  void validate() const;
  std::size_t parameter_count() const;
  /// Number of tensors (weights and biases) this layer owns.
  std::size_t tensor_count() const { return 2 * (depth + heads.size()); }
};

/// Kaiming-uniform backbone weights, U(+-1/sqrt(fan_in)) head weights, zero biases.
ParameterSet init_params(const StructuredLayerSpec& spec, std::uint64_t seed);

/// Checks that `params[offset, offset + tensor_count)` has the expected shapes.
void check_params(const StructuredLayerSpec& spec, const ParameterSet& params, std::size_t offset = 0);

/// Forward pass on a tape. `x` is raw (physical units), one row per sample and
/// one column per spec input. Returns one Var per head, in spec order.
std::vector<Var> forward(Tape& tape, const StructuredLayerSpec& spec, const ParameterSet& params, std::size_t offset,
                         Var x);

/// Single-sample convenience wrapper keyed by input and head name.
std::map<std::string, std::vector<double>> evaluate(const StructuredLayerSpec& spec, const ParameterSet& params,
                                                    const std::map<std::string, double>& inputs);

}  // namespace nodefdm::nn
