#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nodefdm/flight_data.hpp"
#include "nodefdm/nn/adamw.hpp"
#include "nodefdm/nn/structured_layer.hpp"

namespace nodefdm::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  static constexpr int kVersion = 1;

  data::NormStats stats;
  std::vector<StructuredLayerSpec> layers;
  ParameterSet params;
  std::optional<AdamWState> optimizer;
  std::vector<std::pair<std::string, double>> loss_weights;
  double dt = data::kSampleInterval;
  double softplus_beta = 100.0;
  std::map<std::string, double> metadata;
};

/// FNV-1a over the structural description of the layers (names, inputs, widths, heads).
std::string spec_hash(std::span<const StructuredLayerSpec> layers);

std::string to_json_text(const Checkpoint& checkpoint);
Checkpoint from_json_text(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nodefdm::nn
