#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nodefdm/flight_data.hpp"
#include "nodefdm/nn/adamw.hpp"
#include "nodefdm/node_fdm.hpp"

namespace nodefdm::train {

struct TrainingConfig {
  std::uint64_t seed = 1;
  std::size_t epochs = 1000;
  std::size_t batch_size = 32;
  std::size_t sequence_length = data::kSequenceLength;
  nn::AdamWConfig optimizer;
  model::WeightConvention weight_convention = model::WeightConvention::inverse_variance;
  bool supervise_distance = false;
  double gradient_clip = 0.0;  // global-norm clipping threshold, 0 disables
  std::string manifest;

  void validate() const;
  std::string to_json_text() const;
  /// Keys absent from `text` keep the values already in `base`.
  static TrainingConfig from_json_text(const std::string& text, TrainingConfig base);
  static TrainingConfig from_json_text(const std::string& text);
  static TrainingConfig load(const std::filesystem::path& path, TrainingConfig base);
  static TrainingConfig load(const std::filesystem::path& path);
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // epoch 0: full evaluation; later: mean batch loss
  double val_loss = 0.0;    // NaN when there is no validation split
};

struct TrainingResult {
  model::NodeFdmModel best;
  model::NodeFdmModel last;
  model::LossWeights weights;
  nn::AdamWState optimizer;
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  double final_train_loss = 0.0;  // full evaluation of `last` on the training windows
  bool diverged = false;
  std::string message;
};

using EpochObserver = std::function<void(const EpochLog&, const TrainingResult&)>;

/// Mean composite loss over windows, evaluated in chunks of `batch_size`.
double evaluate_loss(const model::NodeFdmModel& model, std::span<const data::Sequence> windows,
                     const model::LossWeights& weights, std::size_t batch_size = 64);

/// Mini-batch AdamW over pre-sliced windows. Selection of the best model uses
/// validation loss, or training loss when `val` is empty. When `out_dir` is
/// non-empty, best.json is rewritten on every improvement.
TrainingResult train_windows(model::NodeFdmModel initial, std::span<const data::Sequence> train,
                             std::span<const data::Sequence> val, const model::LossWeights& weights,
                             const TrainingConfig& config, const std::filesystem::path& out_dir = {},
                             const EpochObserver& observer = {});

/// Normalization, initialization, slicing and training from whole flights.
TrainingResult train(const TrainingConfig& config, std::span<const data::FlightSeries> train_flights,
                     std::span<const data::FlightSeries> val_flights, const std::filesystem::path& out_dir = {},
                     const EpochObserver& observer = {});

std::vector<data::Sequence> slice_all(std::span<const data::FlightSeries> flights, std::size_t length);

/// best.json, last.json (with optimizer state) and loss.csv.
void write_outputs(const std::filesystem::path& out_dir, const TrainingResult& result, const TrainingConfig& config);

std::string loss_csv(const std::vector<EpochLog>& history);

}  // namespace nodefdm::train
