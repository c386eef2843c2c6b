#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nodefdm/trainer.hpp"

namespace nodefdm::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFlightFailures = 2;

struct GenDataOptions {
  std::size_t train = 10;
  std::size_t val = 2;
  std::size_t test = 2;
  std::uint64_t seed = 1;
  fs::path performance;  // optional PerformanceConfig JSON
  fs::path out;
};

struct TrainOptions {
  train::TrainingConfig config;
  fs::path out;
};

struct SimulateOptions {
  std::string model = "node-fdm";  // or "baseline"
  fs::path manifest;
  std::string split = "test";
  fs::path checkpoint;   // node-fdm
  fs::path performance;  // baseline; defaults to performance.json next to the manifest
  double perturb = 0.0;  // relative coefficient perturbation for the baseline
  fs::path out;
};

struct EvaluateOptions {
  fs::path manifest;
  std::string split = "test";
  fs::path node;      // directory of node-fdm predictions
  fs::path baseline;  // directory of baseline predictions
  bool literature = true;
  fs::path out;
};

struct ExportPlotsOptions {
  fs::path manifest;
  std::string split = "test";
  fs::path node;
  fs::path baseline;
  bool svg = false;
  fs::path out;
};

/// Values in the JSON object replace the corresponding options; unknown keys throw.
void apply_config(const std::string& json_text, GenDataOptions& o);
void apply_config(const std::string& json_text, TrainOptions& o);
void apply_config(const std::string& json_text, SimulateOptions& o);
void apply_config(const std::string& json_text, EvaluateOptions& o);
void apply_config(const std::string& json_text, ExportPlotsOptions& o);

std::string read_text(const fs::path& path);

int cmd_gen_data(const GenDataOptions& o);
int cmd_train(const TrainOptions& o);
int cmd_simulate(const SimulateOptions& o);
int cmd_evaluate(const EvaluateOptions& o);
int cmd_export_plots(const ExportPlotsOptions& o);

}  // namespace nodefdm::cli
