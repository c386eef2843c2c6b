#include "nodefdm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"

namespace nodefdm::train {

using nlohmann::json;

void TrainingConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (sequence_length < 2) throw std::invalid_argument("sequence length must be at least 2");
  if (!(gradient_clip >= 0.0)) throw std::invalid_argument("gradient clip must be non-negative");
  optimizer.validate();
}

std::string TrainingConfig::to_json_text() const {
  json j = {{"seed", seed},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"sequence_length", sequence_length},
            {"learning_rate", optimizer.learning_rate},
            {"weight_decay", optimizer.weight_decay},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"epsilon", optimizer.epsilon},
            {"weight_convention",
             weight_convention == model::WeightConvention::inverse_variance ? "inverse_variance" : "inverse_std"},
            {"supervise_distance", supervise_distance},
            {"gradient_clip", gradient_clip},
            {"manifest", manifest}};
  return j.dump(2) + "\n";
}

TrainingConfig TrainingConfig::from_json_text(const std::string& text, TrainingConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("training config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
  static const char* known[] = {"seed",   "epochs",  "batch_size",        "sequence_length",    "learning_rate",
                                "weight_decay", "beta1", "beta2", "epsilon", "weight_convention",
                                "supervise_distance", "gradient_clip", "manifest"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw std::invalid_argument("unknown training config key '" + key + "'");
    }
  }
  try {
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("sequence_length")) c.sequence_length = j["sequence_length"].get<std::size_t>();
    if (j.contains("learning_rate")) c.optimizer.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("weight_decay")) c.optimizer.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("beta1")) c.optimizer.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) c.optimizer.beta2 = j["beta2"].get<double>();
    if (j.contains("epsilon")) c.optimizer.epsilon = j["epsilon"].get<double>();
    if (j.contains("weight_convention")) {
      const auto w = j["weight_convention"].get<std::string>();
      if (w == "inverse_variance") {
        c.weight_convention = model::WeightConvention::inverse_variance;
      } else if (w == "inverse_std") {
        c.weight_convention = model::WeightConvention::inverse_std;
      } else {
        throw std::invalid_argument("weight_convention must be inverse_variance or inverse_std");
      }
    }
    if (j.contains("supervise_distance")) c.supervise_distance = j["supervise_distance"].get<bool>();
    if (j.contains("gradient_clip")) c.gradient_clip = j["gradient_clip"].get<double>();
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("training config has a value of the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

TrainingConfig TrainingConfig::load(const std::filesystem::path& path, TrainingConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open training config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), std::move(base));
}

TrainingConfig TrainingConfig::from_json_text(const std::string& text) { return from_json_text(text, TrainingConfig{}); }

TrainingConfig TrainingConfig::load(const std::filesystem::path& path) { return load(path, TrainingConfig{}); }

double evaluate_loss(const model::NodeFdmModel& model, std::span<const data::Sequence> windows,
                     const model::LossWeights& weights, std::size_t batch_size) {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  double total = 0.0;
  nn::Tape tape;
  std::vector<const data::Sequence*> batch;
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, windows.size() - i);
    batch.clear();
    for (std::size_t k = 0; k < n; ++k) batch.push_back(&windows[i + k]);
    tape.clear();
    total += model::batch_loss(tape, model, batch, weights).value().values[0] * static_cast<double>(n);
  }
  return total / static_cast<double>(windows.size());
}

namespace {

void shuffle(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const auto j = static_cast<std::size_t>(u * static_cast<double>(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

bool finite(const std::vector<nn::Tensor2>& grads) {
  for (const auto& g : grads)
    if (!g.all_finite()) return false;
  return true;
}

nn::Checkpoint checkpoint_of(const model::NodeFdmModel& m, const model::LossWeights& w, const EpochLog& log) {
  auto c = model::to_checkpoint(m, w);
  c.metadata["epoch"] = static_cast<double>(log.epoch);
  if (std::isfinite(log.train_loss)) c.metadata["train_loss"] = log.train_loss;
  if (std::isfinite(log.val_loss)) c.metadata["val_loss"] = log.val_loss;
  return c;
}

}  // namespace

TrainingResult train_windows(model::NodeFdmModel initial, std::span<const data::Sequence> train,
                             std::span<const data::Sequence> val, const model::LossWeights& weights,
                             const TrainingConfig& config, const std::filesystem::path& out_dir,
                             const EpochObserver& observer) {
  config.validate();
  weights.validate();
  initial.validate();
  if (train.empty()) throw std::invalid_argument("no training windows");
  for (const auto& s : train)
    if (s.records.size() != train.front().records.size())
      throw std::invalid_argument("training windows must have equal length");

  TrainingResult result;
  result.weights = weights;
  model::NodeFdmModel current = std::move(initial);

  auto selection_loss = [&](const EpochLog& log) { return val.empty() ? log.train_loss : log.val_loss; };

  EpochLog first{0, evaluate_loss(current, train, weights), evaluate_loss(current, val, weights)};
  result.history.push_back(first);
  result.best = current;
  result.best_epoch = 0;
  double best_loss = selection_loss(first);
  if (!std::isfinite(first.train_loss)) {
    result.diverged = true;
    result.message = "initial training loss is not finite";
  }
  if (!out_dir.empty()) nn::save_checkpoint(out_dir / "best.json", checkpoint_of(current, weights, first));
  if (observer) observer(first, result);

  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Tape tape;
  std::vector<const data::Sequence*> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs && !result.diverged; ++epoch) {
    shuffle(order, rng);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - i);
      batch.clear();
      for (std::size_t k = 0; k < n; ++k) batch.push_back(&train[order[i + k]]);
      tape.clear();
      const nn::Var loss = model::batch_loss(tape, current, batch, weights);
      const double value = loss.value().values[0];
      if (!std::isfinite(value)) {
        result.diverged = true;
        result.message = fmt::format("training loss became non-finite at epoch {}", epoch);
        break;
      }
      tape.backward(loss);
      auto grads = tape.parameter_gradients(current.params);
      if (!finite(grads)) {
        result.diverged = true;
        result.message = fmt::format("gradient became non-finite at epoch {}", epoch);
        break;
      }
      if (config.gradient_clip > 0.0) {
        const double norm = nn::global_norm(grads);
        if (norm > config.gradient_clip) {
          const double s = config.gradient_clip / norm;
          for (auto& g : grads)
            for (double& x : g.values) x *= s;
        }
      }
      const nn::ParameterSet backup = current.params;
      nn::adamw_step(config.optimizer, current.params, grads, result.optimizer);
      bool ok = true;
      for (const auto& p : current.params) ok = ok && p.value.all_finite();
      if (!ok) {
        current.params = backup;
        result.diverged = true;
        result.message = fmt::format("parameters became non-finite at epoch {}", epoch);
        break;
      }
      sum += value * static_cast<double>(n);
      count += n;
    }
    if (result.diverged) break;
    EpochLog log{epoch, sum / static_cast<double>(count), evaluate_loss(current, val, weights)};
    if (!val.empty() && !std::isfinite(log.val_loss)) {
      result.diverged = true;
      result.message = fmt::format("validation loss became non-finite at epoch {}", epoch);
      break;
    }
    result.history.push_back(log);
    const double sel = selection_loss(log);
    if (sel < best_loss || !std::isfinite(best_loss)) {
      best_loss = sel;
      result.best = current;
      result.best_epoch = epoch;
      if (!out_dir.empty()) nn::save_checkpoint(out_dir / "best.json", checkpoint_of(current, weights, log));
    }
    if (observer) observer(log, result);
  }
  result.last = std::move(current);
  result.final_train_loss = evaluate_loss(result.last, train, weights);
  return result;
}

std::vector<data::Sequence> slice_all(std::span<const data::FlightSeries> flights, std::size_t length) {
  std::vector<data::Sequence> out;
  for (const auto& f : flights) {
    auto s = data::slice_sequences(f, length);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

TrainingResult train(const TrainingConfig& config, std::span<const data::FlightSeries> train_flights,
                     std::span<const data::FlightSeries> val_flights, const std::filesystem::path& out_dir,
                     const EpochObserver& observer) {
  config.validate();
  if (train_flights.empty()) throw std::invalid_argument("empty training split");
  const auto stats = data::compute_norm_stats(train_flights);
  auto model = model::make_model(stats, config.seed);
  const auto weights = model::LossWeights::from_stats(stats, config.weight_convention, config.supervise_distance);
  const auto train_windows_v = slice_all(train_flights, config.sequence_length);
  const auto val_windows_v = slice_all(val_flights, config.sequence_length);
  if (train_windows_v.empty()) throw std::invalid_argument("training flights are shorter than one window");
  return train_windows(std::move(model), train_windows_v, val_windows_v, weights, config, out_dir, observer);
}

std::string loss_csv(const std::vector<EpochLog>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& h : history) {
    out += fmt::format("{},{},{}\n", h.epoch, h.train_loss, std::isfinite(h.val_loss) ? fmt::format("{}", h.val_loss) : "");
  }
  return out;
}

void write_outputs(const std::filesystem::path& out_dir, const TrainingResult& result, const TrainingConfig& config) {
  std::filesystem::create_directories(out_dir);
  const EpochLog best_log = result.history.at(result.best_epoch);
  nn::save_checkpoint(out_dir / "best.json", checkpoint_of(result.best, result.weights, best_log));
  auto last = checkpoint_of(result.last, result.weights, result.history.back());
  last.optimizer = result.optimizer;
  nn::save_checkpoint(out_dir / "last.json", last);
  std::ofstream(out_dir / "loss.csv", std::ios::binary) << loss_csv(result.history);
  std::ofstream(out_dir / "training_config.json", std::ios::binary) << config.to_json_text();
}

}  // namespace nodefdm::train
