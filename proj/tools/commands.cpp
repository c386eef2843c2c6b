#include "commands.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "nodefdm/baseline.hpp"
#include "nodefdm/evaluation.hpp"
#include "nodefdm/flight_csv.hpp"
#include "nodefdm/node_fdm.hpp"
#include "nodefdm/performance.hpp"
#include "nodefdm/report.hpp"
#include "nodefdm/synthetic.hpp"

namespace nodefdm::cli {

using nlohmann::json;

namespace {

json parse_object(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  return j;
}

// Accepts both "batch_size" and "batch-size" spellings.
std::string normalize_key(std::string k) {
  for (char& c : k)
    if (c == '-') c = '_';
  return k;
}

template <typename Setters>
void apply_setters(const json& j, const Setters& setters) {
  for (const auto& [raw, value] : j.items()) {
    const auto key = normalize_key(raw);
    const auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument("unknown config key '" + raw + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw std::invalid_argument("config key '" + raw + "' has the wrong type: " + e.what());
    }
  }
}

using Setter = std::function<void(const json&)>;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void require_out(const fs::path& out) {
  if (out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(out);
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + " is required");
  if (!fs::is_regular_file(p)) throw std::invalid_argument(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (!p.empty() && !fs::is_directory(p)) throw std::invalid_argument(std::string(what) + " is not a directory: " + p.string());
}

std::string path_str(const fs::path& p) { return p.generic_string(); }

struct Prediction {
  std::string model;
  fs::path dir;
};

std::vector<Prediction> predictions(const fs::path& node, const fs::path& baseline) {
  std::vector<Prediction> out;
  if (!node.empty()) out.push_back({"node-fdm", node});
  if (!baseline.empty()) out.push_back({"baseline", baseline});
  if (out.empty()) throw std::invalid_argument("at least one of --node and --baseline is required");
  return out;
}

// Loads the predictions of every model for one reference flight, or nothing
// if any counterpart is missing or unreadable.
std::optional<std::vector<data::FlightSeries>> load_counterparts(const std::vector<Prediction>& preds,
                                                                 const data::FlightSeries& ref,
                                                                 std::vector<std::string>& warnings) {
  std::vector<data::FlightSeries> out;
  for (const auto& p : preds) {
    const fs::path file = p.dir / (ref.tag + ".csv");
    if (!fs::is_regular_file(file)) {
      warnings.push_back(fmt::format("{}: no {} prediction, flight skipped", ref.tag, p.model));
      return std::nullopt;
    }
    try {
      auto s = data::ingest_csv(file);
      if (s.records.size() != ref.records.size()) {
        warnings.push_back(fmt::format("{}: {} prediction has {} records, reference has {}, flight skipped", ref.tag,
                                       p.model, s.records.size(), ref.records.size()));
        return std::nullopt;
      }
      out.push_back(std::move(s));
    } catch (const data::DataError& e) {
      warnings.push_back(fmt::format("{}: unreadable {} prediction ({}), flight skipped", ref.tag, p.model, e.what()));
      return std::nullopt;
    }
  }
  return out;
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_config(const std::string& text, GenDataOptions& o) {
  const std::map<std::string, Setter> s = {
      {"train", [&](const json& v) { o.train = v.get<std::size_t>(); }},
      {"val", [&](const json& v) { o.val = v.get<std::size_t>(); }},
      {"test", [&](const json& v) { o.test = v.get<std::size_t>(); }},
      {"seed", [&](const json& v) { o.seed = v.get<std::uint64_t>(); }},
      {"performance", [&](const json& v) { o.performance = v.get<std::string>(); }},
      {"out", [&](const json& v) { o.out = v.get<std::string>(); }},
  };
  apply_setters(parse_object(text), s);
}

void apply_config(const std::string& text, TrainOptions& o) {
  json j = parse_object(text);
  if (j.contains("out")) {
    o.out = j["out"].get<std::string>();
    j.erase("out");
  }
  json normalized = json::object();
  for (const auto& [k, v] : j.items()) normalized[normalize_key(k)] = v;
  if (normalized.contains("lr")) {
    normalized["learning_rate"] = normalized["lr"];
    normalized.erase("lr");
  }
  o.config = train::TrainingConfig::from_json_text(normalized.dump(), o.config);
}

void apply_config(const std::string& text, SimulateOptions& o) {
  const std::map<std::string, Setter> s = {
      {"model", [&](const json& v) { o.model = v.get<std::string>(); }},
      {"manifest", [&](const json& v) { o.manifest = v.get<std::string>(); }},
      {"split", [&](const json& v) { o.split = v.get<std::string>(); }},
      {"checkpoint", [&](const json& v) { o.checkpoint = v.get<std::string>(); }},
      {"performance", [&](const json& v) { o.performance = v.get<std::string>(); }},
      {"perturb", [&](const json& v) { o.perturb = v.get<double>(); }},
      {"out", [&](const json& v) { o.out = v.get<std::string>(); }},
  };
  apply_setters(parse_object(text), s);
}

void apply_config(const std::string& text, EvaluateOptions& o) {
  const std::map<std::string, Setter> s = {
      {"manifest", [&](const json& v) { o.manifest = v.get<std::string>(); }},
      {"split", [&](const json& v) { o.split = v.get<std::string>(); }},
      {"node", [&](const json& v) { o.node = v.get<std::string>(); }},
      {"baseline", [&](const json& v) { o.baseline = v.get<std::string>(); }},
      {"literature", [&](const json& v) { o.literature = v.get<bool>(); }},
      {"out", [&](const json& v) { o.out = v.get<std::string>(); }},
  };
  apply_setters(parse_object(text), s);
}

void apply_config(const std::string& text, ExportPlotsOptions& o) {
  const std::map<std::string, Setter> s = {
      {"manifest", [&](const json& v) { o.manifest = v.get<std::string>(); }},
      {"split", [&](const json& v) { o.split = v.get<std::string>(); }},
      {"node", [&](const json& v) { o.node = v.get<std::string>(); }},
      {"baseline", [&](const json& v) { o.baseline = v.get<std::string>(); }},
      {"svg", [&](const json& v) { o.svg = v.get<bool>(); }},
      {"out", [&](const json& v) { o.out = v.get<std::string>(); }},
  };
  apply_setters(parse_object(text), s);
}

int cmd_gen_data(const GenDataOptions& o) {
  if (o.train == 0) throw std::invalid_argument("empty training split");
  if (!o.performance.empty()) require_file(o.performance, "performance config");
  require_out(o.out);
  const perf::PerformanceConfig cfg = o.performance.empty() ? perf::PerformanceConfig{} : perf::load(o.performance);
  synth::DatasetRequest req;
  req.train = o.train;
  req.val = o.val;
  req.test = o.test;
  req.seed = o.seed;
  write_text(o.out / "run_config.json",
             json{{"command", "gen-data"}, {"train", o.train}, {"val", o.val}, {"test", o.test}, {"seed", o.seed},
                  {"performance", path_str(o.performance)}}
                     .dump(2) +
                 "\n");
  const auto summary = synth::generate_dataset(cfg, req, o.out);
  for (const auto& msg : summary.infeasible) spdlog::warn("infeasible script replaced: {}", msg);
  fmt::print("train {} flights, val {} flights, test {} flights, {} airframes, {} infeasible scripts replaced\n",
             summary.manifest.train.size(), summary.manifest.val.size(), summary.manifest.test.size(),
             summary.airframes.size(), summary.infeasible_retries);
  return kExitOk;
}

int cmd_train(const TrainOptions& o) {
  o.config.validate();
  require_file(o.config.manifest, "--manifest");
  require_out(o.out);
  const auto manifest = data::load_manifest(o.config.manifest);
  const auto train_flights = data::load_split(manifest, "train");
  const auto val_flights = data::load_split(manifest, "val");
  spdlog::info("training on {} flights, validating on {}", train_flights.size(), val_flights.size());
  write_text(o.out / "training_config.json", o.config.to_json_text());
  const auto result = train::train(o.config, train_flights, val_flights, o.out,
                                   [](const train::EpochLog& log, const train::TrainingResult&) {
                                     spdlog::info("epoch {} train {:.6g} val {:.6g}", log.epoch, log.train_loss,
                                                  log.val_loss);
                                   });
  train::write_outputs(o.out, result, o.config);
  if (result.diverged) {
    spdlog::error("{}; last good parameters saved", result.message);
    fmt::print(stderr, "training diverged: {}\n", result.message);
    return kExitFlightFailures;
  }
  fmt::print("best epoch {} of {}, train loss {:.6g}, best {} loss {:.6g}\n", result.best_epoch,
             result.history.back().epoch, result.final_train_loss, val_flights.empty() ? "train" : "val",
             val_flights.empty() ? result.history[result.best_epoch].train_loss
                                 : result.history[result.best_epoch].val_loss);
  return kExitOk;
}

int cmd_simulate(const SimulateOptions& o) {
  if (o.model != "node-fdm" && o.model != "baseline") throw std::invalid_argument("--model must be node-fdm or baseline");
  require_file(o.manifest, "--manifest");
  fs::path performance = o.performance;
  if (o.model == "node-fdm") {
    require_file(o.checkpoint, "--checkpoint");
  } else {
    if (performance.empty()) performance = o.manifest.parent_path() / "performance.json";
    require_file(performance, "performance config");
    if (!(o.perturb >= 0.0 && o.perturb < 0.5)) throw std::invalid_argument("--perturb must lie in [0, 0.5)");
  }
  require_out(o.out);
  const auto manifest = data::load_manifest(o.manifest);
  const auto flights = data::load_split(manifest, o.split);
  write_text(o.out / "run_config.json",
             json{{"command", "simulate"},
                  {"model", o.model},
                  {"manifest", path_str(o.manifest)},
                  {"split", o.split},
                  {"checkpoint", path_str(o.checkpoint)},
                  {"performance", path_str(performance)},
                  {"perturb", o.perturb}}
                     .dump(2) +
                 "\n");

  json failures = json::array();
  std::size_t written = 0;
  if (o.model == "node-fdm") {
    const auto model = model::model_from_checkpoint(nn::load_checkpoint(o.checkpoint));
    for (const auto& ref : flights) {
      try {
        const auto r = model::rollout(model, ref.records.front().x, ref.records);
        data::FlightSeries pred;
        pred.tag = ref.tag;
        pred.dt = ref.dt;
        pred.records = ref.records;
        for (std::size_t k = 0; k < pred.records.size(); ++k) {
          pred.records[k].x = r.states[k];
          pred.records[k].e = r.outputs[k];
        }
        data::write_csv(pred, o.out / (ref.tag + ".csv"));
        ++written;
      } catch (const model::RolloutError& e) {
        spdlog::warn("{}: {}", ref.tag, e.what());
        failures.push_back({{"tag", ref.tag}, {"step", e.step()}, {"message", e.what()}});
      }
    }
  } else {
    const auto cfg = o.perturb > 0.0 ? perf::perturbed(perf::load(performance), o.perturb) : perf::load(performance);
    for (const auto& ref : flights) {
      const auto r = baseline::simulate_flight(ref, cfg);
      if (r.failure_index) {
        spdlog::warn("{}: baseline stopped at step {}", ref.tag, *r.failure_index);
        failures.push_back({{"tag", ref.tag}, {"step", *r.failure_index}, {"message", "baseline integration failed"}});
        continue;
      }
      auto pred = r.series;
      pred.tag = ref.tag;
      data::write_csv(pred, o.out / (ref.tag + ".csv"));
      ++written;
    }
  }
  write_text(o.out / "failures.json", failures.dump(2) + "\n");
  fmt::print("{}: {} flights simulated, {} failed\n", o.model, written, failures.size());
  for (const auto& f : failures) {
    fmt::print(stderr, "failed: {} at step {}\n", f["tag"].get<std::string>(), f["step"].get<std::size_t>());
  }
  return failures.empty() ? kExitOk : kExitFlightFailures;
}

int cmd_evaluate(const EvaluateOptions& o) {
  require_file(o.manifest, "--manifest");
  require_dir(o.node, "--node");
  require_dir(o.baseline, "--baseline");
  const auto preds = predictions(o.node, o.baseline);
  require_out(o.out);
  const auto manifest = data::load_manifest(o.manifest);
  const auto refs = data::load_split(manifest, o.split);
  write_text(o.out / "run_config.json", json{{"command", "evaluate"},
                                             {"manifest", path_str(o.manifest)},
                                             {"split", o.split},
                                             {"node", path_str(o.node)},
                                             {"baseline", path_str(o.baseline)},
                                             {"literature", o.literature}}
                                                .dump(2) +
                                            "\n");

  std::vector<std::string> warnings;
  std::vector<eval::PhaseMetricsBuilder> builders(preds.size());
  std::vector<std::vector<data::FlightSeries>> kept(preds.size());
  std::vector<const data::FlightSeries*> kept_refs;
  for (const auto& ref : refs) {
    auto series = load_counterparts(preds, ref, warnings);
    if (!series) continue;
    const auto labels = eval::label_phases(ref);
    for (std::size_t m = 0; m < preds.size(); ++m) {
      builders[m].add((*series)[m], ref, labels);
      kept[m].push_back(std::move((*series)[m]));
    }
    kept_refs.push_back(&ref);
  }
  for (const auto& w : warnings) spdlog::warn("{}", w);
  if (kept_refs.empty()) throw std::invalid_argument("no flights");

  eval::EvaluationReport report;
  for (std::size_t m = 0; m < preds.size(); ++m) {
    eval::ModelEvaluation me;
    me.model = preds[m].model;
    me.flights = kept_refs.size();
    me.points = builders[m].points();
    me.phases = builders[m].build();
    std::vector<eval::FlightPair> pairs;
    for (std::size_t i = 0; i < kept_refs.size(); ++i) pairs.push_back({&kept[m][i], kept_refs[i]});
    me.consumption = eval::consumption_metrics(pairs);
    report.models.push_back(std::move(me));
  }
  eval::TextOptions text;
  text.literature = o.literature;
  const std::string table = eval::render_text(report, text);
  write_text(o.out / "tables.txt", table);
  write_text(o.out / "metrics.json", eval::to_json_text(report));
  write_text(o.out / "metrics.csv", eval::to_csv(report));
  for (std::size_t i = 0; i < kept_refs.size(); ++i) {
    const data::FlightSeries* node = nullptr;
    const data::FlightSeries* base = nullptr;
    for (std::size_t m = 0; m < preds.size(); ++m) (preds[m].model == "node-fdm" ? node : base) = &kept[m][i];
    write_text(o.out / "plots" / (kept_refs[i]->tag + ".csv"), eval::plot_csv(*kept_refs[i], node, base));
  }
  fmt::print("{}", table);
  for (const auto& w : warnings) fmt::print(stderr, "skipped: {}\n", w);
  return warnings.empty() ? kExitOk : kExitFlightFailures;
}

int cmd_export_plots(const ExportPlotsOptions& o) {
  require_file(o.manifest, "--manifest");
  require_dir(o.node, "--node");
  require_dir(o.baseline, "--baseline");
  std::vector<Prediction> preds;
  if (!o.node.empty()) preds.push_back({"node-fdm", o.node});
  if (!o.baseline.empty()) preds.push_back({"baseline", o.baseline});
  require_out(o.out);
  const auto manifest = data::load_manifest(o.manifest);
  const auto refs = data::load_split(manifest, o.split);
  std::vector<std::string> warnings;
  std::size_t written = 0;
  for (const auto& ref : refs) {
    auto series = load_counterparts(preds, ref, warnings);
    if (!series) continue;
    const data::FlightSeries* node = nullptr;
    const data::FlightSeries* base = nullptr;
    for (std::size_t m = 0; m < preds.size(); ++m) (preds[m].model == "node-fdm" ? node : base) = &(*series)[m];
    write_text(o.out / (ref.tag + ".csv"), eval::plot_csv(ref, node, base));
    if (o.svg) write_text(o.out / (ref.tag + ".svg"), eval::plot_svg(ref, node, base));
    ++written;
  }
  for (const auto& w : warnings) spdlog::warn("{}", w);
  fmt::print("{} flights exported to {}\n", written, o.out.string());
  return warnings.empty() ? kExitOk : kExitFlightFailures;
}

}  // namespace nodefdm::cli
