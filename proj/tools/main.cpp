#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("nodefdm");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("NODEFDM_LOG_LEVEL")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("unknown NODEFDM_LOG_LEVEL '{}', keeping warn", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace nodefdm::cli;
  setup_logging();

  CLI::App app{"Neural-ODE flight dynamics: data generation, training, simulation and evaluation"};
  app.require_subcommand(1);
  std::string config;

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic flight dataset");
  gen_cmd->add_option("--train", gen.train, "Training flights");
  gen_cmd->add_option("--val", gen.val, "Validation flights");
  gen_cmd->add_option("--test", gen.test, "Test flights");
  gen_cmd->add_option("--seed", gen.seed, "Root seed");
  gen_cmd->add_option("--performance", gen.performance, "Performance model JSON (default: built-in)");
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--config", config, "JSON file whose keys override flags");

  TrainOptions tr;
  double lr = tr.config.optimizer.learning_rate;
  double wd = tr.config.optimizer.weight_decay;
  std::string convention = "inverse_variance";
  std::string manifest_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset manifest");
  train_cmd->add_option("--manifest", manifest_path, "Dataset manifest");
  train_cmd->add_option("--epochs", tr.config.epochs, "Epochs");
  train_cmd->add_option("--batch-size", tr.config.batch_size, "Windows per mini-batch");
  train_cmd->add_option("--seed", tr.config.seed, "Seed for initialization and shuffling");
  train_cmd->add_option("--lr", lr, "Learning rate");
  train_cmd->add_option("--weight-decay", wd, "Decoupled weight decay");
  train_cmd->add_option("--weight-convention", convention, "inverse_variance or inverse_std");
  train_cmd->add_flag("--supervise-distance", tr.config.supervise_distance, "Include along-track distance in the loss");
  train_cmd->add_option("--grad-clip", tr.config.gradient_clip, "Global gradient-norm clip (0 disables)");
  train_cmd->add_option("--out", tr.out, "Output directory");
  train_cmd->add_option("--config", config, "Training config JSON whose keys override flags");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Full-flight rollouts from the first recorded point");
  sim_cmd->add_option("--model", sim.model, "node-fdm or baseline")->check(CLI::IsMember({"node-fdm", "baseline"}));
  sim_cmd->add_option("--manifest", sim.manifest, "Dataset manifest");
  sim_cmd->add_option("--split", sim.split, "Split to simulate");
  sim_cmd->add_option("--checkpoint", sim.checkpoint, "Model checkpoint (node-fdm)");
  sim_cmd->add_option("--performance", sim.performance, "Performance model JSON (baseline)");
  sim_cmd->add_option("--perturb", sim.perturb, "Relative coefficient perturbation (baseline)");
  sim_cmd->add_option("--out", sim.out, "Output directory");
  sim_cmd->add_option("--config", config, "JSON file whose keys override flags");

  EvaluateOptions ev;
  bool no_literature = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-phase and consumption error tables");
  eval_cmd->add_option("--manifest", ev.manifest, "Dataset manifest");
  eval_cmd->add_option("--split", ev.split, "Reference split");
  eval_cmd->add_option("--node", ev.node, "Directory of node-fdm predictions");
  eval_cmd->add_option("--baseline", ev.baseline, "Directory of baseline predictions");
  eval_cmd->add_flag("--no-literature", no_literature, "Omit published reference values");
  eval_cmd->add_option("--out", ev.out, "Output directory");
  eval_cmd->add_option("--config", config, "JSON file whose keys override flags");

  ExportPlotsOptions ep;
  auto* plot_cmd = app.add_subcommand("export-plots", "Per-flight comparison CSV and optional SVG");
  plot_cmd->add_option("--manifest", ep.manifest, "Dataset manifest");
  plot_cmd->add_option("--split", ep.split, "Reference split");
  plot_cmd->add_option("--node", ep.node, "Directory of node-fdm predictions");
  plot_cmd->add_option("--baseline", ep.baseline, "Directory of baseline predictions");
  plot_cmd->add_flag("--svg", ep.svg, "Also write SVG charts");
  plot_cmd->add_option("--out", ep.out, "Output directory");
  plot_cmd->add_option("--config", config, "JSON file whose keys override flags");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string overrides = config.empty() ? std::string() : read_text(config);
    if (gen_cmd->parsed()) {
      if (!overrides.empty()) apply_config(overrides, gen);
      return cmd_gen_data(gen);
    }
    if (train_cmd->parsed()) {
      tr.config.optimizer.learning_rate = lr;
      tr.config.optimizer.weight_decay = wd;
      tr.config.manifest = manifest_path;
      if (convention == "inverse_variance") {
        tr.config.weight_convention = nodefdm::model::WeightConvention::inverse_variance;
      } else if (convention == "inverse_std") {
        tr.config.weight_convention = nodefdm::model::WeightConvention::inverse_std;
      } else {
        throw std::invalid_argument("--weight-convention must be inverse_variance or inverse_std");
      }
      if (!overrides.empty()) apply_config(overrides, tr);
      return cmd_train(tr);
    }
    if (sim_cmd->parsed()) {
      if (!overrides.empty()) apply_config(overrides, sim);
      return cmd_simulate(sim);
    }
    if (eval_cmd->parsed()) {
      ev.literature = !no_literature;
      if (!overrides.empty()) apply_config(overrides, ev);
      return cmd_evaluate(ev);
    }
    if (plot_cmd->parsed()) {
      if (!overrides.empty()) apply_config(overrides, ep);
      return cmd_export_plots(ep);
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}
