#include <filesystem>
#include <string>
#include <vector>

#include "commands.hpp"
#include "doctest.h"
#include "json.hpp"
#include "nodefdm/flight_csv.hpp"
#include "support.hpp"

using namespace nodefdm::cli;
namespace data = nodefdm::data;
using nlohmann::json;

namespace {

std::string first_line(const fs::path& p) {
  const auto text = testing::slurp(p);
  return text.substr(0, text.find('\n'));
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::vector<fs::path> csv_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Small dataset shared by the command tests.
const fs::path& small_dataset() {
  static testing::TempDir dir;
  static const bool made = [] {
    GenDataOptions o;
    o.train = 3;
    o.val = 1;
    o.test = 2;
    o.seed = 3;
    o.out = dir.path();
    return cmd_gen_data(o) == kExitOk;
  }();
  REQUIRE(made);
  return dir.path();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data writes a reproducible dataset") {
  testing::TempDir a, b;
  GenDataOptions o;
  o.seed = 7;
  o.out = a.path();
  REQUIRE(cmd_gen_data(o) == kExitOk);
  o.out = b.path();
  REQUIRE(cmd_gen_data(o) == kExitOk);
  const auto files = csv_files(a.path());
  CHECK(files.size() == 14);
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(fs::exists(a / "run_config.json"));
  REQUIRE(files == csv_files(b.path()));
  for (const auto& f : files) CHECK(testing::slurp(a.path() / f) == testing::slurp(b.path() / f));
  CHECK(testing::slurp(a / "manifest.json") == testing::slurp(b / "manifest.json"));
  data::check_disjoint_splits(data::load_manifest(a / "manifest.json"));
}

TEST_CASE("gen-data rejects an empty training split") {
  testing::TempDir dir;
  GenDataOptions o;
  o.train = 0;
  o.out = dir.path();
  CHECK_THROWS_WITH(cmd_gen_data(o), doctest::Contains("empty training split"));
}

TEST_CASE("config files override options and reject unknown keys") {
  GenDataOptions g;
  apply_config(R"({"train": 4, "val": 1, "seed": 9})", g);
  CHECK(g.train == 4);
  CHECK(g.val == 1);
  CHECK(g.seed == 9);
  CHECK_THROWS(apply_config(R"({"trian": 4})", g));

  TrainOptions t;
  apply_config(R"({"epochs": 5, "batch-size": 8, "lr": 0.002, "weight_convention": "inverse_std"})", t);
  CHECK(t.config.epochs == 5);
  CHECK(t.config.batch_size == 8);
  CHECK(t.config.optimizer.learning_rate == 0.002);
  CHECK(t.config.weight_convention == nodefdm::model::WeightConvention::inverse_std);

  SimulateOptions s;
  apply_config(R"({"model": "baseline", "perturb": 0.03})", s);
  CHECK(s.model == "baseline");
  CHECK(s.perturb == 0.03);
}

TEST_CASE("train writes checkpoints and one loss row per epoch") {
  const auto& ds = small_dataset();
  for (std::size_t epochs : {0u, 2u}) {
    testing::TempDir out;
    TrainOptions o;
    o.config.manifest = (ds / "manifest.json").string();
    o.config.epochs = epochs;
    o.config.sequence_length = 30;
    o.out = out.path();
    REQUIRE(cmd_train(o) == kExitOk);
    const auto csv = testing::slurp(out / "loss.csv");
    CHECK(first_line(out / "loss.csv") == "epoch,train_loss,val_loss");
    CHECK(line_count(csv) == epochs + 2);
    CHECK(fs::exists(out / "best.json"));
    CHECK(fs::exists(out / "last.json"));
    CHECK(fs::exists(out / "training_config.json"));
    const auto last = json::parse(testing::slurp(out / "last.json"));
    CHECK(last.contains("optimizer"));
  }
}

TEST_CASE("simulate writes one schema for both models") {
  const auto& ds = small_dataset();
  testing::TempDir train_out, node_out, base_out;
  TrainOptions t;
  t.config.manifest = (ds / "manifest.json").string();
  t.config.epochs = 0;
  t.out = train_out.path();
  REQUIRE(cmd_train(t) == kExitOk);

  SimulateOptions s;
  s.manifest = ds / "manifest.json";
  s.model = "baseline";
  s.out = base_out.path();
  CHECK(cmd_simulate(s) == kExitOk);
  const auto base_files = csv_files(base_out.path());
  REQUIRE(base_files.size() == 2);
  std::string header;
  for (std::size_t c = 0; c < data::kColumnCount; ++c) {
    if (c) header += ',';
    header += std::string(data::column_name(static_cast<data::Column>(c)));
  }
  CHECK(first_line(base_out.path() / base_files[0]) == header);
  CHECK(json::parse(testing::slurp(base_out / "failures.json")).empty());

  s.model = "node-fdm";
  s.checkpoint = train_out / "best.json";
  s.out = node_out.path();
  const int code = cmd_simulate(s);
  const auto failures = json::parse(testing::slurp(node_out / "failures.json"));
  const auto node_files = csv_files(node_out.path());
  CHECK(node_files.size() + failures.size() == 2);
  CHECK(code == (failures.empty() ? kExitOk : kExitFlightFailures));
  for (const auto& f : node_files) CHECK(first_line(node_out.path() / f) == header);
  for (const auto& f : failures) {
    CHECK(f.contains("tag"));
    CHECK(f.contains("step"));
    CHECK(f.contains("message"));
  }

  s.model = "bada";
  CHECK_THROWS_AS(cmd_simulate(s), std::invalid_argument);
}

TEST_CASE("evaluating the reference against itself gives zero error") {
  const auto& ds = small_dataset();
  testing::TempDir out;
  EvaluateOptions o;
  o.manifest = ds / "manifest.json";
  o.node = ds / "test";
  o.baseline = ds / "test";
  o.out = out.path();
  CHECK(cmd_evaluate(o) == kExitOk);
  const auto report = json::parse(testing::slurp(out / "metrics.json"));
  REQUIRE(report.at("models").size() == 2);
  for (const auto& m : report.at("models")) {
    CHECK(m.at("flights") == 2);
    for (const auto& row : m.at("phases")) {
      CHECK(row.at("mae").at("mean").get<double>() == 0.0);
      CHECK(row.at("me").at("mean").get<double>() == 0.0);
    }
    CHECK(m.at("consumption").at("mae").at("mean").get<double>() == 0.0);
  }
  CHECK(fs::exists(out / "tables.txt"));
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(csv_files(out / "plots").size() == 2);

  testing::TempDir plots;
  ExportPlotsOptions p;
  p.manifest = o.manifest;
  p.node = o.node;
  p.baseline = o.baseline;
  p.svg = true;
  p.out = plots.path();
  CHECK(cmd_export_plots(p) == kExitOk);
  CHECK(csv_files(plots.path()).size() == 2);
}

TEST_CASE("evaluate skips flights without predictions") {
  const auto& ds = small_dataset();
  testing::TempDir partial, out;
  const auto files = csv_files(ds / "test");
  fs::copy_file(ds / "test" / files[0], partial.path() / files[0].filename());
  EvaluateOptions o;
  o.manifest = ds / "manifest.json";
  o.node = partial.path();
  o.baseline = ds / "test";
  o.out = out.path();
  CHECK(cmd_evaluate(o) == kExitFlightFailures);
  const auto report = json::parse(testing::slurp(out / "metrics.json"));
  CHECK(report.at("models")[0].at("flights") == 1);
}

}
