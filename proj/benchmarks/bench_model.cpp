#include <benchmark/benchmark.h>

#include <vector>

#include "nodefdm/baseline.hpp"
#include "nodefdm/node_fdm.hpp"
#include "nodefdm/synthetic.hpp"
#include "nodefdm/trainer.hpp"

namespace {

namespace data = nodefdm::data;
namespace model = nodefdm::model;
namespace nn = nodefdm::nn;

struct Fixture {
  std::vector<data::FlightSeries> flights;
  model::NodeFdmModel m;
  model::LossWeights weights;
  std::vector<data::Sequence> windows;

  Fixture() {
    for (std::uint64_t seed : {101u, 102u, 103u}) {
      flights.push_back(nodefdm::synth::generate_flight({}, nodefdm::synth::random_script(seed)).series);
    }
    const auto stats = data::compute_norm_stats(flights);
    m = model::make_model(stats, 1);
    weights = model::LossWeights::from_stats(stats);
    windows = nodefdm::train::slice_all(flights, data::kSequenceLength);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_StepDerivative(benchmark::State& state) {
  const auto& f = fixture();
  const auto& r = f.flights[0].records[f.flights[0].records.size() / 2];
  for (auto _ : state) benchmark::DoNotOptimize(model::step_derivative(f.m, r.x, r.u, r.e0));
}
BENCHMARK(BM_StepDerivative);

void BM_BatchLossForwardBackward(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<const data::Sequence*> batch;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
    batch.push_back(&f.windows[i % f.windows.size()]);
  }
  for (auto _ : state) {
    nn::Tape tape;
    const auto loss = model::batch_loss(tape, f.m, batch, f.weights);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.parameter_gradients(f.m.params));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchLossForwardBackward)->Arg(1)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_NodeRollout(benchmark::State& state) {
  const auto& f = fixture();
  const auto& w = f.windows[f.windows.size() / 2];
  for (auto _ : state) benchmark::DoNotOptimize(model::rollout(f.m, w.records.front().x, w.records));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.records.size()));
}
BENCHMARK(BM_NodeRollout);

void BM_BaselineFlight(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(nodefdm::baseline::simulate_flight(f.flights[0], {}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.flights[0].records.size()));
}
BENCHMARK(BM_BaselineFlight)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
