#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "nodefdm/nn/adamw.hpp"
#include "nodefdm/nn/checkpoint.hpp"
#include "nodefdm/nn/structured_layer.hpp"
#include "nodefdm/nn/tape.hpp"
#include "nodefdm/node_fdm.hpp"
#include "support.hpp"

using namespace nodefdm::nn;
namespace data = nodefdm::data;

namespace {

std::size_t find_param(const ParameterSet& params, const std::string& name) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == name) return i;
  }
  FAIL("no parameter " << name);
  return 0;
}

/// Five samples of the layer inputs taken from recorded flights.
Tensor2 layer_batch(const StructuredLayerSpec& spec) {
  const auto& flight = testing::sample_flights()[1];
  Tensor2 x(5, spec.inputs.size());
  for (std::size_t r = 0; r < 5; ++r) {
    const auto& rec = flight.records[17 + 53 * r];
    for (std::size_t c = 0; c < spec.inputs.size(); ++c) {
      x(r, c) = data::feature_value(rec, *data::feature_from_name(spec.inputs[c]));
    }
  }
  return x;
}

double layer_loss(const StructuredLayerSpec& spec, const ParameterSet& params, std::size_t offset, const Tensor2& x,
                  std::vector<Tensor2>* grads) {
  Tape tape;
  const auto heads = forward(tape, spec, params, offset, tape.constant(x));
  Var total = sum(square(heads[0]));
  for (std::size_t k = 1; k < heads.size(); ++k) total = total + sum(square(heads[k]));
  if (grads) {
    tape.backward(total);
    *grads = tape.parameter_gradients(params);
  }
  return total.value()(0, 0);
}

}  // namespace

TEST_SUITE("nn_engine") {

TEST_CASE("gradient of a squared parameter") {
  ParameterSet params{{"w", Tensor2::scalar(3.0)}};
  Tape tape;
  const Var w = tape.parameter(params, 0);
  const Var loss = w * w;
  tape.backward(loss);
  CHECK(tape.parameter_gradient(0)(0, 0) == 6.0);
  CHECK(tape.parameter(params, 0).id == w.id);
}

TEST_CASE("constant paths carry no gradient") {
  ParameterSet params{{"w", Tensor2::scalar(2.0)}, {"unused", Tensor2::scalar(1.0)}};
  Tape tape;
  const Var c = tape.constant(Tensor2::scalar(5.0));
  const Var w = tape.parameter(params, 0);
  const Var loss = c * c + 3.0 * w;
  tape.backward(loss);
  CHECK_THROWS(tape.grad(c));
  const auto grads = tape.parameter_gradients(params);
  CHECK(grads[0](0, 0) == 3.0);
  CHECK(grads[1](0, 0) == 0.0);
  CHECK_THROWS(tape.parameter_gradient(1));
}

TEST_CASE("backward requires a scalar") {
  Tape tape;
  const Var v = tape.constant(Tensor2(2, 1, 1.0));
  CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);
}

TEST_CASE("elementary operations match finite differences") {
  ParameterSet params{{"a", Tensor2(2, 3, std::vector<double>{0.3, -0.7, 1.1, 0.05, -1.4, 0.6})},
                      {"b", Tensor2(3, 2, std::vector<double>{0.2, -0.5, 0.9, 0.4, -0.3, 0.8})},
                      {"r", Tensor2(1, 2, std::vector<double>{0.1, -0.2})}};
  const Tensor2 target(2, 2, std::vector<double>{0.5, -0.5, 1.0, 0.0});
  const std::vector<double> w{2.0, 0.5};
  auto loss_of = [&](Tape& tape) {
    const Var a = tape.parameter(params, 0);
    const Var b = tape.parameter(params, 1);
    const Var r = tape.parameter(params, 2);
    const Var h = matmul(softplus(a, 3.0), b) + r;
    const Var g = sin(h) * relu(h - tape.constant(Tensor2(2, 2, -0.4)));
    const std::vector<double> s{1.5, -2.0}, t{0.1, 0.2};
    const std::vector<Var> parts{column(g, 1), affine_columns(g, s, t)};
    const Var cat = concat_cols(parts);
    const Var e = weighted_squared_error(column(cat, 0) * 1.0 + column(cat, 1), Tensor2(2, 1, 0.3), std::vector<double>{1.0});
    return e + weighted_squared_error(g, target, w) + sum(mul_constant(square(h), target));
  };
  Tape tape;
  const Var loss = loss_of(tape);
  tape.backward(loss);
  const auto grads = tape.parameter_gradients(params);
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].value.values.size(); ++i) {
      const double orig = params[p].value.values[i];
      const double step = 1e-6;
      params[p].value.values[i] = orig + step;
      Tape tp;
      const double up = loss_of(tp).value()(0, 0);
      params[p].value.values[i] = orig - step;
      Tape tm;
      const double down = loss_of(tm).value()(0, 0);
      params[p].value.values[i] = orig;
      const double fd = (up - down) / (2 * step);
      CHECK(std::abs(fd - grads[p].values[i]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("model layers pass a finite-difference gradient check") {
  auto model = testing::random_model(11);
  const std::vector<std::pair<const StructuredLayerSpec*, std::size_t>> layers{
      {&model.angle, model.angle_offset()},
      {&model.engine, model.engine_offset()},
      {&model.derivative, model.derivative_offset()}};
  std::mt19937_64 rng(5);
  for (const auto& [spec, offset] : layers) {
    CAPTURE(spec->name);
    const Tensor2 x = layer_batch(*spec);
    std::vector<Tensor2> grads;
    layer_loss(*spec, model.params, offset, x, &grads);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t p = offset + rng() % spec->tensor_count();
      auto& values = model.params[p].value.values;
      const std::size_t i = rng() % values.size();
      const double orig = values[i];
      const double step = 1e-5;
      values[i] = orig + step;
      const double up = layer_loss(*spec, model.params, offset, x, nullptr);
      values[i] = orig - step;
      const double down = layer_loss(*spec, model.params, offset, x, nullptr);
      values[i] = orig;
      const double fd = (up - down) / (2 * step);
      const double g = grads[p].values[i];
      CAPTURE(model.params[p].name);
      CHECK(std::abs(fd - g) <= 1e-5 * std::max({std::abs(fd), std::abs(g), 1e-3}));
    }
  }
}

TEST_CASE("zero weights produce the head mean") {
  auto model = testing::random_model(3);
  for (auto& p : model.params) std::fill(p.value.values.begin(), p.value.values.end(), 0.0);
  const Tensor2 x = layer_batch(model.angle);
  Tape tape;
  const auto heads = forward(tape, model.angle, model.params, 0, tape.constant(x));
  for (std::size_t k = 0; k < heads.size(); ++k) {
    for (double v : heads[k].value().values) CHECK(v == doctest::Approx(model.angle.heads[k].stats[0].mean));
  }
}

TEST_CASE("hand-built 1-1-1 network") {
  StructuredLayerSpec spec;
  spec.name = "tiny";
  spec.inputs = {"h"};
  spec.input_stats = {{10.0, 2.0}};
  spec.hidden = 1;
  spec.depth = 1;
  spec.heads = {{"out", HeadKind::continuous, {{100.0, 4.0}}}};
  spec.validate();
  auto params = init_params(spec, 1);
  CHECK(spec.parameter_count() == 4);
  params[find_param(params, "tiny.hidden0.weight")].value = Tensor2::scalar(2.0);
  params[find_param(params, "tiny.hidden0.bias")].value = Tensor2::scalar(-1.0);
  params[find_param(params, "tiny.out.weight")].value = Tensor2::scalar(3.0);
  params[find_param(params, "tiny.out.bias")].value = Tensor2::scalar(0.5);
  // z = (12 - 10) / 2 = 1; relu(2 - 1) = 1; 3 + 0.5 = 3.5; 3.5 * 4 + 100
  CHECK(evaluate(spec, params, {{"h", 12.0}}).at("out")[0] == doctest::Approx(114.0));
  // z = 0 gives relu(-1) = 0, so only the head bias survives
  CHECK(evaluate(spec, params, {{"h", 10.0}}).at("out")[0] == doctest::Approx(102.0));
  CHECK_THROWS_AS(evaluate(spec, params, {{"v_tas", 1.0}}), std::invalid_argument);

  spec.heads[0].kind = HeadKind::binary;
  CHECK(evaluate(spec, params, {{"h", 12.0}}).at("out")[0] == doctest::Approx(3.5));
}

TEST_CASE("initialisation statistics") {
  StructuredLayerSpec spec;
  spec.name = "wide";
  for (std::size_t i = 0; i < 24; ++i) spec.inputs.emplace_back(data::feature_name(static_cast<data::Feature>(i)));
  spec.input_stats.assign(24, {0.0, 1.0});
  spec.hidden = 24;
  spec.depth = 20;
  spec.heads = {{"y", HeadKind::continuous, {{0.0, 1.0}}}};
  const auto params = init_params(spec, 42);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    for (double w : params[2 * l].value.values) {
      sum += w;
      sq += w * w;
      ++n;
    }
    for (double b : params[2 * l + 1].value.values) CHECK(b == 0.0);
  }
  CHECK(n >= 10000);
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  CHECK(std::abs(var - 2.0 / 24.0) <= 0.2 * 2.0 / 24.0);
  const double head_bound = 1.0 / std::sqrt(24.0);
  for (double w : params[2 * spec.depth].value.values) CHECK(std::abs(w) <= head_bound);

  const auto again = init_params(spec, 42);
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(params[i].value == again[i].value);
  CHECK_FALSE(init_params(spec, 43)[0].value == params[0].value);
}

TEST_CASE("adamw update rules") {
  AdamWConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.weight_decay = 0.0;
  ParameterSet params{{"w", Tensor2(1, 3, std::vector<double>{0.5, -1.0, 2.0})}};

  AdamWState state;
  const std::vector<Tensor2> zero{Tensor2(1, 3, 0.0)};
  adamw_step(cfg, params, zero, state);
  CHECK(params[0].value.values == std::vector<double>{0.5, -1.0, 2.0});

  AdamWState fresh;
  ParameterSet one{{"w", Tensor2(1, 3, std::vector<double>{0.5, -1.0, 2.0})}};
  adamw_step(cfg, one, std::vector<Tensor2>{Tensor2(1, 3, 1.0)}, fresh);
  CHECK(fresh.step == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(one[0].value.values[i] - (params[0].value.values[i] - cfg.learning_rate)) <=
          1e-6 * cfg.learning_rate);
  }

  cfg.weight_decay = 0.1;
  ParameterSet decay{{"w", Tensor2(1, 3, std::vector<double>{0.5, -1.0, 2.0})}};
  AdamWState ds;
  adamw_step(cfg, decay, zero, ds);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(decay[0].value.values[i] ==
          doctest::Approx(params[0].value.values[i] * (1.0 - cfg.learning_rate * cfg.weight_decay)).epsilon(1e-15));
  }

  CHECK(global_norm(std::vector<Tensor2>{Tensor2(1, 2, std::vector<double>{3.0, 0.0}), Tensor2::scalar(4.0)}) ==
        doctest::Approx(5.0));
  AdamWConfig bad;
  bad.learning_rate = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("checkpoint round trip") {
  auto model = testing::random_model(9);
  const auto weights = nodefdm::model::LossWeights::from_stats(model.stats);
  auto ckpt = nodefdm::model::to_checkpoint(model, weights);
  AdamWState state;
  state.step = 7;
  for (const auto& p : model.params) {
    state.m.push_back(Tensor2(p.value.rows, p.value.cols, 0.25));
    state.v.push_back(Tensor2(p.value.rows, p.value.cols, 1e-7));
  }
  ckpt.optimizer = state;
  ckpt.metadata["epoch"] = 12;

  testing::TempDir dir;
  save_checkpoint(dir / "model.json", ckpt);
  const auto back = load_checkpoint(dir / "model.json");
  CHECK(back.stats == ckpt.stats);
  REQUIRE(back.params.size() == ckpt.params.size());
  for (std::size_t i = 0; i < back.params.size(); ++i) {
    CHECK(back.params[i].name == ckpt.params[i].name);
    CHECK(back.params[i].value == ckpt.params[i].value);
  }
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step == 7);
  CHECK(back.optimizer->v.back() == state.v.back());
  CHECK(back.metadata.at("epoch") == 12);
  CHECK(back.loss_weights == ckpt.loss_weights);
  CHECK(to_json_text(back) == to_json_text(ckpt));

  const auto restored = nodefdm::model::model_from_checkpoint(back);
  const auto& rec = testing::sample_flights()[0].records[40];
  const auto a = nodefdm::model::step_derivative(model, rec.x, rec.u, rec.e0);
  const auto b = nodefdm::model::step_derivative(restored, rec.x, rec.u, rec.e0);
  CHECK(a.dx.dv_tas == b.dx.dv_tas);
  CHECK(a.e.fuel_flow == b.e.fuel_flow);
}

TEST_CASE("checkpoint with a foreign spec hash is rejected") {
  const auto model = testing::random_model(2);
  auto text = to_json_text(nodefdm::model::to_checkpoint(model, nodefdm::model::LossWeights::from_stats(model.stats)));
  const auto hash = spec_hash(std::vector<StructuredLayerSpec>{model.angle, model.engine, model.derivative});
  CHECK(hash.size() == 16);
  const auto pos = text.find(hash);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, hash.size(), "0123456789abcdef");
  try {
    from_json_text(text);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("spec hash") != std::string::npos);
  }
  CHECK_THROWS_AS(from_json_text("{\"format\":\"other\"}"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.json"), CheckpointError);
}

}
