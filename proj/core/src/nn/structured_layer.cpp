#include "nodefdm/nn/structured_layer.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace nodefdm::nn {

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor2 uniform(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double bound) {
  Tensor2 t(rows, cols);
  for (double& x : t.values) x = (2.0 * unit_uniform(rng) - 1.0) * bound;
  return t;
}

}  // namespace

void StructuredLayerSpec::validate() const {
  const std::string where = "layer '" + name + "': ";
  if (inputs.empty()) throw std::invalid_argument(where + "no inputs");
  if (input_stats.size() != inputs.size()) throw std::invalid_argument(where + "one normalization entry per input required");
  if (hidden == 0 || depth == 0) throw std::invalid_argument(where + "hidden width and depth must be positive");
  if (heads.empty()) throw std::invalid_argument(where + "no heads");
  std::set<std::string> seen;
  for (const auto& in : inputs)
    if (!seen.insert(in).second) throw std::invalid_argument(where + "duplicate input '" + in + "'");
  for (const auto& s : input_stats)
    if (!(s.std > 0.0) || !std::isfinite(s.mean)) throw std::invalid_argument(where + "input scale must be positive");
  seen.clear();
  for (const auto& h : heads) {
    if (!seen.insert(h.name).second) throw std::invalid_argument(where + "duplicate head '" + h.name + "'");
    if (h.dim() == 0) throw std::invalid_argument(where + "head '" + h.name + "' has no outputs");
    if (h.kind == HeadKind::continuous)
      for (const auto& s : h.stats)
        if (!(s.std > 0.0)) throw std::invalid_argument(where + "head '" + h.name + "' scale must be positive");
  }
}

std::size_t StructuredLayerSpec::parameter_count() const {
  std::size_t n = (inputs.size() + 1) * hidden + (depth - 1) * (hidden + 1) * hidden;
  for (const auto& h : heads) n += (hidden + 1) * h.dim();
  return n;
}

ParameterSet init_params(const StructuredLayerSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ParameterSet out;
  std::size_t fan_in = spec.inputs.size();
  for (std::size_t l = 0; l < spec.depth; ++l) {
    out.push_back({spec.name + ".hidden" + std::to_string(l) + ".weight",
                   uniform(rng, fan_in, spec.hidden, std::sqrt(6.0 / static_cast<double>(fan_in)))});
    out.push_back({spec.name + ".hidden" + std::to_string(l) + ".bias", Tensor2(1, spec.hidden)});
    fan_in = spec.hidden;
  }
  for (const auto& h : spec.heads) {
    out.push_back({spec.name + "." + h.name + ".weight",
                   uniform(rng, spec.hidden, h.dim(), 1.0 / std::sqrt(static_cast<double>(spec.hidden)))});
    out.push_back({spec.name + "." + h.name + ".bias", Tensor2(1, h.dim())});
  }
  return out;
}

void check_params(const StructuredLayerSpec& spec, const ParameterSet& params, std::size_t offset) {
  if (params.size() < offset + spec.tensor_count()) {
    throw std::invalid_argument("layer '" + spec.name + "': parameter set too small");
  }
  auto expect = [&](std::size_t i, std::size_t r, std::size_t c) {
    const Tensor2& t = params[offset + i].value;
    if (t.rows != r || t.cols != c) {
      throw std::invalid_argument("layer '" + spec.name + "': parameter '" + params[offset + i].name + "' has shape " +
                                  shape_string(t) + ", expected [" + std::to_string(r) + "x" + std::to_string(c) + "]");
    }
  };
  std::size_t fan_in = spec.inputs.size();
  std::size_t i = 0;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    expect(i++, fan_in, spec.hidden);
    expect(i++, 1, spec.hidden);
    fan_in = spec.hidden;
  }
  for (const auto& h : spec.heads) {
    expect(i++, spec.hidden, h.dim());
    expect(i++, 1, h.dim());
  }
}

std::vector<Var> forward(Tape& tape, const StructuredLayerSpec& spec, const ParameterSet& params, std::size_t offset,
                         Var x) {
  if (x.cols() != spec.inputs.size()) {
    throw std::invalid_argument("layer '" + spec.name + "': expected " + std::to_string(spec.inputs.size()) +
                                " input columns, got " + std::to_string(x.cols()));
  }
  std::vector<double> scale(spec.inputs.size()), shift(spec.inputs.size());
  for (std::size_t c = 0; c < spec.inputs.size(); ++c) {
    scale[c] = 1.0 / spec.input_stats[c].std;
    shift[c] = -spec.input_stats[c].mean / spec.input_stats[c].std;
  }
  Var h = affine_columns(x, scale, shift);
  std::size_t i = offset;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    h = relu(matmul(h, tape.parameter(params, i)) + tape.parameter(params, i + 1));
    i += 2;
  }
  std::vector<Var> out;
  out.reserve(spec.heads.size());
  for (const auto& head : spec.heads) {
    Var y = matmul(h, tape.parameter(params, i)) + tape.parameter(params, i + 1);
    i += 2;
    if (head.kind == HeadKind::continuous) {
      std::vector<double> s(head.dim()), t(head.dim());
      for (std::size_t k = 0; k < head.dim(); ++k) {
        s[k] = head.stats[k].std;
        t[k] = head.stats[k].mean;
      }
      y = affine_columns(y, s, t);
    }
    out.push_back(y);
  }
  return out;
}

std::map<std::string, std::vector<double>> evaluate(const StructuredLayerSpec& spec, const ParameterSet& params,
                                                    const std::map<std::string, double>& inputs) {
  spec.validate();
  check_params(spec, params);
  Tensor2 x(1, spec.inputs.size());
  for (std::size_t c = 0; c < spec.inputs.size(); ++c) {
    auto it = inputs.find(spec.inputs[c]);
    if (it == inputs.end()) throw std::invalid_argument("layer '" + spec.name + "': missing input '" + spec.inputs[c] + "'");
    x.values[c] = it->second;
  }
  Tape tape;
  auto heads = forward(tape, spec, params, 0, tape.constant(std::move(x)));
  std::map<std::string, std::vector<double>> out;
  for (std::size_t k = 0; k < heads.size(); ++k) out[spec.heads[k].name] = heads[k].value().values;
  return out;
}

}  // namespace nodefdm::nn
