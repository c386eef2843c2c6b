#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nodefdm/nn/tensor.hpp"

namespace nodefdm::nn {

struct Parameter {
  std::string name;
  Tensor2 value;
};

using ParameterSet = std::vector<Parameter>;

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor2& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

/// Reverse-mode recording of dense matrix operations. Nodes are appended in
/// evaluation order, so the node list is a topological order by construction;
/// backward() walks it once in reverse.
class Tape {
 public:
  enum class Op : std::uint8_t {
    constant,
    parameter,
    add,             // same shape, or rhs 1xC broadcast over rows
    sub,
    mul,             // elementwise
    scale,           // a * c
    add_constant,    // a + C (constant tensor, same shape)
    mul_constant,    // a .* C
    affine_columns,  // a(r,c) * s(c) + t(c)
    matmul,
    relu,
    softplus,        // log(1 + exp(beta a)) / beta
    sin,
    square,
    concat_cols,
    column,
    sum,
    elementwise2,    // caller-supplied value and partials in both inputs
    weighted_sq_err, // sum_rc w(c) (a - T)^2
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  /// Leaf for parameter `index` of `params`; repeated requests return the same node.
  Var parameter(const ParameterSet& params, std::size_t index);

  const Tensor2& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() target with respect to `v`.
  const Tensor2& grad(Var v) const;

  /// Reverse sweep from a 1x1 node. Throws std::invalid_argument otherwise.
  void backward(Var loss);

  /// Gradients for every parameter of `params` (zero where unused on this tape).
  std::vector<Tensor2> parameter_gradients(const ParameterSet& params) const;
  /// Gradient of a single parameter; throws if the parameter never entered the tape.
  const Tensor2& parameter_gradient(std::size_t index) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Node constructors used by the free functions below.
  Var push(Op op, Tensor2 value, std::uint32_t a = kNone, std::uint32_t b = kNone);
  struct Node;
  Node& node(Var v) { return nodes_[v.id]; }

  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;

  struct Node {
    Op op = Op::constant;
    std::uint32_t a = kNone;
    std::uint32_t b = kNone;
    bool requires_grad = false;
    double c = 0.0;
    std::size_t index = 0;
    Tensor2 value;
    Tensor2 grad;
    Tensor2 aux0;
    Tensor2 aux1;
    std::vector<std::uint32_t> inputs;
  };

 private:
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parameter_nodes_;  // by parameter index, kNone if absent
  const ParameterSet* params_ = nullptr;
  bool has_backward_ = false;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var add_constant(Var a, const Tensor2& c);
Var sub_from_constant(const Tensor2& c, Var a);  // c - a
Var mul_constant(Var a, const Tensor2& c);
Var affine_columns(Var a, std::span<const double> scale, std::span<const double> shift);
Var matmul(Var a, Var b);
Var relu(Var a);
Var softplus(Var a, double beta);
Var sin(Var a);
Var square(Var a);
Var concat_cols(std::span<const Var> parts);
Var column(Var a, std::size_t j);
Var sum(Var a);
/// f(a, b) applied elementwise, with f and its partials already evaluated.
Var elementwise2(Var a, Var b, Tensor2 value, Tensor2 d_da, Tensor2 d_db);
/// sum over rows r and columns c of weights[c] * (a(r,c) - target(r,c))^2.
Var weighted_squared_error(Var a, const Tensor2& target, std::span<const double> weights);

}  // namespace nodefdm::nn
