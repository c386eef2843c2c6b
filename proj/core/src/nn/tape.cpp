#include "nodefdm/nn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace nodefdm::nn {

namespace {

void require(bool ok, const char* what, const Tensor2& a, const Tensor2& b) {
  if (!ok) throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("operands belong to different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw std::invalid_argument("variable is not attached to a tape");
  return *a.tape;
}

void add_into(Tensor2& dst, const Tensor2& src) {
  for (std::size_t i = 0; i < dst.values.size(); ++i) dst.values[i] += src.values[i];
}

}  // namespace

const Tensor2& Var::value() const { return tape->value(*this); }

Var Tape::push(Op op, Tensor2 value, std::uint32_t a, std::uint32_t b) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.value = std::move(value);
  n.requires_grad = (a != kNone && nodes_[a].requires_grad) || (b != kNone && nodes_[b].requires_grad);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor2 value) { return push(Op::constant, std::move(value)); }

Var Tape::parameter(const ParameterSet& params, std::size_t index) {
  if (params_ != nullptr && params_ != &params) throw std::invalid_argument("tape already bound to another parameter set");
  if (index >= params.size()) throw std::out_of_range("parameter index out of range");
  params_ = &params;
  if (parameter_nodes_.size() < params.size()) parameter_nodes_.resize(params.size(), kNone);
  if (parameter_nodes_[index] != kNone) return Var{this, parameter_nodes_[index]};
  Var v = push(Op::parameter, params[index].value);
  nodes_[v.id].requires_grad = true;
  nodes_[v.id].index = index;
  parameter_nodes_[index] = v.id;
  return v;
}

const Tensor2& Tape::grad(Var v) const {
  if (!has_backward_) throw std::logic_error("backward() has not been run on this tape");
  const Node& n = nodes_[v.id];
  if (n.grad.values.empty() && n.value.size() != 0) throw std::invalid_argument("node is not connected to the loss");
  return n.grad;
}

void Tape::clear() {
  nodes_.clear();
  parameter_nodes_.clear();
  params_ = nullptr;
  has_backward_ = false;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("loss belongs to a different tape");
  Node& root = nodes_[loss.id];
  if (root.value.rows != 1 || root.value.cols != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got " + shape_string(root.value));
  }
  for (Node& n : nodes_) n.grad = Tensor2();
  root.grad = Tensor2(1, 1, 1.0);
  has_backward_ = true;

  auto grad_of = [this](std::uint32_t id) -> Tensor2* {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.values.empty()) n.grad = Tensor2(n.value.rows, n.value.cols);
    return &n.grad;
  };

  for (std::size_t k = loss.id + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.requires_grad || n.grad.values.empty()) continue;
    const Tensor2& g = n.grad;
    switch (n.op) {
      case Op::constant:
      case Op::parameter:
        break;
      case Op::add: {
        if (Tensor2* ga = grad_of(n.a)) add_into(*ga, g);
        if (Tensor2* gb = grad_of(n.b)) {
          if (gb->rows == g.rows) {
            add_into(*gb, g);
          } else {
            for (std::size_t r = 0; r < g.rows; ++r)
              for (std::size_t c = 0; c < g.cols; ++c) gb->values[c] += g(r, c);
          }
        }
        break;
      }
      case Op::sub: {
        if (Tensor2* ga = grad_of(n.a)) add_into(*ga, g);
        if (Tensor2* gb = grad_of(n.b))
          for (std::size_t i = 0; i < g.size(); ++i) gb->values[i] -= g.values[i];
        break;
      }
      case Op::mul: {
        const Tensor2& av = nodes_[n.a].value;
        const Tensor2& bv = nodes_[n.b].value;
        if (Tensor2* ga = grad_of(n.a))
          for (std::size_t i = 0; i < g.size(); ++i) ga->values[i] += g.values[i] * bv.values[i];
        if (Tensor2* gb = grad_of(n.b))
          for (std::size_t i = 0; i < g.size(); ++i) gb->values[i] += g.values[i] * av.values[i];
        break;
      }
      case Op::scale: {
        if (Tensor2* ga = grad_of(n.a))
          for (std::size_t i = 0; i < g.size(); ++i) ga->values[i] += g.values[i] * n.c;
        break;
      }
      case Op::add_constant: {
        if (Tensor2* ga = grad_of(n.a)) {
          if (n.c < 0) {
            for (std::size_t i = 0; i < g.size(); ++i) ga->values[i] -= g.values[i];
          } else {
            add_into(*ga, g);
          }
        }
        break;
      }
      case Op::mul_constant: {
        if (Tensor2* ga = grad_of(n.a))
          for (std::size_t i = 0; i < g.size(); ++i) ga->values[i] += g.values[i] * n.aux0.values[i];
        break;
      }
      case Op::affine_columns: {
        if (Tensor2* ga = grad_of(n.a))
          for (std::size_t r = 0; r < g.rows; ++r)
            for (std::size_t c = 0; c < g.cols; ++c) (*ga)(r, c) += g(r, c) * n.aux0.values[c];
        break;
      }
      case Op::matmul: {
        const Tensor2& av = nodes_[n.a].value;
        const Tensor2& bv = nodes_[n.b].value;
        const std::size_t rows = av.rows, inner = av.cols, cols = bv.cols;
        if (Tensor2* ga = grad_of(n.a)) {
          for (std::size_t r = 0; r < rows; ++r) {
            const double* grow = &g.values[r * cols];
            double* arow = &ga->values[r * inner];
            for (std::size_t k2 = 0; k2 < inner; ++k2) {
              const double* brow = &bv.values[k2 * cols];
              double acc = 0.0;
              for (std::size_t c = 0; c < cols; ++c) acc += grow[c] * brow[c];
              arow[k2] += acc;
            }
          }
        }
        if (Tensor2* gb = grad_of(n.b)) {
          for (std::size_t r = 0; r < rows; ++r) {
            const double* grow = &g.values[r * cols];
            const double* arow = &av.values[r * inner];
            for (std::size_t k2 = 0; k2 < inner; ++k2) {
              const double a = arow[k2];
              if (a == 0.0) continue;
              double* brow = &gb->values[k2 * cols];
              for (std::size_t c = 0; c < cols; ++c) brow[c] += a * grow[c];
            }
          }
        }
        break;
      }
      case Op::relu: {
        if (Tensor2* ga = grad_of(n.a)) {
          const Tensor2& av = nodes_[n.a].value;
          for (std::size_t i = 0; i < g.size(); ++i)
            if (av.values[i] > 0.0) ga->values[i] += g.values[i];
        }
        break;
      }
      case Op::softplus: {
        if (Tensor2* ga = grad_of(n.a)) {
          const Tensor2& av = nodes_[n.a].value;
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double z = n.c * av.values[i];
            const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            ga->values[i] += g.values[i] * s;
          }
        }
        break;
      }
      case Op::sin: {
        if (Tensor2* ga = grad_of(n.a)) {
          const Tensor2& av = nodes_[n.a].value;
          for (std::size_t i = 0; i < g.size(); ++i) ga->values[i] += g.values[i] * std::cos(av.values[i]);
        }
        break;
      }
      case Op::square: {
        if (Tensor2* ga = grad_of(n.a)) {
          const Tensor2& av = nodes_[n.a].value;
          for (std::size_t i = 0; i < g.size(); ++i) ga->values[i] += 2.0 * g.values[i] * av.values[i];
        }
        break;
      }
      case Op::concat_cols: {
        std::size_t offset = 0;
        for (std::uint32_t in : n.inputs) {
          const std::size_t w = nodes_[in].value.cols;
          if (Tensor2* gi = grad_of(in))
            for (std::size_t r = 0; r < g.rows; ++r)
              for (std::size_t c = 0; c < w; ++c) (*gi)(r, c) += g(r, offset + c);
          offset += w;
        }
        break;
      }
      case Op::column: {
        if (Tensor2* ga = grad_of(n.a))
          for (std::size_t r = 0; r < g.rows; ++r) (*ga)(r, n.index) += g(r, 0);
        break;
      }
      case Op::sum: {
        if (Tensor2* ga = grad_of(n.a))
          for (double& x : ga->values) x += g.values[0];
        break;
      }
      case Op::elementwise2: {
        if (Tensor2* ga = grad_of(n.a))
          for (std::size_t i = 0; i < g.size(); ++i) ga->values[i] += g.values[i] * n.aux0.values[i];
        if (Tensor2* gb = grad_of(n.b))
          for (std::size_t i = 0; i < g.size(); ++i) gb->values[i] += g.values[i] * n.aux1.values[i];
        break;
      }
      case Op::weighted_sq_err: {
        if (Tensor2* ga = grad_of(n.a)) {
          const Tensor2& av = nodes_[n.a].value;
          for (std::size_t r = 0; r < av.rows; ++r)
            for (std::size_t c = 0; c < av.cols; ++c)
              (*ga)(r, c) += g.values[0] * 2.0 * n.aux1.values[c] * (av(r, c) - n.aux0(r, c));
        }
        break;
      }
    }
  }
}

std::vector<Tensor2> Tape::parameter_gradients(const ParameterSet& params) const {
  if (params_ != nullptr && params_ != &params) throw std::invalid_argument("tape is bound to another parameter set");
  if (!has_backward_) throw std::logic_error("backward() has not been run on this tape");
  std::vector<Tensor2> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::uint32_t id = i < parameter_nodes_.size() ? parameter_nodes_[i] : kNone;
    if (id != kNone && !nodes_[id].grad.values.empty()) {
      out.push_back(nodes_[id].grad);
    } else {
      out.emplace_back(params[i].value.rows, params[i].value.cols);
    }
  }
  return out;
}

const Tensor2& Tape::parameter_gradient(std::size_t index) const {
  if (!has_backward_) throw std::logic_error("backward() has not been run on this tape");
  if (index >= parameter_nodes_.size() || parameter_nodes_[index] == kNone) {
    throw std::invalid_argument("parameter " + std::to_string(index) + " is detached from this tape");
  }
  const Node& n = nodes_[parameter_nodes_[index]];
  if (n.grad.values.empty()) throw std::invalid_argument("parameter " + std::to_string(index) + " does not reach the loss");
  return n.grad;
}

Var operator+(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  Tensor2 out = av;
  if (av.same_shape(bv)) {
    add_into(out, bv);
  } else if (bv.rows == 1 && bv.cols == av.cols) {
    for (std::size_t r = 0; r < av.rows; ++r)
      for (std::size_t c = 0; c < av.cols; ++c) out(r, c) += bv.values[c];
  } else {
    require(false, "add", av, bv);
  }
  return t.push(Tape::Op::add, std::move(out), a.id, b.id);
}

Var operator-(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.value().same_shape(b.value()), "sub", a.value(), b.value());
  Tensor2 out = a.value();
  const Tensor2& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= bv.values[i];
  return t.push(Tape::Op::sub, std::move(out), a.id, b.id);
}

Var operator*(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.value().same_shape(b.value()), "mul", a.value(), b.value());
  Tensor2 out = a.value();
  const Tensor2& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= bv.values[i];
  return t.push(Tape::Op::mul, std::move(out), a.id, b.id);
}

Var operator*(Var a, double c) {
  Tape& t = tape_of(a);
  Tensor2 out = a.value();
  for (double& x : out.values) x *= c;
  Var v = t.push(Tape::Op::scale, std::move(out), a.id);
  t.node(v).c = c;
  return v;
}

Var operator*(double c, Var a) { return a * c; }

Var add_constant(Var a, const Tensor2& c) {
  Tape& t = tape_of(a);
  require(a.value().same_shape(c), "add_constant", a.value(), c);
  Tensor2 out = a.value();
  add_into(out, c);
  Var v = t.push(Tape::Op::add_constant, std::move(out), a.id);
  t.node(v).c = 1.0;
  return v;
}

Var sub_from_constant(const Tensor2& c, Var a) {
  Tape& t = tape_of(a);
  require(a.value().same_shape(c), "sub_from_constant", c, a.value());
  Tensor2 out = c;
  const Tensor2& av = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= av.values[i];
  Var v = t.push(Tape::Op::add_constant, std::move(out), a.id);
  t.node(v).c = -1.0;
  return v;
}

Var mul_constant(Var a, const Tensor2& c) {
  Tape& t = tape_of(a);
  require(a.value().same_shape(c), "mul_constant", a.value(), c);
  Tensor2 out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= c.values[i];
  Var v = t.push(Tape::Op::mul_constant, std::move(out), a.id);
  t.node(v).aux0 = c;
  return v;
}

Var affine_columns(Var a, std::span<const double> scale, std::span<const double> shift) {
  Tape& t = tape_of(a);
  const Tensor2& av = a.value();
  if (scale.size() != av.cols || shift.size() != av.cols) {
    throw std::invalid_argument("affine_columns: expected " + std::to_string(av.cols) + " column coefficients");
  }
  Tensor2 out = av;
  for (std::size_t r = 0; r < av.rows; ++r)
    for (std::size_t c = 0; c < av.cols; ++c) out(r, c) = av(r, c) * scale[c] + shift[c];
  Var v = t.push(Tape::Op::affine_columns, std::move(out), a.id);
  t.node(v).aux0 = Tensor2::row(scale);
  return v;
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  require(av.cols == bv.rows, "matmul", av, bv);
  Tensor2 out(av.rows, bv.cols);
  for (std::size_t r = 0; r < av.rows; ++r) {
    double* orow = &out.values[r * bv.cols];
    for (std::size_t k = 0; k < av.cols; ++k) {
      const double x = av(r, k);
      const double* brow = &bv.values[k * bv.cols];
      for (std::size_t c = 0; c < bv.cols; ++c) orow[c] += x * brow[c];
    }
  }
  return t.push(Tape::Op::matmul, std::move(out), a.id, b.id);
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Tensor2 out = a.value();
  for (double& x : out.values) x = x > 0.0 ? x : 0.0;
  return t.push(Tape::Op::relu, std::move(out), a.id);
}

Var softplus(Var a, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("softplus beta must be positive");
  Tape& t = tape_of(a);
  Tensor2 out = a.value();
  for (double& x : out.values) {
    const double z = beta * x;
    x = (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)))) / beta;
  }
  Var v = t.push(Tape::Op::softplus, std::move(out), a.id);
  t.node(v).c = beta;
  return v;
}

Var sin(Var a) {
  Tape& t = tape_of(a);
  Tensor2 out = a.value();
  for (double& x : out.values) x = std::sin(x);
  return t.push(Tape::Op::sin, std::move(out), a.id);
}

Var square(Var a) {
  Tape& t = tape_of(a);
  Tensor2 out = a.value();
  for (double& x : out.values) x *= x;
  return t.push(Tape::Op::square, std::move(out), a.id);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols needs at least one input");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("operands belong to different tapes");
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Tensor2 out(rows, cols);
  std::size_t offset = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    const Tensor2& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.cols; ++c) out(r, offset + c) = pv(r, c);
    offset += pv.cols;
    rg = rg || t.node(p).requires_grad;
    ids.push_back(p.id);
  }
  Var v = t.push(Tape::Op::concat_cols, std::move(out));
  t.node(v).inputs = std::move(ids);
  t.node(v).requires_grad = rg;
  return v;
}

Var column(Var a, std::size_t j) {
  Tape& t = tape_of(a);
  const Tensor2& av = a.value();
  if (j >= av.cols) throw std::out_of_range("column index out of range");
  Tensor2 out(av.rows, 1);
  for (std::size_t r = 0; r < av.rows; ++r) out.values[r] = av(r, j);
  Var v = t.push(Tape::Op::column, std::move(out), a.id);
  t.node(v).index = j;
  return v;
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double x : a.value().values) s += x;
  return t.push(Tape::Op::sum, Tensor2::scalar(s), a.id);
}

Var elementwise2(Var a, Var b, Tensor2 value, Tensor2 d_da, Tensor2 d_db) {
  Tape& t = tape_of(a, b);
  require(a.value().same_shape(b.value()), "elementwise2", a.value(), b.value());
  if (!value.same_shape(a.value()) || !d_da.same_shape(value) || !d_db.same_shape(value)) {
    throw std::invalid_argument("elementwise2: value and partials must match operand shape");
  }
  Var v = t.push(Tape::Op::elementwise2, std::move(value), a.id, b.id);
  t.node(v).aux0 = std::move(d_da);
  t.node(v).aux1 = std::move(d_db);
  return v;
}

Var weighted_squared_error(Var a, const Tensor2& target, std::span<const double> weights) {
  Tape& t = tape_of(a);
  const Tensor2& av = a.value();
  require(av.same_shape(target), "weighted_squared_error", av, target);
  if (weights.size() != av.cols) throw std::invalid_argument("weighted_squared_error: one weight per column required");
  double s = 0.0;
  for (std::size_t r = 0; r < av.rows; ++r)
    for (std::size_t c = 0; c < av.cols; ++c) {
      const double e = av(r, c) - target(r, c);
      s += weights[c] * e * e;
    }
  Var v = t.push(Tape::Op::weighted_sq_err, Tensor2::scalar(s), a.id);
  t.node(v).aux0 = target;
  t.node(v).aux1 = Tensor2::row(weights);
  return v;
}

}  // namespace nodefdm::nn
