#include "nodefdm/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nodefdm::nn {

Tensor2::Tensor2(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) throw std::invalid_argument("tensor value count does not match shape");
}

Tensor2 Tensor2::column(std::span<const double> v) {
  return Tensor2(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Tensor2 Tensor2::row(std::span<const double> v) {
  return Tensor2(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

bool Tensor2::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

std::string shape_string(const Tensor2& t) {
  return "[" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + "]";
}

}  // namespace nodefdm::nn
