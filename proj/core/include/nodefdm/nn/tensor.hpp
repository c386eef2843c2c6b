#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nodefdm::nn {

/// Dense row-major matrix of doubles.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  Tensor2(std::size_t r, std::size_t c, std::vector<double> v);

  static Tensor2 scalar(double v) { return Tensor2(1, 1, v); }
  static Tensor2 column(std::span<const double> v);
  static Tensor2 row(std::span<const double> v);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::size_t size() const { return values.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  bool operator==(const Tensor2&) const = default;
};

std::string shape_string(const Tensor2& t);

}  // namespace nodefdm::nn
