// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace metalm {

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

double Tensor::scalar() const {
  if (numel() != 1)
    throw std::invalid_argument("Tensor::scalar: tensor has shape " + shape_str(shape));
  return (*values)[0];
}

Tensor make_tensor(Shape shape, std::vector<double>&& values) {
  if (numel(shape) != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("make_tensor: shape " + shape_str(shape) + " holds " +
                                std::to_string(numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  Tensor t;
  t.shape = std::move(shape);
  t.values = std::make_shared<const std::vector<double>>(std::move(values));
  return t;
}

Tensor zeros(Shape shape) {
  std::vector<double> v(static_cast<std::size_t>(numel(shape)), 0.0);
  return make_tensor(std::move(shape), std::move(v));
}

Tensor full(Shape shape, double x) {
  std::vector<double> v(static_cast<std::size_t>(numel(shape)), x);
  return make_tensor(std::move(shape), std::move(v));
}

Tensor scalar_tensor(double x) { return full({1}, x); }

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  const auto& av = *a.values;
  const auto& bv = *b.values;
  for (std::size_t i = 0; i < av.size(); ++i)
    if (av[i] != bv[i]) return false;
  return true;
}

}  // namespace metalm
