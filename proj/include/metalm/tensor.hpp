// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace metalm {

class Tape;

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// Value handle over an immutable f64 buffer. A Tensor with node >= 0 is an
// output recorded on exactly one live tape; detached tensors are plain
// constants and freely shareable across threads.
struct Tensor {
  Shape shape;
  std::shared_ptr<const std::vector<double>> values;
  std::int64_t node = -1;
  Tape* tape = nullptr;

  bool defined() const { return values != nullptr; }
  bool on_tape() const { return node >= 0; }
  std::int64_t numel() const { return defined() ? static_cast<std::int64_t>(values->size()) : 0; }
  const double* data() const { return values->data(); }
  double at(std::int64_t i) const { return (*values)[static_cast<std::size_t>(i)]; }
  double scalar() const;  // requires numel() == 1

  Tensor detached() const {
    Tensor t = *this;
    t.node = -1;
    t.tape = nullptr;
    return t;
  }
};

Tensor make_tensor(Shape shape, std::vector<double>&& values);
Tensor zeros(Shape shape);
Tensor full(Shape shape, double v);
Tensor scalar_tensor(double v);

bool same_values(const Tensor& a, const Tensor& b);  // shape and bit-exact data

}  // namespace metalm
