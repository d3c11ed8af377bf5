// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Tensor primitives. Each op validates shapes and finiteness, computes its
// value through the kernel layer, and records itself on the tape implied by
// its inputs (if any input is on a recording tape). Backward rules live in
// tape.cpp and are themselves written with these ops, so the whole set stays
// closed under differentiation; gelu and layer_norm are composites of the
// closed set and need no rules of their own.

#pragma once

#include <span>

#include "metalm/tape.hpp"
#include "metalm/tensor.hpp"

namespace metalm::ops {

// a is m-by-k after trans_a, b is k-by-n after trans_b.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);  // add(a, scale(b, -1))
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor erf(const Tensor& a);

Tensor sum_all(const Tensor& a);   // -> [1]
Tensor mean_all(const Tensor& a);  // scale(sum_all, 1/n)
Tensor broadcast_scalar(const Tensor& s, Shape shape);

Tensor row_sum(const Tensor& a);                      // [m,n] -> [m,1]
Tensor broadcast_col(const Tensor& a, std::int64_t n);  // [m,1] -> [m,n]
Tensor col_sum(const Tensor& a);                      // [m,n] -> [n]
Tensor broadcast_row(const Tensor& v, std::int64_t m);  // [n] -> [m,n]

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids);
Tensor scatter_rows(const Tensor& grads, std::span<const std::int32_t> ids, std::int64_t rows);

Tensor col_slice(const Tensor& a, std::int64_t offset, std::int64_t width);
Tensor col_pad(const Tensor& a, std::int64_t offset, std::int64_t total);

// Softmax over each row; causal_softmax additionally restricts row i to
// columns j <= i (square input) and zeroes the rest.
Tensor causal_softmax(const Tensor& scores);
Tensor row_softmax(const Tensor& logits);

// Mean cross-entropy over masked positions. mask[p] scores targets[p]
// against logits row p-1 (the prediction made from the prefix), so mask[0]
// is rejected. logits: [T,V]; targets, mask: length T.
Tensor masked_ce(const Tensor& logits, std::span<const std::int32_t> targets,
                 std::span<const std::uint8_t> mask);

// Composites.
Tensor gelu(const Tensor& x);  // exact form: 0.5*x*(1 + erf(x/sqrt(2)))
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

}  // namespace metalm::ops
