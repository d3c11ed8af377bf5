// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/ops.hpp"

#include <cmath>
#include <cstring>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include "metalm/kernels.hpp"

namespace metalm::ops {
namespace {

namespace kn = metalm::kernels;

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

void check_finite(const Tensor& t, const char* op) {
  if (!kn::all_finite(t.data(), t.values->size()))
    throw std::domain_error(std::string(op) + ": non-finite input");
}

void check_input(const Tensor& t, const char* op) {
  check_defined(t, op);
  check_finite(t, op);
}

void check_2d(const Tensor& t, const char* op) {
  if (t.shape.size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected 2-d tensor, got " +
                                shape_str(t.shape));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

Tape* find_tape(std::initializer_list<const Tensor*> ins, const char* op) {
  Tape* t = nullptr;
  for (const Tensor* x : ins) {
    if (x->on_tape()) {
      if (t == nullptr) {
        t = x->tape;
      } else if (t != x->tape) {
        throw std::invalid_argument(std::string(op) + ": inputs live on different tapes");
      }
    }
  }
  return t;
}

bool should_record(const Tape* t) { return t != nullptr && t->recording(); }

Tensor finish(Tape* tape, TapeNode&& node, Tensor out, bool save_output = false) {
  if (should_record(tape)) {
    const std::int64_t id = tape->emit(std::move(node));
    out.node = id;
    out.tape = tape;
    if (save_output) tape->attach_output(id, out);
  }
  return out;
}

std::vector<double> buffer(std::int64_t n) {
  return std::vector<double>(static_cast<std::size_t>(n));
}

Tensor ew_binary(OpKind kind, const Tensor& a, const Tensor& b, const char* op,
                 void (*kernel)(double*, const double*, const double*, std::size_t),
                 bool save_inputs, bool save_output) {
  check_input(a, op);
  check_input(b, op);
  check_same_shape(a, b, op);
  Tape* tape = find_tape({&a, &b}, op);
  auto vals = buffer(a.numel());
  kernel(vals.data(), a.data(), b.data(), vals.size());
  TapeNode n;
  n.kind = kind;
  n.in = {a.node, b.node};
  if (save_inputs) n.saved = {a, b};
  return finish(tape, std::move(n), make_tensor(a.shape, std::move(vals)), save_output);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return ew_binary(OpKind::add, a, b, "add", kn::add, false, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return ew_binary(OpKind::mul, a, b, "mul", kn::mul, true, false);
}

Tensor div(const Tensor& a, const Tensor& b) {
  // saved: {b, out}
  check_input(a, "div");
  check_input(b, "div");
  check_same_shape(a, b, "div");
  Tape* tape = find_tape({&a, &b}, "div");
  auto vals = buffer(a.numel());
  kn::div(vals.data(), a.data(), b.data(), vals.size());
  TapeNode n;
  n.kind = OpKind::div;
  n.in = {a.node, b.node};
  n.saved = {b};
  return finish(tape, std::move(n), make_tensor(a.shape, std::move(vals)), true);
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor scale(const Tensor& a, double c) {
  check_input(a, "scale");
  if (!std::isfinite(c)) throw std::domain_error("scale: non-finite constant");
  Tape* tape = find_tape({&a}, "scale");
  auto vals = buffer(a.numel());
  kn::scale(vals.data(), a.data(), c, vals.size());
  TapeNode n;
  n.kind = OpKind::scale;
  n.in = {a.node, -1};
  n.c0 = c;
  return finish(tape, std::move(n), make_tensor(a.shape, std::move(vals)));
}

Tensor add_scalar(const Tensor& a, double c) {
  check_input(a, "add_scalar");
  if (!std::isfinite(c)) throw std::domain_error("add_scalar: non-finite constant");
  Tape* tape = find_tape({&a}, "add_scalar");
  auto vals = buffer(a.numel());
  kn::add_scalar(vals.data(), a.data(), c, vals.size());
  TapeNode n;
  n.kind = OpKind::add_scalar;
  n.in = {a.node, -1};
  n.c0 = c;
  return finish(tape, std::move(n), make_tensor(a.shape, std::move(vals)));
}

Tensor sqrt(const Tensor& a) {
  check_input(a, "sqrt");
  Tape* tape = find_tape({&a}, "sqrt");
  auto vals = buffer(a.numel());
  kn::sqrt(vals.data(), a.data(), vals.size());
  TapeNode n;
  n.kind = OpKind::sqrt_op;
  n.in = {a.node, -1};
  return finish(tape, std::move(n), make_tensor(a.shape, std::move(vals)), true);
}

Tensor exp(const Tensor& a) {
  check_input(a, "exp");
  Tape* tape = find_tape({&a}, "exp");
  auto vals = buffer(a.numel());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = std::exp(a.data()[i]);
  TapeNode n;
  n.kind = OpKind::exp_op;
  n.in = {a.node, -1};
  return finish(tape, std::move(n), make_tensor(a.shape, std::move(vals)), true);
}

Tensor erf(const Tensor& a) {
  check_input(a, "erf");
  Tape* tape = find_tape({&a}, "erf");
  auto vals = buffer(a.numel());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = std::erf(a.data()[i]);
  TapeNode n;
  n.kind = OpKind::erf_op;
  n.in = {a.node, -1};
  n.saved = {a};
  return finish(tape, std::move(n), make_tensor(a.shape, std::move(vals)));
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  check_input(a, "matmul");
  check_input(b, "matmul");
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  if (trans_a && trans_b) throw std::invalid_argument("matmul: trans_a && trans_b unsupported");
  const std::int64_t m = trans_a ? a.shape[1] : a.shape[0];
  const std::int64_t ka = trans_a ? a.shape[0] : a.shape[1];
  const std::int64_t kb = trans_b ? b.shape[1] : b.shape[0];
  const std::int64_t nn = trans_b ? b.shape[0] : b.shape[1];
  if (ka != kb)
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape) +
                                (trans_a ? "^T" : "") + " * " + shape_str(b.shape) +
                                (trans_b ? "^T" : ""));
  Tape* tape = find_tape({&a, &b}, "matmul");
  auto vals = buffer(m * nn);
  kn::matmul(vals.data(), a.data(), b.data(), static_cast<std::size_t>(m),
             static_cast<std::size_t>(ka), static_cast<std::size_t>(nn), trans_a, trans_b,
             false);
  TapeNode n;
  n.kind = OpKind::matmul;
  n.in = {a.node, b.node};
  n.saved = {a, b};
  n.b0 = trans_a;
  n.b1 = trans_b;
  return finish(tape, std::move(n), make_tensor({m, nn}, std::move(vals)));
}

Tensor sum_all(const Tensor& a) {
  check_input(a, "sum_all");
  Tape* tape = find_tape({&a}, "sum_all");
  const double s = kn::sum(a.data(), a.values->size());
  TapeNode n;
  n.kind = OpKind::sum_all;
  n.in = {a.node, -1};
  n.aux_shape = a.shape;
  return finish(tape, std::move(n), make_tensor({1}, {s}));
}

Tensor mean_all(const Tensor& a) {
  const std::int64_t n = a.numel();
  if (n == 0) throw std::invalid_argument("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Tensor broadcast_scalar(const Tensor& s, Shape shape) {
  check_input(s, "broadcast_scalar");
  if (s.numel() != 1)
    throw std::invalid_argument("broadcast_scalar: source has shape " + shape_str(s.shape));
  Tape* tape = find_tape({&s}, "broadcast_scalar");
  const std::int64_t count = numel(shape);
  std::vector<double> vals(static_cast<std::size_t>(count), s.at(0));
  TapeNode n;
  n.kind = OpKind::broadcast_scalar;
  n.in = {s.node, -1};
  return finish(tape, std::move(n), make_tensor(std::move(shape), std::move(vals)));
}

Tensor row_sum(const Tensor& a) {
  check_input(a, "row_sum");
  check_2d(a, "row_sum");
  Tape* tape = find_tape({&a}, "row_sum");
  const std::int64_t m = a.shape[0], nn = a.shape[1];
  auto vals = buffer(m);
  for (std::int64_t i = 0; i < m; ++i)
    vals[static_cast<std::size_t>(i)] = kn::sum(a.data() + i * nn, static_cast<std::size_t>(nn));
  TapeNode n;
  n.kind = OpKind::row_sum;
  n.in = {a.node, -1};
  n.i0 = nn;
  return finish(tape, std::move(n), make_tensor({m, 1}, std::move(vals)));
}

Tensor broadcast_col(const Tensor& a, std::int64_t nn) {
  check_input(a, "broadcast_col");
  check_2d(a, "broadcast_col");
  if (a.shape[1] != 1)
    throw std::invalid_argument("broadcast_col: expected [m,1], got " + shape_str(a.shape));
  Tape* tape = find_tape({&a}, "broadcast_col");
  const std::int64_t m = a.shape[0];
  auto vals = buffer(m * nn);
  for (std::int64_t i = 0; i < m; ++i) {
    const double v = a.at(i);
    for (std::int64_t j = 0; j < nn; ++j) vals[static_cast<std::size_t>(i * nn + j)] = v;
  }
  TapeNode n;
  n.kind = OpKind::broadcast_col;
  n.in = {a.node, -1};
  return finish(tape, std::move(n), make_tensor({m, nn}, std::move(vals)));
}

Tensor col_sum(const Tensor& a) {
  check_input(a, "col_sum");
  check_2d(a, "col_sum");
  Tape* tape = find_tape({&a}, "col_sum");
  const std::int64_t m = a.shape[0], nn = a.shape[1];
  std::vector<double> vals(static_cast<std::size_t>(nn), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    kn::add(vals.data(), vals.data(), a.data() + i * nn, static_cast<std::size_t>(nn));
  TapeNode n;
  n.kind = OpKind::col_sum;
  n.in = {a.node, -1};
  n.i0 = m;
  return finish(tape, std::move(n), make_tensor({nn}, std::move(vals)));
}

Tensor broadcast_row(const Tensor& v, std::int64_t m) {
  check_input(v, "broadcast_row");
  if (v.shape.size() != 1)
    throw std::invalid_argument("broadcast_row: expected 1-d tensor, got " + shape_str(v.shape));
  Tape* tape = find_tape({&v}, "broadcast_row");
  const std::int64_t nn = v.shape[0];
  auto vals = buffer(m * nn);
  for (std::int64_t i = 0; i < m; ++i)
    std::memcpy(vals.data() + i * nn, v.data(), static_cast<std::size_t>(nn) * sizeof(double));
  TapeNode n;
  n.kind = OpKind::broadcast_row;
  n.in = {v.node, -1};
  return finish(tape, std::move(n), make_tensor({m, nn}, std::move(vals)));
}

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids) {
  check_input(table, "gather_rows");
  check_2d(table, "gather_rows");
  const std::int64_t rows = table.shape[0], d = table.shape[1];
  for (auto id : ids)
    if (id < 0 || id >= rows)
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                  " out of range for table " + shape_str(table.shape));
  Tape* tape = find_tape({&table}, "gather_rows");
  const std::int64_t t = static_cast<std::int64_t>(ids.size());
  auto vals = buffer(t * d);
  for (std::int64_t i = 0; i < t; ++i)
    std::memcpy(vals.data() + i * d, table.data() + static_cast<std::int64_t>(ids[static_cast<std::size_t>(i)]) * d,
                static_cast<std::size_t>(d) * sizeof(double));
  TapeNode n;
  n.kind = OpKind::gather_rows;
  n.in = {table.node, -1};
  n.i0 = rows;
  n.ids = std::make_shared<const std::vector<std::int32_t>>(ids.begin(), ids.end());
  return finish(tape, std::move(n), make_tensor({t, d}, std::move(vals)));
}

Tensor scatter_rows(const Tensor& grads, std::span<const std::int32_t> ids, std::int64_t rows) {
  check_input(grads, "scatter_rows");
  check_2d(grads, "scatter_rows");
  if (static_cast<std::size_t>(grads.shape[0]) != ids.size())
    throw std::invalid_argument("scatter_rows: row count " + shape_str(grads.shape) +
                                " vs " + std::to_string(ids.size()) + " ids");
  for (auto id : ids)
    if (id < 0 || id >= rows)
      throw std::invalid_argument("scatter_rows: id out of range");
  Tape* tape = find_tape({&grads}, "scatter_rows");
  const std::int64_t t = grads.shape[0], d = grads.shape[1];
  std::vector<double> vals(static_cast<std::size_t>(rows * d), 0.0);
  for (std::int64_t i = 0; i < t; ++i) {
    double* dst = vals.data() + static_cast<std::int64_t>(ids[static_cast<std::size_t>(i)]) * d;
    kn::add(dst, dst, grads.data() + i * d, static_cast<std::size_t>(d));
  }
  TapeNode n;
  n.kind = OpKind::scatter_rows;
  n.in = {grads.node, -1};
  n.ids = std::make_shared<const std::vector<std::int32_t>>(ids.begin(), ids.end());
  return finish(tape, std::move(n), make_tensor({rows, d}, std::move(vals)));
}

Tensor col_slice(const Tensor& a, std::int64_t offset, std::int64_t width) {
  check_input(a, "col_slice");
  check_2d(a, "col_slice");
  const std::int64_t m = a.shape[0], nn = a.shape[1];
  if (offset < 0 || width <= 0 || offset + width > nn)
    throw std::invalid_argument("col_slice: [" + std::to_string(offset) + "," +
                                std::to_string(offset + width) + ") out of " + shape_str(a.shape));
  Tape* tape = find_tape({&a}, "col_slice");
  auto vals = buffer(m * width);
  for (std::int64_t i = 0; i < m; ++i)
    std::memcpy(vals.data() + i * width, a.data() + i * nn + offset,
                static_cast<std::size_t>(width) * sizeof(double));
  TapeNode n;
  n.kind = OpKind::col_slice;
  n.in = {a.node, -1};
  n.i0 = offset;
  n.i1 = nn;
  return finish(tape, std::move(n), make_tensor({m, width}, std::move(vals)));
}

Tensor col_pad(const Tensor& a, std::int64_t offset, std::int64_t total) {
  check_input(a, "col_pad");
  check_2d(a, "col_pad");
  const std::int64_t m = a.shape[0], w = a.shape[1];
  if (offset < 0 || offset + w > total)
    throw std::invalid_argument("col_pad: slice [" + std::to_string(offset) + "," +
                                std::to_string(offset + w) + ") exceeds total " +
                                std::to_string(total));
  Tape* tape = find_tape({&a}, "col_pad");
  std::vector<double> vals(static_cast<std::size_t>(m * total), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    std::memcpy(vals.data() + i * total + offset, a.data() + i * w,
                static_cast<std::size_t>(w) * sizeof(double));
  TapeNode n;
  n.kind = OpKind::col_pad;
  n.in = {a.node, -1};
  n.i0 = offset;
  n.i1 = w;
  return finish(tape, std::move(n), make_tensor({m, total}, std::move(vals)));
}

namespace {

Tensor softmax_impl(OpKind kind, const Tensor& z, const char* op) {
  check_input(z, op);
  check_2d(z, op);
  const bool causal = (kind == OpKind::causal_softmax);
  if (causal && z.shape[0] != z.shape[1])
    throw std::invalid_argument(std::string(op) + ": expected square input, got " +
                                shape_str(z.shape));
  Tape* tape = find_tape({&z}, op);
  const std::int64_t m = z.shape[0], nn = z.shape[1];
  std::vector<double> vals(static_cast<std::size_t>(m * nn), 0.0);
  for (std::int64_t i = 0; i < m; ++i) {
    const std::int64_t limit = causal ? i + 1 : nn;
    const double* row = z.data() + i * nn;
    double mx = row[0];
    for (std::int64_t j = 1; j < limit; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    double* out = vals.data() + i * nn;
    for (std::int64_t j = 0; j < limit; ++j) {
      out[j] = std::exp(row[j] - mx);
      denom += out[j];
    }
    for (std::int64_t j = 0; j < limit; ++j) out[j] /= denom;
  }
  TapeNode n;
  n.kind = kind;
  n.in = {z.node, -1};
  return finish(tape, std::move(n), make_tensor(z.shape, std::move(vals)), true);
}

}  // namespace

Tensor causal_softmax(const Tensor& scores) {
  return softmax_impl(OpKind::causal_softmax, scores, "causal_softmax");
}

Tensor row_softmax(const Tensor& logits) {
  return softmax_impl(OpKind::row_softmax, logits, "row_softmax");
}

Tensor masked_ce(const Tensor& logits, std::span<const std::int32_t> targets,
                 std::span<const std::uint8_t> mask) {
  check_input(logits, "masked_ce");
  check_2d(logits, "masked_ce");
  const std::int64_t t = logits.shape[0], v = logits.shape[1];
  if (targets.size() != static_cast<std::size_t>(t) || mask.size() != static_cast<std::size_t>(t))
    throw std::invalid_argument("masked_ce: logits " + shape_str(logits.shape) + " vs " +
                                std::to_string(targets.size()) + " targets, " +
                                std::to_string(mask.size()) + " mask entries");
  std::int64_t count = 0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    if (p == 0) throw std::invalid_argument("masked_ce: position 0 has no prefix to score from");
    if (targets[p] < 0 || targets[p] >= v)
      throw std::invalid_argument("masked_ce: target id out of range");
    ++count;
  }
  if (count == 0) throw std::invalid_argument("masked_ce: empty mask");
  Tape* tape = find_tape({&logits}, "masked_ce");

  double loss = 0.0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    const double* row = logits.data() + (static_cast<std::int64_t>(p) - 1) * v;
    double mx = row[0];
    for (std::int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
    const double lse = mx + std::log(denom);
    loss += lse - row[targets[p]];
  }
  loss /= static_cast<double>(count);

  TapeNode n;
  n.kind = OpKind::masked_ce;
  n.in = {logits.node, -1};
  n.saved = {logits};
  n.ids = std::make_shared<const std::vector<std::int32_t>>(targets.begin(), targets.end());
  n.mask = std::make_shared<const std::vector<std::uint8_t>>(mask.begin(), mask.end());
  n.i0 = count;
  return finish(tape, std::move(n), make_tensor({1}, {loss}));
}

Tensor gelu(const Tensor& x) {
  Tensor t = scale(x, 1.0 / std::sqrt(2.0));
  t = erf(t);
  t = add_scalar(t, 1.0);
  t = mul(x, t);
  return scale(t, 0.5);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_input(x, "layer_norm");
  check_2d(x, "layer_norm");
  const std::int64_t d = x.shape[1];
  if (gamma.shape != Shape{d} || beta.shape != Shape{d})
    throw std::invalid_argument("layer_norm: gain/bias must be [" + std::to_string(d) +
                                "], got " + shape_str(gamma.shape) + ", " + shape_str(beta.shape));
  const std::int64_t m = x.shape[0];
  const double inv_d = 1.0 / static_cast<double>(d);
  Tensor mu = scale(row_sum(x), inv_d);
  Tensor xc = sub(x, broadcast_col(mu, d));
  Tensor var = scale(row_sum(mul(xc, xc)), inv_d);
  Tensor den = sqrt(add_scalar(var, eps));
  Tensor xhat = div(xc, broadcast_col(den, d));
  return add(mul(xhat, broadcast_row(gamma, m)), broadcast_row(beta, m));
}

}  // namespace metalm::ops
