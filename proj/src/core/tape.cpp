// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Backward rules. Every rule is expressed with the ops:: primitives, so when
// grad() runs with create_graph=true the contributions are recorded as
// ordinary nodes and remain differentiable; with create_graph=false the same
// code runs with recording off and produces plain values.

#include "metalm/tape.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "metalm/ops.hpp"

namespace metalm {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::sqrt_op: return "sqrt";
    case OpKind::exp_op: return "exp";
    case OpKind::erf_op: return "erf";
    case OpKind::sum_all: return "sum_all";
    case OpKind::broadcast_scalar: return "broadcast_scalar";
    case OpKind::row_sum: return "row_sum";
    case OpKind::broadcast_col: return "broadcast_col";
    case OpKind::col_sum: return "col_sum";
    case OpKind::broadcast_row: return "broadcast_row";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::scatter_rows: return "scatter_rows";
    case OpKind::causal_softmax: return "causal_softmax";
    case OpKind::row_softmax: return "row_softmax";
    case OpKind::masked_ce: return "masked_ce";
    case OpKind::col_slice: return "col_slice";
    case OpKind::col_pad: return "col_pad";
  }
  return "?";
}

Tensor Tape::leaf(const Tensor& value) {
  if (!value.defined()) throw std::invalid_argument("Tape::leaf: undefined tensor");
  if (value.on_tape()) throw std::invalid_argument("Tape::leaf: tensor already lives on a tape");
  TapeNode n;
  n.kind = OpKind::leaf;
  Tensor out = value;
  out.node = emit(std::move(n));
  out.tape = this;
  return out;
}

std::int64_t Tape::emit(TapeNode&& n) {
  nodes_.push_back(std::move(n));
  return static_cast<std::int64_t>(nodes_.size()) - 1;
}

namespace {

using Accum = std::function<void(std::int64_t, Tensor&&)>;

void backward_node(const TapeNode& nd, const Tensor& adj, const Accum& accum) {
  const std::int64_t in0 = nd.in[0];
  const std::int64_t in1 = nd.in[1];
  switch (nd.kind) {
    case OpKind::leaf:
      break;
    case OpKind::matmul: {
      const Tensor& a = nd.saved[0];
      const Tensor& b = nd.saved[1];
      if (!nd.b0 && !nd.b1) {
        if (in0 >= 0) accum(in0, ops::matmul(adj, b, false, true));
        if (in1 >= 0) accum(in1, ops::matmul(a, adj, true, false));
      } else if (!nd.b0 && nd.b1) {
        if (in0 >= 0) accum(in0, ops::matmul(adj, b, false, false));
        if (in1 >= 0) accum(in1, ops::matmul(adj, a, true, false));
      } else {  // trans_a
        if (in0 >= 0) accum(in0, ops::matmul(b, adj, false, true));
        if (in1 >= 0) accum(in1, ops::matmul(a, adj, false, false));
      }
      break;
    }
    case OpKind::add:
      if (in0 >= 0) accum(in0, Tensor(adj));
      if (in1 >= 0) accum(in1, Tensor(adj));
      break;
    case OpKind::mul: {
      const Tensor& a = nd.saved[0];
      const Tensor& b = nd.saved[1];
      if (in0 >= 0) accum(in0, ops::mul(adj, b));
      if (in1 >= 0) accum(in1, ops::mul(adj, a));
      break;
    }
    case OpKind::div: {
      const Tensor& b = nd.saved[0];
      const Tensor& out = nd.saved[1];
      if (in0 >= 0) accum(in0, ops::div(adj, b));
      if (in1 >= 0) accum(in1, ops::scale(ops::mul(adj, ops::div(out, b)), -1.0));
      break;
    }
    case OpKind::scale:
      if (in0 >= 0) accum(in0, ops::scale(adj, nd.c0));
      break;
    case OpKind::add_scalar:
      if (in0 >= 0) accum(in0, Tensor(adj));
      break;
    case OpKind::sqrt_op: {
      // Subgradient 0 where the output is 0: composites like the adamw update
      // m/(sqrt(v)+eps) stay differentiable at v=0, where the v-path's true
      // contribution is zero and a literal 1/sqrt(0) would poison it with inf.
      const Tensor& out = nd.saved[0];
      if (in0 >= 0) {
        bool any_zero = false;
        for (std::int64_t i = 0; i < out.numel(); ++i)
          if (out.at(i) == 0.0) {
            any_zero = true;
            break;
          }
        if (!any_zero) {
          accum(in0, ops::scale(ops::div(adj, out), 0.5));
        } else {
          std::vector<double> den(static_cast<std::size_t>(out.numel()));
          std::vector<double> keep(static_cast<std::size_t>(out.numel()));
          for (std::int64_t i = 0; i < out.numel(); ++i) {
            const bool z = out.at(i) == 0.0;
            den[static_cast<std::size_t>(i)] = z ? 1.0 : out.at(i);
            keep[static_cast<std::size_t>(i)] = z ? 0.0 : 1.0;
          }
          const Tensor safe_den = make_tensor(out.shape, std::move(den));
          const Tensor mask = make_tensor(out.shape, std::move(keep));
          accum(in0, ops::mul(ops::scale(ops::div(adj, safe_den), 0.5), mask));
        }
      }
      break;
    }
    case OpKind::exp_op: {
      const Tensor& out = nd.saved[0];
      if (in0 >= 0) accum(in0, ops::mul(adj, out));
      break;
    }
    case OpKind::erf_op: {
      const Tensor& a = nd.saved[0];
      if (in0 >= 0) {
        Tensor t = ops::mul(a, a);
        t = ops::scale(t, -1.0);
        t = ops::exp(t);
        t = ops::scale(t, 2.0 * std::numbers::inv_sqrtpi);
        accum(in0, ops::mul(adj, t));
      }
      break;
    }
    case OpKind::sum_all:
      if (in0 >= 0) accum(in0, ops::broadcast_scalar(adj, nd.aux_shape));
      break;
    case OpKind::broadcast_scalar:
      if (in0 >= 0) accum(in0, ops::sum_all(adj));
      break;
    case OpKind::row_sum:
      if (in0 >= 0) accum(in0, ops::broadcast_col(adj, nd.i0));
      break;
    case OpKind::broadcast_col:
      if (in0 >= 0) accum(in0, ops::row_sum(adj));
      break;
    case OpKind::col_sum:
      if (in0 >= 0) accum(in0, ops::broadcast_row(adj, nd.i0));
      break;
    case OpKind::broadcast_row:
      if (in0 >= 0) accum(in0, ops::col_sum(adj));
      break;
    case OpKind::gather_rows:
      if (in0 >= 0) accum(in0, ops::scatter_rows(adj, *nd.ids, nd.i0));
      break;
    case OpKind::scatter_rows:
      if (in0 >= 0) accum(in0, ops::gather_rows(adj, *nd.ids));
      break;
    case OpKind::causal_softmax:
    case OpKind::row_softmax: {
      const Tensor& out = nd.saved[0];
      if (in0 >= 0) {
        Tensor rs = ops::row_sum(ops::mul(adj, out));
        Tensor diff = ops::sub(adj, ops::broadcast_col(rs, out.shape[1]));
        accum(in0, ops::mul(out, diff));
      }
      break;
    }
    case OpKind::masked_ce: {
      if (in0 < 0) break;
      const Tensor& logits = nd.saved[0];
      const auto& targets = *nd.ids;
      const auto& mask = *nd.mask;
      const std::int64_t t = logits.shape[0], v = logits.shape[1];
      const double inv_m = 1.0 / static_cast<double>(nd.i0);
      std::vector<double> cm(static_cast<std::size_t>(t * v), 0.0);
      std::vector<double> oh(static_cast<std::size_t>(t * v), 0.0);
      for (std::size_t p = 1; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        const std::int64_t r = static_cast<std::int64_t>(p) - 1;
        for (std::int64_t j = 0; j < v; ++j) cm[static_cast<std::size_t>(r * v + j)] = inv_m;
        oh[static_cast<std::size_t>(r * v + targets[p])] = inv_m;
      }
      Tensor mask_coeff = make_tensor({t, v}, std::move(cm));
      Tensor onehot_coeff = make_tensor({t, v}, std::move(oh));
      Tensor sm = ops::row_softmax(logits);
      Tensor term = ops::sub(ops::mul(sm, mask_coeff), onehot_coeff);
      accum(in0, ops::mul(ops::broadcast_scalar(adj, {t, v}), term));
      break;
    }
    case OpKind::col_slice:
      if (in0 >= 0) accum(in0, ops::col_pad(adj, nd.i0, nd.i1));
      break;
    case OpKind::col_pad:
      if (in0 >= 0) accum(in0, ops::col_slice(adj, nd.i0, nd.i1));
      break;
  }
}

}  // namespace

Gradients grad(const Tensor& loss, std::span<const Tensor> wrt, bool create_graph) {
  if (!loss.defined()) throw std::invalid_argument("grad: undefined loss");
  if (loss.numel() != 1)
    throw std::invalid_argument("grad: loss must be scalar, got " + shape_str(loss.shape));
  if (!std::isfinite(loss.at(0))) throw std::domain_error("grad: loss is non-finite");
  if (!loss.on_tape()) throw std::invalid_argument("grad: loss is not recorded on a tape");
  Tape& tape = *loss.tape;
  for (const Tensor& w : wrt) {
    if (w.on_tape() && w.tape != &tape)
      throw std::invalid_argument("grad: wrt tensor lives on a different tape");
  }

  const std::int64_t seed_id = loss.node;
  std::vector<Tensor> adj(static_cast<std::size_t>(seed_id) + 1);
  {
    Tape::RecordGuard guard(tape, create_graph);
    adj[static_cast<std::size_t>(seed_id)] = scalar_tensor(1.0);
    const Accum accum = [&](std::int64_t input, Tensor&& contrib) {
      Tensor& slot = adj[static_cast<std::size_t>(input)];
      slot = slot.defined() ? ops::add(slot, contrib) : std::move(contrib);
    };
    for (std::int64_t i = seed_id; i >= 0; --i) {
      if (!adj[static_cast<std::size_t>(i)].defined()) continue;
      backward_node(tape.node(i), adj[static_cast<std::size_t>(i)], accum);
    }
  }

  Gradients g;
  g.tensors.reserve(wrt.size());
  g.unreachable.assign(wrt.size(), 0);
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    const Tensor& w = wrt[k];
    const bool reachable =
        w.on_tape() && w.node <= seed_id && adj[static_cast<std::size_t>(w.node)].defined();
    if (reachable) {
      g.tensors.push_back(adj[static_cast<std::size_t>(w.node)]);
    } else {
      g.tensors.push_back(zeros(w.shape));
      g.unreachable[k] = 1;
    }
  }
  return g;
}

}  // namespace metalm
