// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Append-only differentiation tape. Nodes reference earlier nodes only, so
// the record order is already a topological order. The backward pass is
// written in terms of the same tensor ops that build forward graphs: under
// grad(..., create_graph=true) it appends ordinary differentiable nodes,
// which is what makes a second backward pass possible.

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "metalm/tensor.hpp"

namespace metalm {

enum class OpKind : std::uint8_t {
  leaf,
  matmul,
  add,
  mul,
  div,
  scale,
  add_scalar,
  sqrt_op,
  exp_op,
  erf_op,
  sum_all,
  broadcast_scalar,
  row_sum,
  broadcast_col,
  col_sum,
  broadcast_row,
  gather_rows,
  scatter_rows,
  causal_softmax,
  row_softmax,
  masked_ce,
  col_slice,
  col_pad,
};

const char* op_name(OpKind k);

struct TapeNode {
  OpKind kind = OpKind::leaf;
  std::array<std::int64_t, 2> in{{-1, -1}};  // differentiable input node ids
  std::vector<Tensor> saved;                 // values needed by the backward rule
  Shape aux_shape;
  double c0 = 0.0;
  std::int64_t i0 = 0, i1 = 0;
  bool b0 = false, b1 = false;
  std::shared_ptr<const std::vector<std::int32_t>> ids;
  std::shared_ptr<const std::vector<std::uint8_t>> mask;
};

struct Gradients {
  std::vector<Tensor> tensors;
  std::vector<std::uint8_t> unreachable;  // 1 where the parameter did not reach the loss

  bool any_unreachable() const {
    for (auto u : unreachable)
      if (u) return true;
    return false;
  }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }
  bool recording() const { return record_; }

  // Registers an off-tape value as a differentiable leaf.
  Tensor leaf(const Tensor& value);

  std::int64_t emit(TapeNode&& n);
  const TapeNode& node(std::int64_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void attach_output(std::int64_t id, const Tensor& out) {
    nodes_[static_cast<std::size_t>(id)].saved.push_back(out);
  }

  class RecordGuard {
   public:
    RecordGuard(Tape& t, bool on) : t_(t), prev_(t.record_) { t_.record_ = on; }
    ~RecordGuard() { t_.record_ = prev_; }
    RecordGuard(const RecordGuard&) = delete;
    RecordGuard& operator=(const RecordGuard&) = delete;

   private:
    Tape& t_;
    bool prev_;
  };

 private:
  std::vector<TapeNode> nodes_;
  bool record_ = true;
};

// Reverse-mode gradient of a scalar loss with respect to `wrt`. With
// create_graph the returned gradients are live tape nodes and can be
// differentiated again; without it they are plain values.
// Parameters that the loss does not reach come back zero-filled with their
// `unreachable` flag set.
Gradients grad(const Tensor& loss, std::span<const Tensor> wrt, bool create_graph = false);

}  // namespace metalm
