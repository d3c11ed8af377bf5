// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Decoder-only transformer, small enough to verify against finite
// differences: pre-norm blocks, learned positional embeddings, masked-position
// cross-entropy loss. Params are immutable snapshots; forward passes over a
// shared snapshot are safe from any thread.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metalm/audit.hpp"
#include "metalm/tensor.hpp"

namespace metalm {

struct ModelConfig {
  std::int64_t vocab_size = 64;
  std::int64_t d_model = 64;
  std::int64_t n_layers = 2;
  std::int64_t n_heads = 2;
  std::int64_t max_seq = 128;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Named parameter collection. Move-only: each live instance is one full
// parameter set and is counted by the allocation audit.
class Params {
 public:
  Params() = default;
  Params(Params&&) = default;
  Params& operator=(Params&&) = default;
  Params(const Params&) = delete;
  Params& operator=(const Params&) = delete;

  Params clone() const;

  void add(std::string name, Tensor t);
  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }
  void set(std::size_t i, Tensor t) { tensors_[i] = std::move(t); }
  const Tensor& get(std::string_view name) const;
  std::int64_t index_of(std::string_view name) const;

  // Handle copies of all tensors, in order (cheap: buffers are shared).
  std::vector<Tensor> tensor_list() const { return tensors_; }
  // Replaces every tensor, keeping names and the audit token.
  void replace_tensors(std::vector<Tensor>&& ts);

  bool all_finite() const;
  std::uint64_t value_hash() const;

  ModelConfig config;
  std::uint64_t seed = 0;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t, std::less<>> index_;
  audit::ParamSetToken token_;
};

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& cfg);

// Deterministic init: weight matrices (embeddings included) ~ N(0, 1/d_model),
// norm gains 1, biases 0.
Params init_model(const ModelConfig& cfg, std::uint64_t seed);

// Logits for every position: row p is the next-token distribution given
// tokens[0..p]. Causal by construction.
Tensor forward_logits(const ModelConfig& cfg, std::span<const Tensor> params,
                      std::span<const std::int32_t> tokens);
Tensor forward_logits(const Params& params, std::span<const std::int32_t> tokens);

// Mean cross-entropy over masked positions; mask[p] scores tokens[p] against
// the prediction from its prefix.
Tensor masked_ce_loss(const Tensor& logits, std::span<const std::int32_t> targets,
                      std::span<const std::uint8_t> mask);

// Sum over scored positions p (p >= 1) of log P(tokens[p] | tokens[0..p-1]).
double sequence_logprob(const Params& params, std::span<const std::int32_t> tokens,
                        std::span<const std::uint8_t> scored);

}  // namespace metalm
