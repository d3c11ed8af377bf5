// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/model.hpp"

#include <cmath>
#include <stdexcept>

#include "metalm/kernels.hpp"
#include "metalm/ops.hpp"
#include "metalm/rng.hpp"

namespace metalm {

void ModelConfig::validate() const {
  if (vocab_size < 8) throw std::invalid_argument("ModelConfig: vocab_size must be >= 8");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || max_seq <= 0)
    throw std::invalid_argument("ModelConfig: dimensions must be positive");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("ModelConfig: d_model " + std::to_string(d_model) +
                                " not divisible by n_heads " + std::to_string(n_heads));
}

Params Params::clone() const {
  Params p;
  p.names_ = names_;
  p.tensors_ = tensors_;
  p.index_ = index_;
  p.config = config;
  p.seed = seed;
  return p;
}

void Params::add(std::string name, Tensor t) {
  if (index_.count(name)) throw std::invalid_argument("Params::add: duplicate name " + name);
  index_[name] = tensors_.size();
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
}

const Tensor& Params::get(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("Params::get: no parameter named " + std::string(name));
  return tensors_[it->second];
}

std::int64_t Params::index_of(std::string_view name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void Params::replace_tensors(std::vector<Tensor>&& ts) {
  if (ts.size() != tensors_.size())
    throw std::invalid_argument("Params::replace_tensors: count mismatch");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].shape != tensors_[i].shape)
      throw std::invalid_argument("Params::replace_tensors: shape mismatch at " + names_[i]);
  }
  tensors_ = std::move(ts);
}

bool Params::all_finite() const {
  for (const Tensor& t : tensors_)
    if (!kernels::all_finite(t.data(), t.values->size())) return false;
  return true;
}

std::uint64_t Params::value_hash() const {
  // FNV-1a over the raw bits, order-sensitive.
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const Tensor& t : tensors_) {
    for (const auto d : t.shape) mix(&d, sizeof(d));
    mix(t.values->data(), t.values->size() * sizeof(double));
  }
  return h;
}

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::int64_t v = cfg.vocab_size, d = cfg.d_model, s = cfg.max_seq;
  const std::int64_t dff = 4 * d;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("tok_emb", Shape{v, d});
  out.emplace_back("pos_emb", Shape{s, d});
  for (std::int64_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    out.emplace_back(p + "ln1.g", Shape{d});
    out.emplace_back(p + "ln1.b", Shape{d});
    out.emplace_back(p + "attn.wq", Shape{d, d});
    out.emplace_back(p + "attn.bq", Shape{d});
    // no key bias: a per-row constant in attention scores cancels in the
    // softmax, so the parameter would be exactly dead
    out.emplace_back(p + "attn.wk", Shape{d, d});
    out.emplace_back(p + "attn.wv", Shape{d, d});
    out.emplace_back(p + "attn.bv", Shape{d});
    out.emplace_back(p + "attn.wo", Shape{d, d});
    out.emplace_back(p + "attn.bo", Shape{d});
    out.emplace_back(p + "ln2.g", Shape{d});
    out.emplace_back(p + "ln2.b", Shape{d});
    out.emplace_back(p + "mlp.w1", Shape{d, dff});
    out.emplace_back(p + "mlp.b1", Shape{dff});
    out.emplace_back(p + "mlp.w2", Shape{dff, d});
    out.emplace_back(p + "mlp.b2", Shape{d});
  }
  out.emplace_back("ln_f.g", Shape{d});
  out.emplace_back("ln_f.b", Shape{d});
  out.emplace_back("head.w", Shape{d, v});
  return out;
}

namespace {

bool is_norm_gain(const std::string& name) {
  return name.ends_with("ln1.g") || name.ends_with("ln2.g") || name.ends_with("ln_f.g") ||
         name == "ln_f.g";
}

}  // namespace

Params init_model(const ModelConfig& cfg, std::uint64_t seed) {
  const auto layout = param_layout(cfg);
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  Params params;
  params.config = cfg;
  params.seed = seed;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    const std::int64_t n = numel(shape);
    std::vector<double> vals(static_cast<std::size_t>(n), 0.0);
    if (shape.size() == 2) {
      StreamRng rng(seed, "init", i);
      for (auto& x : vals) x = rng.next_normal() * std_dev;
    } else if (is_norm_gain(name)) {
      for (auto& x : vals) x = 1.0;
    }
    params.add(name, make_tensor(shape, std::move(vals)));
  }
  return params;
}

namespace {

struct LayerIdx {
  std::size_t base;
  std::size_t operator[](std::size_t off) const { return base + off; }
};

}  // namespace

Tensor forward_logits(const ModelConfig& cfg, std::span<const Tensor> params,
                      std::span<const std::int32_t> tokens) {
  cfg.validate();
  const std::size_t expected = param_layout(cfg).size();
  if (params.size() != expected)
    throw std::invalid_argument("forward_logits: expected " + std::to_string(expected) +
                                " parameter tensors, got " + std::to_string(params.size()));
  const std::int64_t t = static_cast<std::int64_t>(tokens.size());
  if (t == 0) throw std::invalid_argument("forward_logits: empty token sequence");
  if (t > cfg.max_seq)
    throw std::invalid_argument("forward_logits: sequence length " + std::to_string(t) +
                                " exceeds max_seq " + std::to_string(cfg.max_seq));
  for (auto id : tokens)
    if (id < 0 || id >= cfg.vocab_size)
      throw std::invalid_argument("forward_logits: token id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(cfg.vocab_size) + ")");

  std::vector<std::int32_t> positions(static_cast<std::size_t>(t));
  for (std::int64_t p = 0; p < t; ++p) positions[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(p);

  const std::int64_t d = cfg.d_model;
  const std::int64_t heads = cfg.n_heads;
  const std::int64_t dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor x = ops::add(ops::gather_rows(params[0], tokens),
                      ops::gather_rows(params[1], positions));

  for (std::int64_t l = 0; l < cfg.n_layers; ++l) {
    const LayerIdx li{2 + static_cast<std::size_t>(l) * 15};
    Tensor h = ops::layer_norm(x, params[li[0]], params[li[1]]);
    Tensor q = ops::add(ops::matmul(h, params[li[2]]), ops::broadcast_row(params[li[3]], t));
    Tensor k = ops::matmul(h, params[li[4]]);
    Tensor v = ops::add(ops::matmul(h, params[li[5]]), ops::broadcast_row(params[li[6]], t));

    Tensor att;
    for (std::int64_t hd = 0; hd < heads; ++hd) {
      const std::int64_t off = hd * dh;
      Tensor qh = ops::col_slice(q, off, dh);
      Tensor kh = ops::col_slice(k, off, dh);
      Tensor vh = ops::col_slice(v, off, dh);
      Tensor scores = ops::scale(ops::matmul(qh, kh, false, true), inv_sqrt_dh);
      Tensor probs = ops::causal_softmax(scores);
      Tensor oh = ops::col_pad(ops::matmul(probs, vh), off, d);
      att = att.defined() ? ops::add(att, oh) : oh;
    }
    att = ops::add(ops::matmul(att, params[li[7]]), ops::broadcast_row(params[li[8]], t));
    x = ops::add(x, att);

    Tensor h2 = ops::layer_norm(x, params[li[9]], params[li[10]]);
    Tensor m = ops::add(ops::matmul(h2, params[li[11]]), ops::broadcast_row(params[li[12]], t));
    m = ops::gelu(m);
    m = ops::add(ops::matmul(m, params[li[13]]), ops::broadcast_row(params[li[14]], t));
    x = ops::add(x, m);
  }

  const std::size_t fin = 2 + static_cast<std::size_t>(cfg.n_layers) * 15;
  x = ops::layer_norm(x, params[fin], params[fin + 1]);
  return ops::matmul(x, params[fin + 2]);
}

Tensor forward_logits(const Params& params, std::span<const std::int32_t> tokens) {
  return forward_logits(params.config, params.tensor_list(), tokens);
}

Tensor masked_ce_loss(const Tensor& logits, std::span<const std::int32_t> targets,
                      std::span<const std::uint8_t> mask) {
  return ops::masked_ce(logits, targets, mask);
}

double sequence_logprob(const Params& params, std::span<const std::int32_t> tokens,
                        std::span<const std::uint8_t> scored) {
  if (scored.size() != tokens.size())
    throw std::invalid_argument("sequence_logprob: mask length mismatch");
  std::int64_t count = 0;
  for (std::size_t p = 0; p < scored.size(); ++p) {
    if (!scored[p]) continue;
    if (p == 0)
      throw std::invalid_argument("sequence_logprob: position 0 has no prefix to score from");
    ++count;
  }
  if (count == 0) throw std::invalid_argument("sequence_logprob: no scored positions");

  const Tensor logits = forward_logits(params, tokens);
  const std::int64_t v = logits.shape[1];
  double total = 0.0;
  for (std::size_t p = 1; p < scored.size(); ++p) {
    if (!scored[p]) continue;
    const double* row = logits.data() + (static_cast<std::int64_t>(p) - 1) * v;
    double mx = row[0];
    for (std::int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
    total += row[tokens[p]] - (mx + std::log(denom));
  }
  return total;
}

}  // namespace metalm
