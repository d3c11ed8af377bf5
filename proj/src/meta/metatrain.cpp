// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/metatrain.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "metalm/ops.hpp"
#include "metalm/tape.hpp"

namespace metalm::meta {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::metaicl: return "metaicl";
    case Mode::fomaml: return "fomaml";
    case Mode::maml: return "maml";
  }
  return "?";
}

void MetaConfig::validate() const {
  if (n < 1 || k < 1) throw std::invalid_argument("MetaConfig: n and k must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("MetaConfig: batch_size must be >= 1");
  if (steps < 0 || warmup_steps < 0) throw std::invalid_argument("MetaConfig: negative step count");
  if (!(alpha >= 0.0) || !(beta >= 0.0))
    throw std::invalid_argument("MetaConfig: learning rates must be >= 0");
  opt.validate();
}

EncodedBatch encode_batch(const std::vector<tasks::PromptExample>& raw, prompt::PromptMode mode,
                          const prompt::Vocab& vocab, std::int64_t max_len) {
  EncodedBatch out;
  out.reserve(raw.size());
  for (const auto& pe : raw) out.push_back(prompt::render(mode, pe.exemplars, pe.target, vocab, max_len));
  return out;
}

Tensor batch_loss(const ModelConfig& cfg, std::span<const Tensor> params,
                  const EncodedBatch& batch) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  Tensor total;
  for (const auto& enc : batch) {
    const Tensor logits = forward_logits(cfg, params, enc.tokens);
    const Tensor loss = masked_ce_loss(logits, enc.tokens, enc.loss_mask);
    total = total.defined() ? ops::add(total, loss) : loss;
  }
  return ops::scale(total, 1.0 / static_cast<double>(batch.size()));
}

double metaicl_train_step(Params& params, optim::OptState& opt, const EncodedBatch& batch) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const Tensor& t : params.tensor_list()) leaves.push_back(tape.leaf(t));
  const Tensor loss = batch_loss(params.config, leaves, batch);
  const double loss_v = loss.scalar();
  if (!std::isfinite(loss_v)) throw std::domain_error("metaicl_train_step: non-finite loss");
  const Gradients g = grad(loss, leaves, /*create_graph=*/false);
  {
    audit::ParamSetToken workspace;  // gradient set applied to theta
    std::vector<Tensor> ts = params.tensor_list();
    optim::apply_step(opt, ts, g.tensors);
    params.replace_tensors(std::move(ts));
  }
  return loss_v;
}

std::vector<AdaptedParams> maml_inner_adapt(const ModelConfig& cfg,
                                            const std::vector<Tensor>& theta,
                                            const std::vector<std::vector<EncodedBatch>>& support,
                                            optim::OptState& inner, bool track_graph) {
  std::vector<AdaptedParams> out;
  out.reserve(support.size());

  // Null adaptation: theta_i == theta exactly, and the inner optimizer is not
  // applied at all (its moments would otherwise absorb support gradients that
  // change nothing).
  if (inner.hyper.lr == 0.0) {
    for (std::size_t i = 0; i < support.size(); ++i) {
      AdaptedParams ap;
      ap.tensors = theta;
      out.push_back(std::move(ap));
    }
    return out;
  }

  for (std::size_t i = 0; i < support.size(); ++i) {
    AdaptedParams ap;
    ap.tensors = theta;
    for (const EncodedBatch& batch : support[i]) {
      if (track_graph) {
        const Tensor loss = batch_loss(cfg, ap.tensors, batch);
        const Gradients g = grad(loss, ap.tensors, /*create_graph=*/true);
        ap.tensors = optim::step_differentiable(inner, ap.tensors, g.tensors);
      } else {
        Tape tape;
        std::vector<Tensor> leaves;
        leaves.reserve(ap.tensors.size());
        for (const Tensor& t : ap.tensors) leaves.push_back(tape.leaf(t.detached()));
        const Tensor loss = batch_loss(cfg, leaves, batch);
        const Gradients g = grad(loss, leaves, /*create_graph=*/false);
        optim::apply_step(inner, ap.tensors, g.tensors);
      }
    }
    out.push_back(std::move(ap));
  }
  return out;
}

namespace {

struct QueryGrad {
  double loss = 0.0;
  Gradients grads;
};

QueryGrad query_gradient(const ModelConfig& cfg, const std::vector<Tensor>& theta_leaves,
                         const std::vector<AdaptedParams>& adapted,
                         const std::vector<std::vector<EncodedBatch>>& query, Order order) {
  if (adapted.size() != query.size())
    throw std::invalid_argument("maml_meta_update: " + std::to_string(adapted.size()) +
                                " adapted sets vs " + std::to_string(query.size()) +
                                " query task sets");
  if (adapted.empty()) throw std::invalid_argument("maml_meta_update: no tasks");
  const double inv_n = 1.0 / static_cast<double>(adapted.size());

  QueryGrad out;
  if (order == Order::second) {
    Tensor meta_loss;
    for (std::size_t i = 0; i < adapted.size(); ++i) {
      Tensor task_loss;
      for (const EncodedBatch& batch : query[i]) {
        const Tensor l = batch_loss(cfg, adapted[i].tensors, batch);
        task_loss = task_loss.defined() ? ops::add(task_loss, l) : l;
      }
      task_loss = ops::scale(task_loss, 1.0 / static_cast<double>(query[i].size()));
      meta_loss = meta_loss.defined() ? ops::add(meta_loss, task_loss) : task_loss;
    }
    meta_loss = ops::scale(meta_loss, inv_n);
    out.loss = meta_loss.scalar();
    if (!std::isfinite(out.loss)) throw std::domain_error("maml_meta_update: non-finite loss");
    out.grads = grad(meta_loss, theta_leaves, /*create_graph=*/false);
    return out;
  }

  // First order: gradients taken at the adapted parameters, dependence of
  // theta_i on theta ignored.
  for (std::size_t i = 0; i < adapted.size(); ++i) {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(adapted[i].tensors.size());
    for (const Tensor& t : adapted[i].tensors) leaves.push_back(tape.leaf(t.detached()));
    Tensor task_loss;
    for (const EncodedBatch& batch : query[i]) {
      const Tensor l = batch_loss(cfg, leaves, batch);
      task_loss = task_loss.defined() ? ops::add(task_loss, l) : l;
    }
    task_loss = ops::scale(task_loss, 1.0 / static_cast<double>(query[i].size()));
    const double lv = task_loss.scalar();
    if (!std::isfinite(lv)) throw std::domain_error("maml_meta_update: non-finite loss");
    out.loss += lv * inv_n;
    Gradients g = grad(task_loss, leaves, /*create_graph=*/false);
    if (out.grads.tensors.empty()) {
      out.grads.tensors.reserve(g.tensors.size());
      out.grads.unreachable.assign(g.unreachable.size(), 0);
      for (Tensor& t : g.tensors) out.grads.tensors.push_back(ops::scale(t, inv_n));
    } else {
      for (std::size_t p = 0; p < g.tensors.size(); ++p)
        out.grads.tensors[p] = ops::add(out.grads.tensors[p], ops::scale(g.tensors[p], inv_n));
    }
  }
  return out;
}

}  // namespace

Gradients maml_meta_gradient(const ModelConfig& cfg, const std::vector<Tensor>& theta_leaves,
                             const std::vector<AdaptedParams>& adapted,
                             const std::vector<std::vector<EncodedBatch>>& query, Order order) {
  return query_gradient(cfg, theta_leaves, adapted, query, order).grads;
}

double maml_meta_update(const ModelConfig& cfg, Params& theta,
                        const std::vector<Tensor>& theta_leaves,
                        const std::vector<AdaptedParams>& adapted,
                        const std::vector<std::vector<EncodedBatch>>& query,
                        optim::OptState& outer, Order order) {
  QueryGrad qg = query_gradient(cfg, theta_leaves, adapted, query, order);
  {
    audit::ParamSetToken workspace;  // the meta-gradient set
    std::vector<Tensor> ts = theta.tensor_list();
    optim::apply_step(outer, ts, qg.grads.tensors);
    theta.replace_tensors(std::move(ts));
  }
  return qg.loss;
}

RunResult run_meta_training(const ModelConfig& cfg, const MetaConfig& mcfg,
                            const tasks::TaskUniverse& universe, Params& theta, std::uint64_t seed,
                            const MetaRunHooks* hooks) {
  cfg.validate();
  mcfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  TrainLog log;

  optim::OptHyper inner_h = mcfg.opt;
  inner_h.lr = mcfg.alpha;
  optim::OptHyper outer_h = mcfg.opt;
  outer_h.lr = mcfg.beta;

  optim::OptState inner, outer;
  if (mcfg.mode == Mode::metaicl) {
    outer = optim::make_opt(mcfg.outer_opt, outer_h, mcfg.convention);
  } else {
    auto pair = optim::make_shared_pair(mcfg.inner_opt, inner_h, mcfg.outer_opt, outer_h,
                                        mcfg.sharing, mcfg.convention);
    inner = std::move(pair.first);
    outer = std::move(pair.second);
  }

  const std::int64_t max_len = cfg.max_seq;
  const std::int32_t shots = universe.cfg.shots;

  if (mcfg.warmup_steps > 0) {
    // plain language-modeling warmup: loss over every position with a prefix
    optim::OptHyper wh = mcfg.opt;
    wh.lr = mcfg.beta;
    optim::OptState wopt = optim::make_opt(optim::OptKind::adamw, wh, mcfg.convention);
    for (std::int64_t w = 1; w <= mcfg.warmup_steps; ++w) {
      StreamRng rng(seed, "warmup-batch", static_cast<std::uint64_t>(w));
      auto raw = tasks::sample_plain_batch(universe, "train", mcfg.batch_size, shots, rng);
      EncodedBatch enc = encode_batch(raw, mcfg.prompt_mode, universe.vocab, max_len);
      for (auto& e : enc) {
        e.loss_mask.assign(e.tokens.size(), 1);
        e.loss_mask[0] = 0;
      }
      try {
        metaicl_train_step(theta, wopt, enc);
      } catch (const std::domain_error&) {
        ++log.skipped_steps;
      }
    }
  }

  std::int32_t consecutive_bad = 0;
  for (std::int64_t step = 1; step <= mcfg.steps; ++step) {
    double loss = std::numeric_limits<double>::quiet_NaN();
    try {
      if (mcfg.mode == Mode::metaicl) {
        StreamRng rng(seed, "metaicl-batch", static_cast<std::uint64_t>(step));
        const auto raw = tasks::sample_plain_batch(universe, "train", mcfg.batch_size, shots, rng);
        loss = metaicl_train_step(theta, outer,
                                  encode_batch(raw, mcfg.prompt_mode, universe.vocab, max_len));
        log.batches_consumed += 1;
        log.meta_updates += 1;
      } else {
        StreamRng rng(seed, "meta-batch", static_cast<std::uint64_t>(step));
        const tasks::TaskBatch tb = tasks::sample_task_batch(universe, "train", mcfg.n, mcfg.k,
                                                             mcfg.batch_size, shots, rng);
        std::vector<std::vector<EncodedBatch>> support(tb.support.size());
        std::vector<std::vector<EncodedBatch>> query(tb.query.size());
        for (std::size_t i = 0; i < tb.support.size(); ++i) {
          for (const auto& b : tb.support[i])
            support[i].push_back(encode_batch(b, mcfg.prompt_mode, universe.vocab, max_len));
          for (const auto& b : tb.query[i])
            query[i].push_back(encode_batch(b, mcfg.prompt_mode, universe.vocab, max_len));
        }

        if (mcfg.sharing == optim::Sharing::none && !inner.stateless()) inner.reset();
        if (hooks && hooks->before_adaptation) hooks->before_adaptation(step, inner, outer);

        if (mcfg.mode == Mode::maml) {
          Tape tape;
          std::vector<Tensor> leaves;
          leaves.reserve(theta.size());
          for (const Tensor& t : theta.tensor_list()) leaves.push_back(tape.leaf(t));
          auto adapted = maml_inner_adapt(cfg, leaves, support, inner, /*track_graph=*/true);
          if (mcfg.sharing == optim::Sharing::copy) optim::copy_state(inner, outer);
          loss = maml_meta_update(cfg, theta, leaves, adapted, query, outer, Order::second);
          if (mcfg.sharing == optim::Sharing::copy) optim::copy_state(outer, inner);
        } else {
          const std::vector<Tensor> theta_vals = theta.tensor_list();
          auto adapted = maml_inner_adapt(cfg, theta_vals, support, inner, /*track_graph=*/false);
          if (mcfg.sharing == optim::Sharing::copy) optim::copy_state(inner, outer);
          loss = maml_meta_update(cfg, theta, theta_vals, adapted, query, outer, Order::first);
          if (mcfg.sharing == optim::Sharing::copy) optim::copy_state(outer, inner);
        }
        log.meta_updates += 1;
        log.batches_consumed += mcfg.batches_per_meta_update();
      }
      consecutive_bad = 0;
    } catch (const std::domain_error& e) {
      ++log.skipped_steps;
      ++consecutive_bad;
      if (consecutive_bad > 10) {
        log.aborted = true;
        log.abort_reason = e.what();
        log.entries.push_back({step, mode_name(mcfg.mode), loss, log.meta_updates,
                               log.batches_consumed, elapsed()});
        break;
      }
    }
    log.entries.push_back(
        {step, mode_name(mcfg.mode), loss, log.meta_updates, log.batches_consumed, elapsed()});
    if (hooks && hooks->on_checkpoint && mcfg.checkpoint_every > 0 &&
        step % mcfg.checkpoint_every == 0) {
      hooks->on_checkpoint(step, theta);
    }
  }
  log.wall_seconds = elapsed();
  RunResult result;
  result.log = std::move(log);
  result.inner = std::move(inner);
  result.outer = std::move(outer);
  return result;
}

}  // namespace metalm::meta
