// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// The three training loops over rendered prompt batches:
//   metaicl  - multi-task fine-tuning, one gradient step per batch
//   fomaml   - inner adaptation on values, query gradients taken at the
//              adapted parameters and averaged (first-order)
//   maml     - inner adaptation recorded on the tape, query loss
//              differentiated through the inner updates (second-order)
// One meta-update consumes exactly 2*k*n batches (n tasks, k support and k
// query batches each).

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metalm/audit.hpp"
#include "metalm/model.hpp"
#include "metalm/optim.hpp"
#include "metalm/prompt.hpp"
#include "metalm/tasks.hpp"

namespace metalm::meta {

enum class Mode { metaicl, fomaml, maml };
enum class Order { first, second };

const char* mode_name(Mode m);

struct MetaConfig {
  Mode mode = Mode::maml;
  std::int32_t n = 1;  // tasks per meta-step
  std::int32_t k = 1;  // support/query batches per task = inner steps per task
  double alpha = 1e-3;
  double beta = 1e-3;
  optim::OptKind inner_opt = optim::OptKind::adamw;
  optim::OptKind outer_opt = optim::OptKind::adamw;
  optim::Sharing sharing = optim::Sharing::shared;
  optim::MomentConvention convention = optim::MomentConvention::read_time;
  std::int64_t steps = 2000;
  std::int32_t batch_size = 4;
  prompt::PromptMode prompt_mode = prompt::PromptMode::standard;
  optim::OptHyper opt;  // beta1/beta2/eps/weight_decay/grad_clip template
  std::int64_t warmup_steps = 0;
  std::int64_t checkpoint_every = 0;  // 0 = final only

  std::int64_t batches_per_meta_update() const { return 2ll * k * n; }
  void validate() const;
};

struct TrainLogEntry {
  std::int64_t step = 0;
  std::string mode;
  double loss = 0.0;
  std::int64_t meta_updates = 0;
  std::int64_t batches = 0;
  double elapsed_s = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::int64_t meta_updates = 0;
  std::int64_t batches_consumed = 0;
  std::int64_t skipped_steps = 0;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

// Adapted parameter set theta_i. Counts as one live full parameter set.
struct AdaptedParams {
  std::vector<Tensor> tensors;
  audit::ParamSetToken token;
};

using EncodedBatch = std::vector<prompt::EncodedExample>;

EncodedBatch encode_batch(const std::vector<tasks::PromptExample>& raw, prompt::PromptMode mode,
                          const prompt::Vocab& vocab, std::int64_t max_len);

// Mean masked cross-entropy over the batch (tape-recorded when params are).
Tensor batch_loss(const ModelConfig& cfg, std::span<const Tensor> params,
                  const EncodedBatch& batch);

// One multi-task fine-tuning step; returns the batch loss.
double metaicl_train_step(Params& params, optim::OptState& opt, const EncodedBatch& batch);

// k sequential inner steps per task starting from theta (the tape leaves when
// track_graph, plain values otherwise). theta itself is never mutated. The
// inner optimizer state threads through tasks in index order; alpha == 0
// short-circuits to theta_i = theta without touching the optimizer.
std::vector<AdaptedParams> maml_inner_adapt(const ModelConfig& cfg,
                                            const std::vector<Tensor>& theta,
                                            const std::vector<std::vector<EncodedBatch>>& support,
                                            optim::OptState& inner, bool track_graph);

// Averages per-task query losses, differentiates (through the inner updates
// for Order::second, at the adapted parameters for Order::first) and applies
// one outer step to theta. Returns the mean query loss.
double maml_meta_update(const ModelConfig& cfg, Params& theta,
                        const std::vector<Tensor>& theta_leaves,
                        const std::vector<AdaptedParams>& adapted,
                        const std::vector<std::vector<EncodedBatch>>& query,
                        optim::OptState& outer, Order order);

// Meta-gradient only (no optimizer step); used by the oracle suites.
Gradients maml_meta_gradient(const ModelConfig& cfg, const std::vector<Tensor>& theta_leaves,
                             const std::vector<AdaptedParams>& adapted,
                             const std::vector<std::vector<EncodedBatch>>& query, Order order);

struct MetaRunHooks {
  // Fired at the start of every adaptation phase, after any sharing reset.
  std::function<void(std::int64_t step, const optim::OptState& inner, const optim::OptState& outer)>
      before_adaptation;
  std::function<void(std::int64_t step, const Params& params)> on_checkpoint;
};

struct RunResult {
  TrainLog log;
  optim::OptState inner;  // unused (default) in metaicl mode
  optim::OptState outer;
};

RunResult run_meta_training(const ModelConfig& cfg, const MetaConfig& mcfg,
                            const tasks::TaskUniverse& universe, Params& theta, std::uint64_t seed,
                            const MetaRunHooks* hooks = nullptr);

}  // namespace metalm::meta
