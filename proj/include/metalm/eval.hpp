// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation protocol: per-task scores over several exemplar-sampling seeds,
// reported as average and worst case; win-rate comparison requires strict
// improvement on both. Classification families score macro-F1, lookup tasks
// plain accuracy. The few-shot experiment adapts on a task's train pool and
// re-evaluates on its test pool.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metalm/model.hpp"
#include "metalm/optim.hpp"
#include "metalm/prompt.hpp"
#include "metalm/tasks.hpp"

namespace metalm::eval {

struct EvalConfig {
  std::vector<std::uint64_t> seeds{100, 13, 21, 42, 87};
  std::int32_t examples_per_task = 64;
  std::int32_t shots = 6;  // clamped to 16 exemplars
  prompt::PromptMode mode = prompt::PromptMode::standard;
  std::int32_t threads = 1;
};

struct SeedScore {
  std::uint64_t seed = 0;
  double score = 0.0;
};

struct TaskResult {
  std::string task;
  std::string family;
  std::string domain;
  std::string metric;  // "macro_f1" or "accuracy"
  std::vector<SeedScore> per_seed;
  double average = 0.0;
  double worst = 0.0;
  double stddev = 0.0;
};

struct EvalReport {
  std::vector<TaskResult> tasks;
  double aggregate_average = 0.0;  // mean over tasks of per-task average
  double aggregate_worst = 0.0;    // mean over tasks of per-task worst
  std::int64_t examples_scored = 0;
};

// Unweighted mean of per-class F1 over label_set; classes absent from both
// predictions and golds are excluded from the mean.
double macro_f1(std::span<const std::int32_t> preds, std::span<const std::int32_t> golds,
                std::span<const std::int32_t> label_set);

// Pure function of (params, tasks, cfg, vocab): exemplars are re-sampled per
// seed from each task's train pool, targets walk the test pool.
EvalReport evaluate(const Params& params, std::span<const tasks::TaskData> task_list,
                    const prompt::Vocab& vocab, const EvalConfig& cfg);

// Fraction of tasks where `a` strictly beats `b` on average AND worst.
double win_rate(const EvalReport& a, const EvalReport& b);

struct FewShotResult {
  Params adapted;
  EvalReport before;
  EvalReport after;
};

// `steps` optimizer steps, one adaptation example per step (a single pass
// when steps == adapt_count). Exemplars never include the adaptation example
// itself.
FewShotResult few_shot_adapt(const Params& params, const tasks::TaskData& task,
                             std::int32_t adapt_count, std::int32_t steps, optim::OptHyper hyper,
                             optim::OptKind opt_kind, const prompt::Vocab& vocab,
                             const EvalConfig& cfg, std::uint64_t seed);

}  // namespace metalm::eval
