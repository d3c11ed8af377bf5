// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

#include "metalm/metatrain.hpp"
#include "metalm/rng.hpp"
#include "metalm/tape.hpp"

namespace metalm::eval {

double macro_f1(std::span<const std::int32_t> preds, std::span<const std::int32_t> golds,
                std::span<const std::int32_t> label_set) {
  if (preds.empty() || preds.size() != golds.size())
    throw std::invalid_argument("macro_f1: empty or mismatched inputs");
  const auto in_set = [&](std::int32_t v) {
    return std::find(label_set.begin(), label_set.end(), v) != label_set.end();
  };
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (!in_set(preds[i]) || !in_set(golds[i]))
      throw std::invalid_argument("macro_f1: label outside label_set");

  double sum = 0.0;
  std::int64_t counted = 0;
  for (const std::int32_t cls : label_set) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == cls;
      const bool g = golds[i] == cls;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    if (tp + fp + fn == 0) continue;  // class absent on both sides
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double f1 =
        precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    sum += f1;
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

namespace {

double score_task_seed(const Params& params, const tasks::TaskData& task,
                       const prompt::Vocab& vocab, const EvalConfig& cfg, std::uint64_t seed,
                       std::int64_t* scored_count) {
  if (task.test_pool.empty()) throw std::invalid_argument("evaluate: task has empty test pool");
  const std::int32_t shots = std::min<std::int32_t>(cfg.shots, 16);
  const std::int64_t count =
      std::min<std::int64_t>(cfg.examples_per_task, static_cast<std::int64_t>(task.test_pool.size()));
  std::vector<std::int32_t> preds, golds;
  preds.reserve(static_cast<std::size_t>(count));
  golds.reserve(static_cast<std::size_t>(count));
  for (std::int64_t e = 0; e < count; ++e) {
    const prompt::Example& target = task.test_pool[static_cast<std::size_t>(e)];
    StreamRng rng(seed, "eval-exemplars", static_cast<std::uint64_t>(task.spec.uid),
                  static_cast<std::uint64_t>(e));
    const auto exemplars = tasks::sample_exemplars(task, target, shots, rng);
    const std::int32_t pred =
        prompt::score_labels(cfg.mode, params, exemplars, target.x, task.spec.label_set, vocab,
                             params.config.max_seq);
    preds.push_back(pred);
    golds.push_back(target.y);
  }
  if (scored_count) *scored_count += count;
  if (task.spec.uses_accuracy()) {
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
  }
  return macro_f1(preds, golds, task.spec.label_set);
}

}  // namespace

EvalReport evaluate(const Params& params, std::span<const tasks::TaskData> task_list,
                    const prompt::Vocab& vocab, const EvalConfig& cfg) {
  if (task_list.empty()) throw std::invalid_argument("evaluate: no tasks");
  if (cfg.seeds.empty()) throw std::invalid_argument("evaluate: no seeds");
  EvalReport report;
  report.tasks.resize(task_list.size());

  struct Job {
    std::size_t task_idx;
    std::size_t seed_idx;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < task_list.size(); ++t)
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.push_back({t, s});

  std::vector<double> scores(jobs.size(), 0.0);
  std::vector<std::int64_t> counts(jobs.size(), 0);
  const std::int32_t threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j)
      scores[j] = score_task_seed(params, task_list[jobs[j].task_idx], vocab, cfg,
                                  cfg.seeds[jobs[j].seed_idx], &counts[j]);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::int32_t w = 0; w < threads; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t j = next.fetch_add(1);
          if (j >= jobs.size()) return;
          scores[j] = score_task_seed(params, task_list[jobs[j].task_idx], vocab, cfg,
                                      cfg.seeds[jobs[j].seed_idx], &counts[j]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t t = 0; t < task_list.size(); ++t) {
    TaskResult& tr = report.tasks[t];
    tr.task = task_list[t].spec.name();
    tr.family = tasks::family_name(task_list[t].spec.family);
    tr.domain = task_list[t].spec.domain;
    tr.metric = task_list[t].spec.uses_accuracy() ? "accuracy" : "macro_f1";
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    report.tasks[jobs[j].task_idx].per_seed.push_back(
        {cfg.seeds[jobs[j].seed_idx], scores[j]});
    report.examples_scored += counts[j];
  }
  for (TaskResult& tr : report.tasks) {
    double sum = 0.0, worst = tr.per_seed.front().score;
    for (const auto& s : tr.per_seed) {
      sum += s.score;
      worst = std::min(worst, s.score);
    }
    tr.average = sum / static_cast<double>(tr.per_seed.size());
    tr.worst = worst;
    double var = 0.0;
    for (const auto& s : tr.per_seed) var += (s.score - tr.average) * (s.score - tr.average);
    tr.stddev = std::sqrt(var / static_cast<double>(tr.per_seed.size()));
    report.aggregate_average += tr.average;
    report.aggregate_worst += tr.worst;
  }
  report.aggregate_average /= static_cast<double>(report.tasks.size());
  report.aggregate_worst /= static_cast<double>(report.tasks.size());
  return report;
}

double win_rate(const EvalReport& a, const EvalReport& b) {
  if (a.tasks.size() != b.tasks.size())
    throw std::invalid_argument("win_rate: reports cover different task counts");
  std::int64_t wins = 0;
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    if (a.tasks[i].task != b.tasks[i].task)
      throw std::invalid_argument("win_rate: task mismatch at entry " + std::to_string(i) + ": " +
                                  a.tasks[i].task + " vs " + b.tasks[i].task);
    if (a.tasks[i].average > b.tasks[i].average && a.tasks[i].worst > b.tasks[i].worst) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(a.tasks.size());
}

FewShotResult few_shot_adapt(const Params& params, const tasks::TaskData& task,
                             std::int32_t adapt_count, std::int32_t steps, optim::OptHyper hyper,
                             optim::OptKind opt_kind, const prompt::Vocab& vocab,
                             const EvalConfig& cfg, std::uint64_t seed) {
  if (adapt_count < 1 || steps < 1)
    throw std::invalid_argument("few_shot_adapt: adapt_count and steps must be >= 1");
  if (static_cast<std::size_t>(adapt_count) > task.train_pool.size())
    throw std::invalid_argument("few_shot_adapt: task " + task.spec.name() + " has only " +
                                std::to_string(task.train_pool.size()) + " train examples, need " +
                                std::to_string(adapt_count));

  FewShotResult result{params.clone(), {}, {}};
  result.before = evaluate(params, {&task, 1}, vocab, cfg);

  StreamRng pick_rng(seed, "adapt-pick", static_cast<std::uint64_t>(task.spec.uid));
  const auto picks =
      pick_rng.sample_distinct(static_cast<std::int64_t>(task.train_pool.size()), adapt_count);

  const std::int32_t shots = std::min<std::int32_t>(cfg.shots, 16);
  optim::OptState opt = optim::make_opt(opt_kind, hyper);
  for (std::int32_t s = 0; s < steps; ++s) {
    const prompt::Example& ex =
        task.train_pool[static_cast<std::size_t>(picks[static_cast<std::size_t>(s % adapt_count)])];
    StreamRng ex_rng(seed, "adapt-exemplars", static_cast<std::uint64_t>(task.spec.uid),
                     static_cast<std::uint64_t>(s));
    const auto exemplars = tasks::sample_exemplars(task, ex, shots, ex_rng);
    meta::EncodedBatch batch{prompt::render(cfg.mode, exemplars, ex, vocab, params.config.max_seq)};
    meta::metaicl_train_step(result.adapted, opt, batch);
  }

  result.after = evaluate(result.adapted, {&task, 1}, vocab, cfg);
  return result;
}

}  // namespace metalm::eval
