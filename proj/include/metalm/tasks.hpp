// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic in-context-learning task distribution. Three families whose
// targets are unpredictable without exemplars:
//   label_mapping  - per-task random partition of a word range into classes
//   linear_sign    - sign of a per-task +/-1 weight vector on +/-1 features
//   kv_lookup      - per-task key->value table, scored with plain accuracy
// Each family owns four disjoint content-token ranges ("domains"); the last
// domain of each family is reserved for the unseen-domain split and never
// appears in training tasks.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metalm/prompt.hpp"
#include "metalm/rng.hpp"

namespace metalm::tasks {

enum class Family { label_mapping, linear_sign, kv_lookup };
const char* family_name(Family f);

struct TaskSpec {
  Family family = Family::label_mapping;
  std::string domain;
  std::uint64_t task_seed = 0;
  std::int32_t uid = -1;
  std::vector<std::int32_t> label_set;  // ordered candidate label token ids

  // label_mapping / kv_lookup: items are the domain's word/key tokens and
  // item_class[i] indexes label_set.
  std::vector<std::int32_t> items;
  std::vector<std::int32_t> item_class;

  // linear_sign
  std::vector<std::int32_t> weights;  // +/-1 per feature
  std::int32_t plus_tok = -1, minus_tok = -1;
  std::int32_t n_features = 0;

  bool uses_accuracy() const { return family == Family::kv_lookup; }
  std::string name() const;
  bool same_params(const TaskSpec& other) const;
};

struct TaskData {
  TaskSpec spec;
  std::vector<prompt::Example> train_pool;
  std::vector<prompt::Example> test_pool;
};

struct UniverseConfig {
  std::int32_t train_tasks = 20;
  std::int32_t test_tasks = 6;
  std::int32_t unseen_tasks = 2;
  std::int32_t train_pool = 192;
  std::int32_t test_pool = 64;
  std::int32_t shots = 6;            // exemplars per rendered prompt
  std::int32_t mapping_words = 6;    // words per mapping domain
  std::int32_t mapping_labels = 2;   // classes per mapping task
  std::int32_t sign_features = 3;    // odd, so the sign never ties
  std::int32_t lookup_keys = 4;      // keys per lookup domain
  std::int32_t lookup_values = 2;    // distinct values per lookup task
  double train_fraction = 1.0;       // stratified subsample of train pools
};

struct TaskUniverse {
  UniverseConfig cfg;
  prompt::Vocab vocab;
  std::vector<TaskData> train_tasks;
  std::vector<TaskData> test_tasks;
  std::vector<TaskData> unseen_tasks;

  const std::vector<TaskData>& split(std::string_view name) const;
};

// Deterministic in (cfg, vocab, seed). Train/test tasks draw from the first
// two domains of each family, unseen tasks only from the reserved third;
// duplicate task parameters are redrawn so the splits stay disjoint.
TaskUniverse make_task_universe(const UniverseConfig& cfg, const prompt::Vocab& vocab,
                                std::uint64_t seed);

// k distinct exemplars from the task's train pool, never the target's own
// instance. For retrieval families one exemplar is guaranteed to share the
// target's x whenever the pool allows it.
std::vector<prompt::Example> sample_exemplars(const TaskData& task,
                                              const prompt::Example& target, std::int32_t k,
                                              StreamRng& rng);

struct PromptExample {
  std::vector<prompt::Example> exemplars;
  prompt::Example target;
};

struct TaskBatch {
  std::vector<std::int32_t> task_index;  // into the sampled split
  // [task][batch][example]; support and query targets are disjoint per task
  std::vector<std::vector<std::vector<PromptExample>>> support;
  std::vector<std::vector<std::vector<PromptExample>>> query;
};

TaskBatch sample_task_batch(const TaskUniverse& universe, std::string_view split, std::int32_t n,
                            std::int32_t k, std::int32_t batch_size, std::int32_t shots,
                            StreamRng& rng);

// One batch from one uniformly drawn task (the multi-task fine-tuning diet).
std::vector<PromptExample> sample_plain_batch(const TaskUniverse& universe, std::string_view split,
                                              std::int32_t batch_size, std::int32_t shots,
                                              StreamRng& rng);

// Per-label counts scaled by `fraction` with largest-remainder rounding;
// selected examples keep their original pool order.
std::vector<prompt::Example> stratified_subsample(const std::vector<prompt::Example>& pool,
                                                  double fraction, StreamRng& rng);

// Task-aware reference solver, used as the Bayes-accuracy oracle in tests.
std::int32_t rule_based_solve(const TaskSpec& spec, std::span<const prompt::Example> exemplars,
                              const std::vector<std::int32_t>& target_x);

// Audit dump, one record per task: family domain task_seed split
void dump_universe(std::ostream& os, const TaskUniverse& universe);

}  // namespace metalm::tasks
