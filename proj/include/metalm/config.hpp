// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value experiment configuration with dotted sections. A run is a
// pure function of its config file plus the master seed; serialize_config
// echoes every key with the defaults applied.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metalm/eval.hpp"
#include "metalm/metatrain.hpp"
#include "metalm/model.hpp"
#include "metalm/tasks.hpp"

namespace metalm::cli {

struct ExperimentConfig {
  ModelConfig model;
  tasks::UniverseConfig task_cfg;
  meta::MetaConfig meta_cfg;
  eval::EvalConfig eval_cfg;

  std::int32_t adapt_count = 16;
  std::int32_t adapt_steps = 16;
  double adapt_lr = 1e-7;

  std::vector<std::uint64_t> ablate_seeds{10, 20};
  std::int64_t ablate_steps = 400;

  std::string out_dir = "runs/out";
  std::uint64_t master_seed = 100;

  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);

// Every key, defaults included, in a fixed order; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace metalm::cli
