// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metalm/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"metalm: meta-training a tiny language model for in-context learning"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool have_out = false, have_seed = false;

  const auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    if (needs_checkpoint)
      sub->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    sub->add_option("--out", out_dir, "output directory override")
        ->each([&](const std::string&) { have_out = true; });
    sub->add_option("--seed", seed, "master seed override")
        ->each([&](const std::string&) { have_seed = true; });
  };

  CLI::App* train = app.add_subcommand("train", "run a training loop and write a checkpoint");
  add_common(train, false);
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the task splits");
  add_common(evaluate, true);
  CLI::App* adapt = app.add_subcommand("adapt", "very-few-shot adaptation on unseen-domain tasks");
  add_common(adapt, true);
  CLI::App* ablate =
      app.add_subcommand("ablate-optimizers", "inner/outer optimizer grid with sharing modes");
  add_common(ablate, false);
  app.add_subcommand("verify", "run the verification oracles");

  CLI11_PARSE(app, argc, argv);

  metalm::cli::CommandOverrides ov;
  if (have_out) ov.out_dir = out_dir;
  if (have_seed) ov.seed = seed;

  if (train->parsed()) return metalm::cli::cmd_train(config_path, ov);
  if (evaluate->parsed()) return metalm::cli::cmd_evaluate(config_path, checkpoint_path, ov);
  if (adapt->parsed()) return metalm::cli::cmd_adapt(config_path, checkpoint_path, ov);
  if (ablate->parsed()) return metalm::cli::cmd_ablate_optimizers(config_path, ov);
  return metalm::cli::cmd_verify(std::cout);
}
