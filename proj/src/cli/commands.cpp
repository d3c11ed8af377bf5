// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "metalm/checkpoint.hpp"
#include "metalm/config.hpp"
#include "metalm/eval.hpp"
#include "metalm/metatrain.hpp"
#include "metalm/optim.hpp"

namespace metalm::cli {

namespace fs = std::filesystem;

namespace {

std::int32_t env_threads() {
  if (const char* e = std::getenv("METALM_THREADS")) {
    const int v = std::atoi(e);
    if (v >= 1) return v;
  }
  return 1;
}

ExperimentConfig load_config(const std::string& path, const CommandOverrides& ov) {
  ExperimentConfig cfg = parse_config_file(path);
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.seed) cfg.master_seed = *ov.seed;
  cfg.eval_cfg.threads = env_threads();
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
}

std::string fmt_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

tasks::TaskUniverse build_universe(const ExperimentConfig& cfg) {
  const prompt::Vocab vocab = prompt::make_default_vocab(cfg.model.vocab_size);
  return tasks::make_task_universe(cfg.task_cfg, vocab, cfg.master_seed);
}

std::string report_rows(const eval::EvalReport& report, const std::string& setting) {
  std::ostringstream os;
  for (const auto& tr : report.tasks)
    for (const auto& s : tr.per_seed)
      os << setting << '\t' << tr.task << '\t' << s.seed << '\t' << tr.metric << '\t'
         << fmt_score(s.score) << '\n';
  return os.str();
}

std::string summary_rows(const eval::EvalReport& report, const std::string& setting) {
  std::ostringstream os;
  for (const auto& tr : report.tasks)
    os << setting << '\t' << tr.task << '\t' << tr.metric << '\t' << fmt_score(tr.average) << '\t'
       << fmt_score(tr.worst) << '\t' << fmt_score(tr.stddev) << '\n';
  os << setting << "\t__aggregate__\tmean\t" << fmt_score(report.aggregate_average) << '\t'
     << fmt_score(report.aggregate_worst) << "\t-\n";
  return os.str();
}

int guarded(const char* what, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::cerr << what << ": error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int cmd_train(const std::string& config_path, const CommandOverrides& ov) {
  return guarded("train", [&]() -> int {
    const ExperimentConfig cfg = load_config(config_path, ov);
    fs::create_directories(cfg.out_dir);
    write_text(fs::path(cfg.out_dir) / "resolved.cfg", serialize_config(cfg));

    const tasks::TaskUniverse universe = build_universe(cfg);
    {
      std::ostringstream os;
      tasks::dump_universe(os, universe);
      write_text(fs::path(cfg.out_dir) / "universe.tsv", os.str());
    }
    {
      // debug dump: a few rendered prompts from the first training task
      std::ostringstream os;
      StreamRng rng(cfg.master_seed, "prompt-dump");
      const auto raw =
          tasks::sample_plain_batch(universe, "train", std::min(8, cfg.task_cfg.train_pool),
                                    universe.cfg.shots, rng);
      for (const auto& pe : raw)
        os << prompt::dump_prompt_line(prompt::render(cfg.meta_cfg.prompt_mode, pe.exemplars,
                                                      pe.target, universe.vocab,
                                                      cfg.model.max_seq))
           << '\n';
      write_text(fs::path(cfg.out_dir) / "prompts_sample.txt", os.str());
    }

    Params params = init_model(cfg.model, cfg.master_seed);
    meta::MetaRunHooks hooks;
    hooks.on_checkpoint = [&cfg](std::int64_t step, const Params& p) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_step%06lld.bin",
                    static_cast<long long>(step));
      save_params((fs::path(cfg.out_dir) / name).string(), p);
    };
    meta::RunResult run =
        meta::run_meta_training(cfg.model, cfg.meta_cfg, universe, params, cfg.master_seed, &hooks);

    save_params((fs::path(cfg.out_dir) / "checkpoint.bin").string(), params);
    if (cfg.meta_cfg.mode != meta::Mode::metaicl)
      optim::save_opt_state((fs::path(cfg.out_dir) / "opt_inner.bin").string(), run.inner);
    optim::save_opt_state((fs::path(cfg.out_dir) / "opt_outer.bin").string(), run.outer);

    {
      std::ostringstream os;
      for (const auto& e : run.log.entries) {
        char loss[32];
        std::snprintf(loss, sizeof(loss), "%.9g", e.loss);
        os << e.step << '\t' << e.mode << '\t' << loss << '\t' << e.meta_updates << '\t'
           << e.batches << '\t' << e.elapsed_s << '\n';
      }
      write_text(fs::path(cfg.out_dir) / "train_log.tsv", os.str());
    }
    {
      const std::int64_t freq =
          cfg.meta_cfg.mode == meta::Mode::metaicl ? 1 : cfg.meta_cfg.batches_per_meta_update();
      double final_loss = 0.0;
      for (auto it = run.log.entries.rbegin(); it != run.log.entries.rend(); ++it)
        if (std::isfinite(it->loss)) {
          final_loss = it->loss;
          break;
        }
      std::ostringstream os;
      os << "mode\t" << meta::mode_name(cfg.meta_cfg.mode) << '\n';
      os << "steps\t" << run.log.entries.size() << '\n';
      os << "meta_updates\t" << run.log.meta_updates << '\n';
      os << "batches_consumed\t" << run.log.batches_consumed << '\n';
      os << "meta_update_frequency\t" << freq << '\n';
      os << "skipped_steps\t" << run.log.skipped_steps << '\n';
      os << "aborted\t" << (run.log.aborted ? "yes" : "no") << '\n';
      os << "final_loss\t" << fmt_score(final_loss) << '\n';
      write_text(fs::path(cfg.out_dir) / "train_summary.tsv", os.str());
    }
    std::cout << "train: mode=" << meta::mode_name(cfg.meta_cfg.mode)
              << " meta_updates=" << run.log.meta_updates
              << " batches=" << run.log.batches_consumed << " meta-update frequency="
              << (cfg.meta_cfg.mode == meta::Mode::metaicl
                      ? 1
                      : cfg.meta_cfg.batches_per_meta_update())
              << " wall=" << run.log.wall_seconds << "s\n";
    if (run.log.aborted) {
      std::cerr << "train: aborted: " << run.log.abort_reason << '\n';
      return 3;
    }
    return 0;
  });
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint_path,
                 const CommandOverrides& ov) {
  return guarded("evaluate", [&]() -> int {
    const ExperimentConfig cfg = load_config(config_path, ov);
    Params params = load_params(checkpoint_path);
    if (!(params.config == cfg.model)) {
      std::ostringstream os;
      os << "checkpoint/config model mismatch: checkpoint has vocab=" << params.config.vocab_size
         << " d_model=" << params.config.d_model << " layers=" << params.config.n_layers
         << " heads=" << params.config.n_heads << " max_seq=" << params.config.max_seq
         << "; config has vocab=" << cfg.model.vocab_size << " d_model=" << cfg.model.d_model
         << " layers=" << cfg.model.n_layers << " heads=" << cfg.model.n_heads
         << " max_seq=" << cfg.model.max_seq;
      throw std::runtime_error(os.str());
    }
    fs::create_directories(cfg.out_dir);
    const tasks::TaskUniverse universe = build_universe(cfg);

    const eval::EvalReport all = eval::evaluate(params, universe.test_tasks, universe.vocab,
                                                cfg.eval_cfg);
    const eval::EvalReport unseen = eval::evaluate(params, universe.unseen_tasks, universe.vocab,
                                                   cfg.eval_cfg);
    write_text(fs::path(cfg.out_dir) / "report.tsv",
               report_rows(all, "all-tasks") + report_rows(unseen, "unseen-domain"));
    write_text(fs::path(cfg.out_dir) / "summary.tsv",
               summary_rows(all, "all-tasks") + summary_rows(unseen, "unseen-domain"));
    std::cout << "evaluate: all-tasks avg=" << fmt_score(all.aggregate_average)
              << " worst=" << fmt_score(all.aggregate_worst)
              << " | unseen-domain avg=" << fmt_score(unseen.aggregate_average)
              << " worst=" << fmt_score(unseen.aggregate_worst) << '\n';
    return 0;
  });
}

int cmd_adapt(const std::string& config_path, const std::string& checkpoint_path,
              const CommandOverrides& ov) {
  return guarded("adapt", [&]() -> int {
    const ExperimentConfig cfg = load_config(config_path, ov);
    Params params = load_params(checkpoint_path);
    if (!(params.config == cfg.model))
      throw std::runtime_error("checkpoint model shape differs from config");
    fs::create_directories(cfg.out_dir);
    const tasks::TaskUniverse universe = build_universe(cfg);

    optim::OptHyper hyper = cfg.meta_cfg.opt;
    hyper.lr = cfg.adapt_lr;

    std::ostringstream rows, summary;
    for (const auto& task : universe.unseen_tasks) {
      const eval::FewShotResult r =
          eval::few_shot_adapt(params, task, cfg.adapt_count, cfg.adapt_steps, hyper,
                               optim::OptKind::adamw, universe.vocab, cfg.eval_cfg,
                               cfg.master_seed);
      const auto emit = [&](const eval::EvalReport& rep, const char* phase) {
        for (const auto& tr : rep.tasks)
          for (const auto& s : tr.per_seed)
            rows << tr.task << '\t' << phase << '\t' << s.seed << '\t' << tr.metric << '\t'
                 << fmt_score(s.score) << '\n';
        summary << rep.tasks[0].task << '\t' << phase << '\t' << fmt_score(rep.tasks[0].average)
                << '\t' << fmt_score(rep.tasks[0].worst) << '\n';
      };
      emit(r.before, "before");
      emit(r.after, "after");
    }
    write_text(fs::path(cfg.out_dir) / "adapt_report.tsv", rows.str());
    write_text(fs::path(cfg.out_dir) / "adapt_summary.tsv", summary.str());
    std::cout << "adapt: wrote " << (fs::path(cfg.out_dir) / "adapt_report.tsv").string() << '\n';
    return 0;
  });
}

int cmd_ablate_optimizers(const std::string& config_path, const CommandOverrides& ov) {
  return guarded("ablate-optimizers", [&]() -> int {
    const ExperimentConfig base = load_config(config_path, ov);
    fs::create_directories(base.out_dir);

    struct Combo {
      optim::OptKind inner, outer;
      optim::Sharing sharing;
      const char* label;
      const char* note;
    };
    const Combo combos[5] = {
        {optim::OptKind::sgd, optim::OptKind::sgd, optim::Sharing::none, "SGD+SGD", ""},
        {optim::OptKind::sgd, optim::OptKind::adamw, optim::Sharing::none, "SGD+AdamW", ""},
        {optim::OptKind::adamw, optim::OptKind::sgd, optim::Sharing::none, "AdamW+SGD",
         "* identical setting to SGD+SGD"},
        {optim::OptKind::adamw, optim::OptKind::adamw, optim::Sharing::none, "AdamW+AdamW (d)",
         ""},
        {optim::OptKind::adamw, optim::OptKind::adamw, optim::Sharing::shared, "AdamW+AdamW", ""},
    };

    std::ostringstream table;
    table << "optimizer\tsharing";
    for (const auto seed : base.ablate_seeds) table << "\tseed=" << seed;
    table << "\tnote\n";

    for (const auto& combo : combos) {
      table << combo.label << '\t' << optim::sharing_name(combo.sharing);
      for (const auto seed : base.ablate_seeds) {
        ExperimentConfig cfg = base;
        cfg.master_seed = seed;
        cfg.meta_cfg.mode = meta::Mode::maml;
        cfg.meta_cfg.inner_opt = combo.inner;
        cfg.meta_cfg.outer_opt = combo.outer;
        cfg.meta_cfg.sharing = combo.sharing;
        cfg.meta_cfg.steps = base.ablate_steps;
        const tasks::TaskUniverse universe = build_universe(cfg);
        Params params = init_model(cfg.model, cfg.master_seed);
        meta::run_meta_training(cfg.model, cfg.meta_cfg, universe, params, cfg.master_seed);
        const eval::EvalReport rep =
            eval::evaluate(params, universe.test_tasks, universe.vocab, cfg.eval_cfg);
        table << '\t' << fmt_score(rep.aggregate_average);
      }
      table << '\t' << combo.note << '\n';
    }
    write_text(fs::path(base.out_dir) / "ablation.tsv", table.str());
    std::cout << table.str();
    return 0;
  });
}

int cmd_verify(std::ostream& os) {
  return guarded("verify", [&]() -> int { return run_verify_suite(os) ? 0 : 2; });
}

}  // namespace metalm::cli
