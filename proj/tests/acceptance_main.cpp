// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Each criterion prints one PASS/FAIL line with the
// measured numbers and its tolerance; the binary exits non-zero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <vector>

#include "metalm/audit.hpp"
#include "metalm/eval.hpp"
#include "metalm/fdcheck.hpp"
#include "metalm/metatrain.hpp"
#include "metalm/ops.hpp"
#include "metalm/rng.hpp"
#include "metalm/tape.hpp"

using namespace metalm;

namespace {

struct Acceptance {
  int failures = 0;

  void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s  %-38s  %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

meta::EncodedBatch random_batch(const ModelConfig& cfg, std::uint64_t seed, std::int32_t count,
                                std::int64_t len) {
  meta::EncodedBatch batch;
  StreamRng rng(seed, "acceptance-batch");
  for (std::int32_t e = 0; e < count; ++e) {
    prompt::EncodedExample enc;
    for (std::int64_t p = 0; p < len; ++p)
      enc.tokens.push_back(static_cast<std::int32_t>(rng.next_below(cfg.vocab_size)));
    enc.loss_mask.assign(enc.tokens.size(), 0);
    bool any = false;
    for (std::size_t p = 1; p < enc.tokens.size(); ++p)
      if (rng.next_double() < 0.4) {
        enc.loss_mask[p] = 1;
        any = true;
      }
    if (!any) enc.loss_mask[enc.tokens.size() - 1] = 1;
    batch.push_back(std::move(enc));
  }
  return batch;
}

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.vocab_size = 48;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.max_seq = 32;
  return cfg;
}

// ---------------------------------------------------------------- criterion 1
void gradient_correctness(Acceptance& acc) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.vocab_size = 32;
  cfg.d_model = 32;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.max_seq = 32;
  const Params params = init_model(cfg, 100);
  const meta::EncodedBatch batch = random_batch(cfg, 1, 2, 16);
  const ScalarFn f = [&](const std::vector<Tensor>& ts) {
    return meta::batch_loss(cfg, ts, batch);
  };
  FdOptions opts;
  opts.max_coords_per_tensor = 48;
  const double err = finite_difference_check(f, params.tensor_list(), opts);
  const double dt = seconds_since(t0);
  std::ostringstream detail;
  detail << "max rel err " << err << " (tol 1e-6), " << dt << "s (limit 30s)";
  acc.report("gradient correctness", err < 1e-6 && dt < 30.0, detail.str());
}

// ---------------------------------------------------------------- criterion 2
void second_order_correctness(Acceptance& acc) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig cfg = micro_config();
  const Params params = init_model(cfg, 100);
  double worst = 0.0;
  for (const std::int32_t k : {1, 2}) {
    for (const std::int32_t n : {1, 2}) {
      std::vector<std::vector<meta::EncodedBatch>> support, query;
      for (std::int32_t i = 0; i < n; ++i) {
        support.push_back({});
        query.push_back({});
        for (std::int32_t j = 0; j < k; ++j) {
          support.back().push_back(random_batch(cfg, 1000 + 100 * k + 10 * n + i * k + j, 2, 8));
          query.back().push_back(random_batch(cfg, 2000 + 100 * k + 10 * n + i * k + j, 2, 8));
        }
      }
      optim::OptHyper ih;
      ih.lr = 1e-2;
      ih.weight_decay = 0.0;
      const ScalarFn meta_map = [&](const std::vector<Tensor>& ts) {
        optim::OptState inner = optim::make_opt(optim::OptKind::sgd, ih);
        std::vector<Tensor> plain;
        for (const Tensor& t : ts) plain.push_back(t.detached());
        const auto adapted = meta::maml_inner_adapt(cfg, plain, support, inner, false);
        double total = 0.0;
        for (std::size_t i = 0; i < adapted.size(); ++i) {
          double task = 0.0;
          for (const auto& b : query[i])
            task += meta::batch_loss(cfg, adapted[i].tensors, b).scalar();
          total += task / static_cast<double>(query[i].size());
        }
        return scalar_tensor(total / static_cast<double>(adapted.size()));
      };

      Tape tape;
      std::vector<Tensor> leaves;
      for (const Tensor& t : params.tensor_list()) leaves.push_back(tape.leaf(t));
      optim::OptState inner = optim::make_opt(optim::OptKind::sgd, ih);
      const auto adapted = meta::maml_inner_adapt(cfg, leaves, support, inner, true);
      const Gradients meta_grad =
          meta::maml_meta_gradient(cfg, leaves, adapted, query, meta::Order::second);
      FdOptions opts;
      opts.max_coords_per_tensor = 5;
      opts.coord_seed = 100 * static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(n);
      worst = std::max(worst,
                       fd_max_rel_error(meta_map, params.tensor_list(), meta_grad.tensors, opts));
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream detail;
  detail << "k,n in {1,2}^2, max rel err " << worst << " (tol 1e-4), " << dt << "s (limit 120s)";
  acc.report("second-order correctness", worst < 1e-4 && dt < 120.0, detail.str());
}

// ---------------------------------------------------------------- criterion 3
void quadratic_oracle(Acceptance& acc) {
  Tape tape;
  const Tensor theta = tape.leaf(scalar_tensor(1.0));
  const Tensor ls = ops::scale(ops::mul(theta, theta), 0.5 * 2.0);  // A_S = 2
  const Gradients g = grad(ls, {&theta, 1}, true);
  optim::OptHyper h;
  h.lr = 0.1;
  h.weight_decay = 0.0;
  optim::OptState sgd = optim::make_opt(optim::OptKind::sgd, h);
  const auto adapted = optim::step_differentiable(sgd, {theta}, g.tensors);
  const Tensor lq = ops::scale(ops::mul(adapted[0], adapted[0]), 0.5 * 1.0);  // A_Q = 1
  const double second = grad(lq, {&theta, 1}).tensors[0].at(0);
  const double first = grad(lq, {&adapted[0], 1}).tensors[0].at(0);
  std::ostringstream detail;
  detail << "second-order " << second << " (want 0.64), first-order " << first
         << " (want 0.8), tol 1e-8";
  acc.report("analytic bi-level oracle",
             std::abs(second - 0.64) < 1e-8 && std::abs(first - 0.8) < 1e-8, detail.str());
}

// ---------------------------------------------------------------- criterion 4
void first_order_gap_scaling(Acceptance& acc) {
  const ModelConfig cfg = micro_config();
  const Params params = init_model(cfg, 100);
  std::vector<std::vector<meta::EncodedBatch>> support{{random_batch(cfg, 31, 2, 8)}};
  std::vector<std::vector<meta::EncodedBatch>> query{{random_batch(cfg, 32, 2, 8)}};

  const auto gap = [&](double alpha) {
    optim::OptHyper h;
    h.lr = alpha;
    h.weight_decay = 0.0;
    Tape tape;
    std::vector<Tensor> leaves;
    for (const Tensor& t : params.tensor_list()) leaves.push_back(tape.leaf(t));
    optim::OptState inner = optim::make_opt(optim::OptKind::sgd, h);
    const auto adapted = meta::maml_inner_adapt(cfg, leaves, support, inner, true);
    const Gradients second =
        meta::maml_meta_gradient(cfg, leaves, adapted, query, meta::Order::second);
    const Gradients first =
        meta::maml_meta_gradient(cfg, leaves, adapted, query, meta::Order::first);
    double sq = 0.0;
    for (std::size_t i = 0; i < second.tensors.size(); ++i)
      for (std::int64_t c = 0; c < second.tensors[i].numel(); ++c) {
        const double d = second.tensors[i].at(c) - first.tensors[i].at(c);
        sq += d * d;
      }
    return std::sqrt(sq);
  };
  const double g1 = gap(1e-2), g2 = gap(5e-3), g3 = gap(2.5e-3);
  const double r12 = g1 / g2, r23 = g2 / g3;
  const bool ok = r12 > 1.7 && r12 < 2.3 && r23 > 1.7 && r23 < 2.3;
  std::ostringstream detail;
  detail << "gap(1e-2)/gap(5e-3) = " << r12 << ", gap(5e-3)/gap(2.5e-3) = " << r23
         << " (want [1.7, 2.3])";
  acc.report("first-order gap halves with alpha", ok, detail.str());
}

// ---------------------------------------------------------------- criterion 5
void meta_update_bookkeeping(Acceptance& acc) {
  const ModelConfig cfg = micro_config();
  tasks::UniverseConfig ucfg;
  ucfg.train_tasks = 6;
  ucfg.test_tasks = 3;
  ucfg.unseen_tasks = 2;
  ucfg.train_pool = 48;
  ucfg.test_pool = 16;
  ucfg.shots = 2;
  ucfg.mapping_words = 4;
  ucfg.lookup_keys = 2;
  const prompt::Vocab vocab = prompt::make_default_vocab(48);
  const tasks::TaskUniverse u = tasks::make_task_universe(ucfg, vocab, 100);

  meta::MetaConfig mcfg;
  mcfg.mode = meta::Mode::maml;
  mcfg.alpha = 1e-3;
  mcfg.beta = 1e-3;
  mcfg.batch_size = 2;
  mcfg.sharing = optim::Sharing::shared;

  mcfg.n = 1;
  mcfg.k = 1;
  mcfg.steps = 15;
  Params t1 = init_model(cfg, 100);
  const auto run1 = meta::run_meta_training(cfg, mcfg, u, t1, 100);
  const bool ok1 = run1.log.meta_updates == 15 && run1.log.batches_consumed == 30;

  mcfg.n = 4;
  mcfg.k = 1;
  mcfg.steps = 8;
  Params t4 = init_model(cfg, 100);
  const auto run4 = meta::run_meta_training(cfg, mcfg, u, t4, 100);
  const bool ok4 = run4.log.meta_updates == 8 && run4.log.batches_consumed == 64;

  std::ostringstream detail;
  detail << "MAML-2-1: " << run1.log.batches_consumed << "/" << run1.log.meta_updates
         << " batches/updates (want 2 each); MAML-2-4: " << run4.log.batches_consumed << "/"
         << run4.log.meta_updates << " (want 8 each)";
  acc.report("meta-update bookkeeping", ok1 && ok4, detail.str());
}

// ---------------------------------------------------------------- criterion 6
void shared_moment_equivalence(Acceptance& acc) {
  optim::OptHyper h;
  h.lr = 1e-3;
  auto [inner, outer] = optim::make_shared_pair(optim::OptKind::adamw, h, optim::OptKind::adamw,
                                                h, optim::Sharing::shared);
  optim::OptState single = optim::make_opt(optim::OptKind::adamw, h);
  StreamRng rng(5, "acc-trace");
  bool trace_ok = true;
  std::vector<Tensor> pa{full({16}, 0.25)}, pb{full({16}, 0.25)};
  for (int i = 0; i < 8; ++i) {
    std::vector<double> v(16);
    for (auto& x : v) x = rng.next_normal();
    const Tensor g = make_tensor({16}, std::move(v));
    optim::apply_step(i % 2 ? outer : inner, pa, {&g, 1});
    optim::apply_step(single, pb, {&g, 1});
    trace_ok = trace_ok && inner.store->m[0] == single.store->m[0] &&
               inner.store->v[0] == single.store->v[0] && same_values(pa[0], pb[0]);
  }
  trace_ok = trace_ok && inner.store->t == 8 && outer.store->t == 8;

  // sharing = none: moments are zero at the start of every adaptation phase
  const ModelConfig cfg = micro_config();
  tasks::UniverseConfig ucfg;
  ucfg.train_tasks = 6;
  ucfg.test_tasks = 3;
  ucfg.unseen_tasks = 2;
  ucfg.train_pool = 48;
  ucfg.test_pool = 16;
  ucfg.shots = 2;
  ucfg.mapping_words = 4;
  ucfg.lookup_keys = 2;
  const prompt::Vocab vocab = prompt::make_default_vocab(48);
  const tasks::TaskUniverse u = tasks::make_task_universe(ucfg, vocab, 100);
  meta::MetaConfig mcfg;
  mcfg.mode = meta::Mode::maml;
  mcfg.n = 1;
  mcfg.k = 1;
  mcfg.alpha = 1e-3;
  mcfg.beta = 1e-3;
  mcfg.batch_size = 2;
  mcfg.sharing = optim::Sharing::none;
  mcfg.steps = 4;
  bool reset_ok = true;
  std::int64_t phases = 0;
  meta::MetaRunHooks hooks;
  hooks.before_adaptation = [&](std::int64_t, const optim::OptState& in, const optim::OptState&) {
    ++phases;
    if (!in.store) return;
    if (in.store->t != 0) reset_ok = false;
    for (const auto& buf : in.store->m)
      for (const double x : buf)
        if (x != 0.0) reset_ok = false;
    for (const auto& buf : in.store->v)
      for (const double x : buf)
        if (x != 0.0) reset_ok = false;
  };
  Params theta = init_model(cfg, 100);
  meta::run_meta_training(cfg, mcfg, u, theta, 100, &hooks);
  reset_ok = reset_ok && phases == 4;

  std::ostringstream detail;
  detail << (trace_ok ? "interleaved trace bit-identical, t=8" : "trace diverged") << "; "
         << (reset_ok ? "none-mode moments zero at every phase" : "stale moments found");
  acc.report("shared-moment equivalence", trace_ok && reset_ok, detail.str());
}

// ------------------------------------------------------- criteria 7 and 8
struct EndToEnd {
  ModelConfig model;
  tasks::UniverseConfig ucfg;
  meta::MetaConfig mcfg;
  eval::EvalConfig ecfg;
  tasks::TaskUniverse universe;
  Params maml_params;
  bool trained = false;
};

EndToEnd make_end_to_end() {
  EndToEnd e;
  e.model = ModelConfig{};  // the desk-scale defaults
  e.ucfg = tasks::UniverseConfig{};
  e.mcfg.mode = meta::Mode::maml;
  e.mcfg.n = 1;
  e.mcfg.k = 1;
  e.mcfg.alpha = 1.5e-3;
  e.mcfg.beta = 1.5e-3;
  e.mcfg.sharing = optim::Sharing::shared;
  e.mcfg.steps = 1500;
  e.mcfg.batch_size = 4;
  e.ecfg.examples_per_task = 48;
  e.ecfg.shots = e.ucfg.shots;
  e.universe =
      tasks::make_task_universe(e.ucfg, prompt::make_default_vocab(e.model.vocab_size), 100);
  return e;
}

double mapping_accuracy(const EndToEnd& e, const Params& params) {
  // plain accuracy on the unseen label-mapping task, averaged over seeds
  for (const auto& task : e.universe.unseen_tasks) {
    if (task.spec.family != tasks::Family::label_mapping) continue;
    double sum = 0.0;
    for (const auto seed : e.ecfg.seeds) {
      std::int64_t hits = 0, total = 0;
      for (std::int64_t i = 0; i < e.ecfg.examples_per_task &&
                               i < static_cast<std::int64_t>(task.test_pool.size());
           ++i) {
        const auto& target = task.test_pool[static_cast<std::size_t>(i)];
        StreamRng rng(seed, "eval-exemplars", static_cast<std::uint64_t>(task.spec.uid),
                      static_cast<std::uint64_t>(i));
        const auto exemplars = tasks::sample_exemplars(task, target, e.ecfg.shots, rng);
        const auto pred = prompt::score_labels(e.ecfg.mode, params, exemplars, target.x,
                                               task.spec.label_set, e.universe.vocab,
                                               e.model.max_seq);
        hits += pred == target.y;
        ++total;
      }
      sum += static_cast<double>(hits) / static_cast<double>(total);
    }
    return sum / static_cast<double>(e.ecfg.seeds.size());
  }
  return 0.0;
}

void end_to_end_learning(Acceptance& acc, EndToEnd& e) {
  const auto t0 = std::chrono::steady_clock::now();

  Params raw = init_model(e.model, 100);
  const eval::EvalReport raw_unseen = eval::evaluate(raw, e.universe.unseen_tasks,
                                                     e.universe.vocab, e.ecfg);

  e.maml_params = init_model(e.model, 100);
  const auto maml_run =
      meta::run_meta_training(e.model, e.mcfg, e.universe, e.maml_params, 100);
  e.trained = !maml_run.log.aborted;
  const eval::EvalReport maml_unseen =
      eval::evaluate(e.maml_params, e.universe.unseen_tasks, e.universe.vocab, e.ecfg);

  meta::MetaConfig icl_cfg = e.mcfg;
  icl_cfg.mode = meta::Mode::metaicl;
  Params icl_params = init_model(e.model, 100);
  const auto icl_run = meta::run_meta_training(e.model, icl_cfg, e.universe, icl_params, 100);
  const eval::EvalReport icl_unseen =
      eval::evaluate(icl_params, e.universe.unseen_tasks, e.universe.vocab, e.ecfg);

  const double map_acc = mapping_accuracy(e, e.maml_params);
  const double dt = seconds_since(t0);

  const bool maml_beats_raw =
      maml_unseen.aggregate_average >= raw_unseen.aggregate_average + 0.10;
  const bool icl_beats_raw = icl_unseen.aggregate_average > raw_unseen.aggregate_average;
  const bool ok = maml_beats_raw && map_acc >= 0.75 && icl_beats_raw && dt < 1800.0 &&
                  !maml_run.log.aborted && !icl_run.log.aborted;

  std::ostringstream detail;
  detail << "unseen avg: raw " << raw_unseen.aggregate_average << ", maml "
         << maml_unseen.aggregate_average << " (want raw+0.10), metaicl "
         << icl_unseen.aggregate_average << " (want > raw); mapping acc " << map_acc
         << " (want >= 0.75); " << dt << "s (limit 1800s)";
  acc.report("end-to-end learning (directional)", ok, detail.str());
}

void few_shot_protocol(Acceptance& acc, const EndToEnd& e) {
  const Params& base = e.maml_params;
  optim::OptHyper h0;
  h0.lr = 0.0;
  h0.weight_decay = 0.0;
  optim::OptHyper h7;
  h7.lr = 1e-7;

  bool identical_ok = true;
  double delta_sum = 0.0;
  std::int64_t count = 0;
  eval::EvalConfig ecfg = e.ecfg;
  ecfg.examples_per_task = 32;
  for (const auto& task : e.universe.unseen_tasks) {
    const eval::FewShotResult r0 = eval::few_shot_adapt(base, task, 16, 16, h0,
                                                        optim::OptKind::adamw, e.universe.vocab,
                                                        ecfg, 100);
    for (std::size_t s = 0; s < r0.before.tasks[0].per_seed.size(); ++s)
      identical_ok = identical_ok && r0.before.tasks[0].per_seed[s].score ==
                                         r0.after.tasks[0].per_seed[s].score;

    const eval::FewShotResult r7 = eval::few_shot_adapt(base, task, 16, 16, h7,
                                                        optim::OptKind::adamw, e.universe.vocab,
                                                        ecfg, 100);
    delta_sum += r7.after.tasks[0].average - r7.before.tasks[0].average;
    ++count;
  }
  const double mean_delta = delta_sum / static_cast<double>(count);
  const bool stable_ok = mean_delta >= -0.01;
  std::ostringstream detail;
  detail << "16 examples / 16 steps / " << e.ecfg.seeds.size() << " seeds; lr=0 "
         << (identical_ok ? "identical" : "drifted") << "; lr=1e-7 mean delta " << mean_delta
         << " (want >= -0.01)";
  acc.report("few-shot adaptation protocol", identical_ok && stable_ok, detail.str());
}

// ---------------------------------------------------------------- criterion 9
double brute_macro_f1(const std::vector<std::int32_t>& preds,
                      const std::vector<std::int32_t>& golds,
                      const std::vector<std::int32_t>& labels) {
  std::map<std::int32_t, std::map<std::int32_t, std::int64_t>> conf;
  for (std::size_t i = 0; i < preds.size(); ++i) ++conf[golds[i]][preds[i]];
  double sum = 0.0;
  std::int64_t counted = 0;
  for (const auto cls : labels) {
    std::int64_t tp = 0, gold_n = 0, pred_n = 0;
    for (const auto& [g, row] : conf)
      for (const auto& [p, c] : row) {
        if (g == cls && p == cls) tp += c;
        if (g == cls) gold_n += c;
        if (p == cls) pred_n += c;
      }
    if (gold_n + pred_n == 0) continue;
    const double prec = pred_n == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_n);
    const double rec = gold_n == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_n);
    sum += prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

void metric_oracle(Acceptance& acc) {
  bool ok = eval::macro_f1(std::vector<std::int32_t>{0, 0, 1}, std::vector<std::int32_t>{0, 1, 1},
                           std::vector<std::int32_t>{0, 1}) == 2.0 / 3.0;
  StreamRng rng(17, "acc-f1");
  std::int64_t cases = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::int32_t n_labels = static_cast<std::int32_t>(2 + rng.next_below(5));
    std::vector<std::int32_t> labels;
    for (std::int32_t l = 0; l < n_labels; ++l) labels.push_back(l);
    const std::int64_t n = 1 + rng.next_below(50);
    std::vector<std::int32_t> p, g;
    for (std::int64_t i = 0; i < n; ++i) {
      p.push_back(static_cast<std::int32_t>(rng.next_below(n_labels)));
      g.push_back(static_cast<std::int32_t>(rng.next_below(n_labels)));
    }
    ok = ok && eval::macro_f1(p, g, labels) == brute_macro_f1(p, g, labels);
    ++cases;
  }
  std::ostringstream detail;
  detail << cases << " randomized cases exact, worked example 2/3 reproduced";
  acc.report("metric oracle", ok, detail.str());
}

// --------------------------------------------------------------- criterion 10
void memory_proportionality(Acceptance& acc) {
  const ModelConfig cfg = micro_config();
  tasks::UniverseConfig ucfg;
  ucfg.train_tasks = 6;
  ucfg.test_tasks = 3;
  ucfg.unseen_tasks = 2;
  ucfg.train_pool = 48;
  ucfg.test_pool = 16;
  ucfg.shots = 2;
  ucfg.mapping_words = 4;
  ucfg.lookup_keys = 2;
  const prompt::Vocab vocab = prompt::make_default_vocab(48);
  const tasks::TaskUniverse u = tasks::make_task_universe(ucfg, vocab, 100);

  std::ostringstream detail;
  bool ok = true;
  for (const std::int32_t n : {1, 4}) {
    StreamRng rng(3, "audit", static_cast<std::uint64_t>(n));
    const auto tb = tasks::sample_task_batch(u, "train", n, 1, 2, ucfg.shots, rng);
    std::vector<std::vector<meta::EncodedBatch>> support(tb.support.size());
    std::vector<std::vector<meta::EncodedBatch>> query(tb.query.size());
    for (std::size_t i = 0; i < tb.support.size(); ++i) {
      for (const auto& b : tb.support[i])
        support[i].push_back(meta::encode_batch(b, prompt::PromptMode::standard, vocab, cfg.max_seq));
      for (const auto& b : tb.query[i])
        query[i].push_back(meta::encode_batch(b, prompt::PromptMode::standard, vocab, cfg.max_seq));
    }
    Params theta = init_model(cfg, 100);
    optim::OptHyper h;
    h.lr = 1e-2;
    h.weight_decay = 0.0;
    auto [inner, outer] = optim::make_shared_pair(optim::OptKind::adamw, h, optim::OptKind::adamw,
                                                  h, optim::Sharing::shared);
    audit::reset_peak();
    {
      Tape tape;
      std::vector<Tensor> leaves;
      for (const Tensor& t : theta.tensor_list()) leaves.push_back(tape.leaf(t));
      const auto adapted = meta::maml_inner_adapt(cfg, leaves, support, inner, true);
      meta::maml_meta_update(cfg, theta, leaves, adapted, query, outer, meta::Order::second);
    }
    const std::int64_t peak = audit::peak_param_sets();
    detail << "n=" << n << ": peak " << peak << " (want " << n + 2 << ")  ";
    ok = ok && peak == n + 2;
  }
  acc.report("memory proportionality", ok, detail.str());
}

}  // namespace

int main() {
  Acceptance acc;
  gradient_correctness(acc);
  second_order_correctness(acc);
  quadratic_oracle(acc);
  first_order_gap_scaling(acc);
  meta_update_bookkeeping(acc);
  shared_moment_equivalence(acc);

  EndToEnd e = make_end_to_end();
  end_to_end_learning(acc, e);
  few_shot_protocol(acc, e);

  metric_oracle(acc);
  memory_proportionality(acc);

  if (acc.failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria FAILED\n", acc.failures);
  return 1;
}
