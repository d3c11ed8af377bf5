// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Release-gate oracles: finite differences against the tape, the closed-form
// bi-level instance, optimizer trace equivalences, and the metric oracle.
// Each prints one PASS/FAIL line.

#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include "metalm/commands.hpp"
#include "metalm/eval.hpp"
#include "metalm/fdcheck.hpp"
#include "metalm/metatrain.hpp"
#include "metalm/ops.hpp"
#include "metalm/rng.hpp"
#include "metalm/tape.hpp"

namespace metalm::cli {

namespace {

struct Suite {
  std::ostream& os;
  bool all_ok = true;

  void report(const std::string& name, bool ok, const std::string& detail) {
    os << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << detail << ")\n";
    all_ok = all_ok && ok;
  }
};

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.vocab_size = 48;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.max_seq = 32;
  return cfg;
}

meta::EncodedBatch random_batch(const ModelConfig& cfg, std::uint64_t seed, std::int32_t count,
                                std::int64_t len) {
  meta::EncodedBatch batch;
  StreamRng rng(seed, "verify-batch");
  for (std::int32_t e = 0; e < count; ++e) {
    prompt::EncodedExample enc;
    for (std::int64_t p = 0; p < len; ++p)
      enc.tokens.push_back(static_cast<std::int32_t>(rng.next_below(cfg.vocab_size)));
    enc.loss_mask.assign(enc.tokens.size(), 0);
    bool any = false;
    for (std::size_t p = 1; p < enc.tokens.size(); ++p) {
      if (rng.next_double() < 0.4) {
        enc.loss_mask[p] = 1;
        any = true;
      }
    }
    if (!any) enc.loss_mask[enc.tokens.size() - 1] = 1;
    batch.push_back(std::move(enc));
  }
  return batch;
}

void check_first_order_fd(Suite& s) {
  const ModelConfig cfg = micro_config();
  const Params params = init_model(cfg, 7);
  const meta::EncodedBatch batch = random_batch(cfg, 11, 2, 8);
  const ScalarFn f = [&](const std::vector<Tensor>& ts) {
    return meta::batch_loss(cfg, ts, batch);
  };
  FdOptions opts;
  opts.max_coords_per_tensor = 24;
  const double err = finite_difference_check(f, params.tensor_list(), opts);
  std::ostringstream detail;
  detail << "max rel err " << err << " vs 1e-6";
  s.report("first-order gradients vs finite differences", err < 1e-6, detail.str());
}

// theta -> mean query loss after k SGD inner steps, evaluated two ways
void check_second_order_fd(Suite& s) {
  const ModelConfig cfg = micro_config();
  const Params params = init_model(cfg, 13);
  const double alpha = 1e-2;
  const std::int32_t k = 2, n = 2;
  std::vector<std::vector<meta::EncodedBatch>> support, query;
  for (std::int32_t i = 0; i < n; ++i) {
    support.push_back({});
    query.push_back({});
    for (std::int32_t j = 0; j < k; ++j) {
      support.back().push_back(random_batch(cfg, 100 + 10 * i + j, 2, 8));
      query.back().push_back(random_batch(cfg, 200 + 10 * i + j, 2, 8));
    }
  }
  optim::OptHyper ih;
  ih.lr = alpha;
  ih.weight_decay = 0.0;

  const ScalarFn meta_map = [&](const std::vector<Tensor>& ts) {
    optim::OptState inner = optim::make_opt(optim::OptKind::sgd, ih);
    std::vector<Tensor> plain;
    plain.reserve(ts.size());
    for (const Tensor& t : ts) plain.push_back(t.detached());
    const auto adapted = meta::maml_inner_adapt(cfg, plain, support, inner, false);
    double total = 0.0;
    for (std::size_t i = 0; i < adapted.size(); ++i) {
      double task = 0.0;
      for (const auto& b : query[i]) task += meta::batch_loss(cfg, adapted[i].tensors, b).scalar();
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
  opts.max_coords_per_tensor = 6;
  const double err = fd_max_rel_error(meta_map, params.tensor_list(), meta_grad.tensors, opts);
  std::ostringstream detail;
  detail << "k=2 n=2, max rel err " << err << " vs 1e-4";
  s.report("second-order meta-gradient vs finite differences", err < 1e-4, detail.str());
}

void check_quadratic_oracle(Suite& s) {
  const double a_s = 2.0, a_q = 1.0, alpha = 0.1;
  Tape tape;
  const Tensor theta = tape.leaf(scalar_tensor(1.0));
  const Tensor support_loss = ops::scale(ops::mul(theta, theta), 0.5 * a_s);
  const Gradients g = grad(support_loss, {&theta, 1}, /*create_graph=*/true);
  optim::OptHyper h;
  h.lr = alpha;
  h.weight_decay = 0.0;
  optim::OptState sgd = optim::make_opt(optim::OptKind::sgd, h);
  const auto adapted = optim::step_differentiable(sgd, {theta}, g.tensors);
  const Tensor query_loss = ops::scale(ops::mul(adapted[0], adapted[0]), 0.5 * a_q);
  const Gradients second = grad(query_loss, {&theta, 1});
  const Gradients first = grad(query_loss, {&adapted[0], 1});
  const double second_v = second.tensors[0].at(0);
  const double first_v = first.tensors[0].at(0);
  std::ostringstream detail;
  detail << "meta-grad " << second_v << " (want 0.64), first-order " << first_v << " (want 0.8)";
  s.report("bi-level quadratic oracle",
           std::abs(second_v - 0.64) < 1e-8 && std::abs(first_v - 0.8) < 1e-8, detail.str());
}

void check_shared_trace(Suite& s) {
  optim::OptHyper h;
  h.lr = 1e-3;
  auto [inner, outer] = optim::make_shared_pair(optim::OptKind::adamw, h, optim::OptKind::adamw, h,
                                                optim::Sharing::shared);
  optim::OptState single = optim::make_opt(optim::OptKind::adamw, h);

  StreamRng rng(5, "trace");
  std::vector<Tensor> grads;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> v(8);
    for (auto& x : v) x = rng.next_normal();
    grads.push_back(make_tensor({8}, std::move(v)));
  }
  std::vector<Tensor> pa{full({8}, 0.5)}, pb{full({8}, 0.5)};
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    optim::OptState& st = (i % 2 == 0) ? inner : outer;
    optim::apply_step(st, pa, {&grads[static_cast<std::size_t>(i)], 1});
    optim::apply_step(single, pb, {&grads[static_cast<std::size_t>(i)], 1});
    ok = ok && inner.store->m[0] == single.store->m[0] && inner.store->v[0] == single.store->v[0];
    ok = ok && same_values(pa[0], pb[0]);
  }
  ok = ok && inner.store->t == 5 && outer.store->t == 5;
  s.report("shared moments: interleaved trace == single optimizer, t=5", ok,
           ok ? "bit-identical" : "trace diverged");
}

void check_alpha_zero_trace(Suite& s) {
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
  const prompt::Vocab vocab = prompt::make_default_vocab(cfg.vocab_size);
  const tasks::TaskUniverse universe = tasks::make_task_universe(ucfg, vocab, 21);

  optim::OptHyper ih;
  ih.lr = 0.0;
  optim::OptHyper oh;
  oh.lr = 1e-3;
  auto [inner, outer] = optim::make_shared_pair(optim::OptKind::adamw, ih, optim::OptKind::adamw,
                                                oh, optim::Sharing::shared);
  optim::OptState plain = optim::make_opt(optim::OptKind::adamw, oh);

  Params theta_a = init_model(cfg, 3);
  Params theta_b = theta_a.clone();
  bool ok = true;
  for (int step = 1; step <= 4 && ok; ++step) {
    StreamRng rng(77, "alpha0", static_cast<std::uint64_t>(step));
    const auto tb = tasks::sample_task_batch(universe, "train", 1, 1, 2, ucfg.shots, rng);
    std::vector<std::vector<meta::EncodedBatch>> support(1), query(1);
    support[0].push_back(
        meta::encode_batch(tb.support[0][0], prompt::PromptMode::standard, vocab, cfg.max_seq));
    query[0].push_back(
        meta::encode_batch(tb.query[0][0], prompt::PromptMode::standard, vocab, cfg.max_seq));

    Tape tape;
    std::vector<Tensor> leaves;
    for (const Tensor& t : theta_a.tensor_list()) leaves.push_back(tape.leaf(t));
    const auto adapted = meta::maml_inner_adapt(cfg, leaves, support, inner, true);
    meta::maml_meta_update(cfg, theta_a, leaves, adapted, query, outer, meta::Order::second);

    meta::metaicl_train_step(theta_b, plain, query[0][0]);
    ok = theta_a.value_hash() == theta_b.value_hash();
  }
  s.report("alpha=0 shared MAML == MetaICL on the query stream", ok,
           ok ? "parameter traces bit-identical over 4 steps" : "traces diverged");
}

double brute_macro_f1(std::span<const std::int32_t> preds, std::span<const std::int32_t> golds,
                      std::span<const std::int32_t> labels) {
  std::map<std::int32_t, std::map<std::int32_t, std::int64_t>> conf;  // gold -> pred -> n
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

void check_macro_f1(Suite& s) {
  const std::vector<std::int32_t> preds{0, 0, 1}, golds{0, 1, 1}, labels{0, 1};
  const double worked = eval::macro_f1(preds, golds, labels);
  bool ok = std::abs(worked - 2.0 / 3.0) < 1e-15;

  StreamRng rng(9, "f1-cases");
  for (int c = 0; c < 200 && ok; ++c) {
    const std::int32_t n_labels = static_cast<std::int32_t>(2 + rng.next_below(4));
    std::vector<std::int32_t> ls;
    for (std::int32_t l = 0; l < n_labels; ++l) ls.push_back(l);
    const std::int64_t n = 1 + rng.next_below(30);
    std::vector<std::int32_t> p, g;
    for (std::int64_t i = 0; i < n; ++i) {
      p.push_back(static_cast<std::int32_t>(rng.next_below(n_labels)));
      g.push_back(static_cast<std::int32_t>(rng.next_below(n_labels)));
    }
    ok = std::abs(eval::macro_f1(p, g, ls) - brute_macro_f1(p, g, ls)) == 0.0;
  }
  std::ostringstream detail;
  detail << "worked example " << worked << " (want 2/3), 200 random cases vs brute force";
  s.report("macro-F1 vs confusion-matrix oracle", ok, detail.str());
}

void check_none_reset(Suite& s) {
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
  const prompt::Vocab vocab = prompt::make_default_vocab(cfg.vocab_size);
  const tasks::TaskUniverse universe = tasks::make_task_universe(ucfg, vocab, 23);

  meta::MetaConfig mcfg;
  mcfg.mode = meta::Mode::maml;
  mcfg.n = 1;
  mcfg.k = 1;
  mcfg.alpha = 1e-3;
  mcfg.beta = 1e-3;
  mcfg.sharing = optim::Sharing::none;
  mcfg.steps = 3;
  mcfg.batch_size = 2;

  bool ok = true;
  std::int64_t phases = 0;
  meta::MetaRunHooks hooks;
  hooks.before_adaptation = [&](std::int64_t, const optim::OptState& inner,
                                const optim::OptState&) {
    ++phases;
    if (!inner.store) return;
    if (inner.store->t != 0) ok = false;
    for (const auto& b : inner.store->m)
      for (const double x : b)
        if (x != 0.0) ok = false;
    for (const auto& b : inner.store->v)
      for (const double x : b)
        if (x != 0.0) ok = false;
  };
  Params theta = init_model(cfg, 4);
  meta::run_meta_training(cfg, mcfg, universe, theta, 31, &hooks);
  ok = ok && phases == 3;
  s.report("sharing=none: inner moments zero at every adaptation start", ok,
           "observed " + std::to_string(phases) + " adaptation phases");
}

}  // namespace

bool run_verify_suite(std::ostream& os) {
  Suite s{os};
  check_first_order_fd(s);
  check_second_order_fd(s);
  check_quadratic_oracle(s);
  check_shared_trace(s);
  check_alpha_zero_trace(s);
  check_none_reset(s);
  check_macro_f1(s);
  os << (s.all_ok ? "verify: all oracles passed\n" : "verify: FAILURES above\n");
  return s.all_ok;
}

}  // namespace metalm::cli
