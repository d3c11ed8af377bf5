// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "metalm/fdcheck.hpp"
#include "metalm/model.hpp"
#include "metalm/ops.hpp"
#include "metalm/rng.hpp"
#include "metalm/tape.hpp"

using namespace metalm;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.vocab_size = 16;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.max_seq = 24;
  return cfg;
}

std::vector<std::int32_t> random_tokens(const ModelConfig& cfg, std::int64_t len,
                                        std::uint64_t seed) {
  StreamRng rng(seed, "model-test-tokens");
  std::vector<std::int32_t> t(static_cast<std::size_t>(len));
  for (auto& x : t) x = static_cast<std::int32_t>(rng.next_below(cfg.vocab_size));
  return t;
}

}  // namespace

TEST_CASE("init is deterministic, biases zero, gains one") {
  const ModelConfig cfg = tiny_config();
  const Params a = init_model(cfg, 100);
  const Params b = init_model(cfg, 100);
  CHECK(a.value_hash() == b.value_hash());
  const Params c = init_model(cfg, 101);
  CHECK(a.value_hash() != c.value_hash());

  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& name = a.name(i);
    if (name.ends_with(".b") || name.ends_with("bq") || name.ends_with("bv") ||
        name.ends_with("bo") || name.ends_with("b1") || name.ends_with("b2")) {
      for (std::int64_t j = 0; j < a.at(i).numel(); ++j) CHECK(a.at(i).at(j) == 0.0);
    }
  }
  const Tensor& gain = a.get("layer0.ln1.g");
  for (std::int64_t j = 0; j < gain.numel(); ++j) CHECK(gain.at(j) == 1.0);
  CHECK(a.all_finite());
}

TEST_CASE("forward shape, purity, and causality") {
  const ModelConfig cfg = tiny_config();
  const Params params = init_model(cfg, 100);
  const auto tokens = random_tokens(cfg, 12, 1);

  const Tensor l1 = forward_logits(params, tokens);
  CHECK(l1.shape == Shape{12, cfg.vocab_size});
  const Tensor l2 = forward_logits(params, tokens);
  CHECK(same_values(l1, l2));

  // property: perturbing position p never changes logits before p
  StreamRng rng(2, "causality");
  for (int trial = 0; trial < 100; ++trial) {
    auto mutated = tokens;
    const auto p = static_cast<std::size_t>(rng.next_below(static_cast<std::int64_t>(tokens.size())));
    mutated[p] = static_cast<std::int32_t>(rng.next_below(cfg.vocab_size));
    const Tensor lm = forward_logits(params, mutated);
    for (std::size_t q = 0; q < p; ++q)
      for (std::int64_t v = 0; v < cfg.vocab_size; ++v)
        CHECK(lm.at(static_cast<std::int64_t>(q) * cfg.vocab_size + v) ==
              l1.at(static_cast<std::int64_t>(q) * cfg.vocab_size + v));
  }
}

TEST_CASE("forward rejects overlong sequences and bad ids") {
  const ModelConfig cfg = tiny_config();
  const Params params = init_model(cfg, 100);
  CHECK_THROWS_AS((void)forward_logits(params, random_tokens(cfg, cfg.max_seq + 1, 3)),
                  std::invalid_argument);
  std::vector<std::int32_t> bad{0, static_cast<std::int32_t>(cfg.vocab_size)};
  CHECK_THROWS_AS((void)forward_logits(params, bad), std::invalid_argument);
}

TEST_CASE("masked loss: uniform logits give ln V, mask arithmetic") {
  const ModelConfig cfg = tiny_config();
  SUBCASE("ln V for uniform logits (V=64)") {
    const std::vector<std::int32_t> targets{1, 2, 3};
    const std::vector<std::uint8_t> mask{0, 1, 1};
    const Tensor loss = masked_ce_loss(zeros({3, 64}), targets, mask);
    CHECK(loss.scalar() == doctest::Approx(std::log(64.0)).epsilon(1e-12));
  }
  SUBCASE("single-position mask equals that position's cross-entropy") {
    const Params params = init_model(cfg, 100);
    const auto tokens = random_tokens(cfg, 8, 4);
    const Tensor logits = forward_logits(params, tokens);
    std::vector<std::uint8_t> m1(8, 0), m2(8, 0);
    m1[5] = 1;
    m2[5] = 1;
    m2[7] = 1;
    const double l5 = masked_ce_loss(logits, tokens, m1).scalar();
    std::vector<std::uint8_t> m7(8, 0);
    m7[7] = 1;
    const double l7 = masked_ce_loss(logits, tokens, m7).scalar();
    const double both = masked_ce_loss(logits, tokens, m2).scalar();
    CHECK(both == doctest::Approx(0.5 * (l5 + l7)).epsilon(1e-12));
  }
  SUBCASE("unmasked targets are ignored") {
    const Params params = init_model(cfg, 100);
    auto tokens = random_tokens(cfg, 8, 5);
    std::vector<std::uint8_t> mask(8, 0);
    mask[3] = 1;
    const Tensor logits = forward_logits(params, tokens);
    const double before = masked_ce_loss(logits, tokens, mask).scalar();
    auto targets = tokens;
    targets[6] = (targets[6] + 1) % static_cast<std::int32_t>(cfg.vocab_size);
    const double after = masked_ce_loss(logits, targets, mask).scalar();
    CHECK(before == after);
  }
  SUBCASE("empty mask and position-zero mask are rejected") {
    const std::vector<std::int32_t> targets{1, 2};
    CHECK_THROWS_AS((void)masked_ce_loss(zeros({2, 4}), targets, std::vector<std::uint8_t>{0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)masked_ce_loss(zeros({2, 4}), targets, std::vector<std::uint8_t>{1, 0}),
                    std::invalid_argument);
  }
}

TEST_CASE("model gradients pass the finite-difference check") {
  ModelConfig cfg = tiny_config();
  cfg.n_layers = 1;
  const Params params = init_model(cfg, 100);
  const auto tokens = random_tokens(cfg, 8, 6);
  std::vector<std::uint8_t> mask(8, 0);
  mask[4] = 1;
  mask[7] = 1;

  const ScalarFn f = [&](const std::vector<Tensor>& ts) {
    return masked_ce_loss(forward_logits(cfg, ts, tokens), tokens, mask);
  };
  FdOptions opts;
  opts.max_coords_per_tensor = 10;
  CHECK(finite_difference_check(f, params.tensor_list(), opts) < 1e-6);
}

TEST_CASE("sequence_logprob: uniform conditional, additivity, probability bound") {
  const ModelConfig cfg = tiny_config();
  const Params params = init_model(cfg, 100);
  const auto tokens = random_tokens(cfg, 10, 7);

  SUBCASE("uniform model gives -ln V per scored position") {
    // zero out everything -> logits all zero -> uniform next-token distribution
    Params zero_params = init_model(cfg, 100);
    std::vector<Tensor> zt;
    for (std::size_t i = 0; i < zero_params.size(); ++i) zt.push_back(zeros(zero_params.at(i).shape));
    zero_params.replace_tensors(std::move(zt));
    std::vector<std::uint8_t> scored(10, 0);
    scored[4] = 1;
    const double lp = sequence_logprob(zero_params, tokens, scored);
    CHECK(lp == doctest::Approx(-std::log(static_cast<double>(cfg.vocab_size))).epsilon(1e-12));
  }
  SUBCASE("log-probabilities add over scored positions") {
    std::vector<std::uint8_t> s1(10, 0), s2(10, 0), both(10, 0);
    s1[3] = 1;
    s2[8] = 1;
    both[3] = 1;
    both[8] = 1;
    const double a = sequence_logprob(params, tokens, s1);
    const double b = sequence_logprob(params, tokens, s2);
    const double ab = sequence_logprob(params, tokens, both);
    CHECK(ab == doctest::Approx(a + b).epsilon(1e-12));
    CHECK(std::exp(ab) <= 1.0);
  }
  SUBCASE("scored position 0 is rejected") {
    std::vector<std::uint8_t> bad(10, 0);
    bad[0] = 1;
    CHECK_THROWS_AS((void)sequence_logprob(params, tokens, bad), std::invalid_argument);
  }
}

TEST_CASE("params are immutable snapshots; training copies never alias") {
  const ModelConfig cfg = tiny_config();
  const Params params = init_model(cfg, 100);
  const std::uint64_t h = params.value_hash();
  Params copy = params.clone();
  std::vector<Tensor> ts = copy.tensor_list();
  ts[0] = zeros(ts[0].shape);
  copy.replace_tensors(std::move(ts));
  CHECK(params.value_hash() == h);
  CHECK(copy.value_hash() != h);
}
