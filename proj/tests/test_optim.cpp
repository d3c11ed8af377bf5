// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "metalm/optim.hpp"
#include "metalm/rng.hpp"
#include "metalm/tape.hpp"

using namespace metalm;
using namespace metalm::optim;

namespace {

Tensor vec(std::vector<double> v) {
  const auto n = static_cast<std::int64_t>(v.size());
  return make_tensor({n}, std::move(v));
}

std::vector<Tensor> random_grads(std::size_t count, std::size_t n, std::uint64_t seed) {
  StreamRng rng(seed, "optim-test");
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_normal();
    out.push_back(make_tensor({static_cast<std::int64_t>(n)}, std::move(v)));
  }
  return out;
}

}  // namespace

TEST_CASE("first-step bias correction cancels: t=1, m0=0, g=5 acts with m_hat=5") {
  OptHyper h;
  h.lr = 0.1;
  h.weight_decay = 0.0;
  h.beta1 = 0.9;
  h.beta2 = 0.999;
  OptState s = make_opt(OptKind::adamw, h);
  std::vector<Tensor> p{vec({1.0})};
  adamw_step(s, p, std::vector<Tensor>{vec({5.0})});
  // m_hat = 5, v_hat = 25 -> update = lr * 5/(5+eps)
  const double want = 1.0 - 0.1 * (5.0 / (std::sqrt(25.0) + h.eps));
  CHECK(p[0].at(0) == doctest::Approx(want).epsilon(1e-15));
  CHECK(s.store->t == 1);
}

TEST_CASE("null step: lambda=0, g=0, m=v=0 leaves parameters unchanged") {
  OptHyper h;
  h.lr = 0.3;
  h.weight_decay = 0.0;
  OptState s = make_opt(OptKind::adamw, h);
  std::vector<Tensor> p{vec({0.7, -0.2})};
  for (int i = 0; i < 5; ++i) adamw_step(s, p, std::vector<Tensor>{vec({0.0, 0.0})});
  CHECK(p[0].at(0) == 0.7);
  CHECK(p[0].at(1) == -0.2);
}

TEST_CASE("stored-corrected convention: two unit gradients give m = 1/0.19") {
  OptHyper h;
  h.lr = 1e-3;
  h.weight_decay = 0.0;
  h.beta1 = 0.9;
  OptState s = make_opt(OptKind::adamw, h, MomentConvention::stored_corrected);
  std::vector<Tensor> p{vec({1.0})};
  adamw_step(s, p, std::vector<Tensor>{vec({1.0})});
  CHECK(s.store->m[0][0] == doctest::Approx(1.0).epsilon(1e-15));
  adamw_step(s, p, std::vector<Tensor>{vec({1.0})});
  CHECK(s.store->m[0][0] == doctest::Approx(5.263157894736842).epsilon(1e-12));
}

TEST_CASE("sgd: definition, null step, and sign agreement with adamw") {
  OptHyper h;
  h.lr = 0.1;
  h.weight_decay = 0.0;
  SUBCASE("theta decreases by lr*g") {
    OptState s = make_opt(OptKind::sgd, h);
    std::vector<Tensor> p{vec({1.0, 1.0})};
    sgd_step(s, p, std::vector<Tensor>{vec({1.0, 2.0})});
    CHECK(p[0].at(0) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(p[0].at(1) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("lr=0 is the identity") {
    OptHyper h0 = h;
    h0.lr = 0.0;
    OptState s = make_opt(OptKind::sgd, h0);
    std::vector<Tensor> p{vec({0.4})};
    sgd_step(s, p, std::vector<Tensor>{vec({3.0})});
    CHECK(p[0].at(0) == 0.4);
  }
  SUBCASE("adamw and sgd move a 1-d parameter the same direction") {
    for (const double g : {2.5, -1.25}) {
      OptState ss = make_opt(OptKind::sgd, h);
      OptState sa = make_opt(OptKind::adamw, h);
      std::vector<Tensor> ps{vec({0.0})}, pa{vec({0.0})};
      sgd_step(ss, ps, std::vector<Tensor>{vec({g})});
      adamw_step(sa, pa, std::vector<Tensor>{vec({g})});
      CHECK(std::signbit(ps[0].at(0)) == std::signbit(pa[0].at(0)));
      CHECK(ps[0].at(0) != 0.0);
      CHECK(pa[0].at(0) != 0.0);
    }
  }
}

TEST_CASE("shared store: one (m,v,t) regardless of how many optimizers use it") {
  OptHyper h;
  h.lr = 1e-3;
  const auto grads = random_grads(5, 8, 1);

  SUBCASE("five alternating steps leave t=5 and match a single optimizer, for many betas") {
    for (const double b1 : {0.0, 0.5, 0.9, 0.99}) {
      for (const double b2 : {0.0, 0.9, 0.999}) {
        OptHyper hh = h;
        hh.beta1 = b1;
        hh.beta2 = b2;
        auto [inner, outer] =
            make_shared_pair(OptKind::adamw, hh, OptKind::adamw, hh, Sharing::shared);
        OptState single = make_opt(OptKind::adamw, hh);
        std::vector<Tensor> pa{vec({0.5, -0.5, 1.0, 0.0, 0.25, 2.0, -1.0, 0.1})};
        std::vector<Tensor> pb = pa;
        for (int i = 0; i < 5; ++i) {
          apply_step(i % 2 ? outer : inner, pa, {&grads[static_cast<std::size_t>(i)], 1});
          apply_step(single, pb, {&grads[static_cast<std::size_t>(i)], 1});
          CHECK(inner.store->m[0] == single.store->m[0]);
          CHECK(inner.store->v[0] == single.store->v[0]);
          CHECK(same_values(pa[0], pb[0]));
        }
        CHECK(inner.store->t == 5);
        CHECK(outer.store->t == 5);
      }
    }
  }
  SUBCASE("copy mode moves (m,v,t) across states") {
    auto [inner, outer] = make_shared_pair(OptKind::adamw, h, OptKind::adamw, h, Sharing::copy);
    std::vector<Tensor> p{vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0})};
    apply_step(inner, p, {&grads[0], 1});
    apply_step(inner, p, {&grads[1], 1});
    CHECK(outer.store->t == 0);
    copy_state(inner, outer);
    CHECK(outer.store->t == 2);
    CHECK(outer.store->m[0] == inner.store->m[0]);
    CHECK(outer.store.get() != inner.store.get());  // still two stores
  }
  SUBCASE("sharing with a stateless optimizer is rejected") {
    CHECK_THROWS_AS((void)make_shared_pair(OptKind::sgd, h, OptKind::adamw, h, Sharing::shared),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)make_shared_pair(OptKind::adamw, h, OptKind::sgd, h, Sharing::copy),
                    std::invalid_argument);
  }
}

TEST_CASE("v stays nonnegative and zero-gradient runs are fixed points") {
  OptHyper h;
  h.lr = 3e-3;
  h.weight_decay = 0.0;
  OptState s = make_opt(OptKind::adamw, h);
  std::vector<Tensor> p{vec({0.1, -0.9, 0.5, 0.0, 0.0, 0.0, 1.0, -1.0})};
  const auto grads = random_grads(20, 8, 2);
  for (const auto& g : grads) {
    apply_step(s, p, {&g, 1});
    for (const double x : s.store->v[0]) CHECK(x >= 0.0);
  }
  const Tensor frozen = p[0];
  OptHyper h0 = h;
  h0.weight_decay = 0.0;
  for (int i = 0; i < 10; ++i) {
    OptState s2 = s;
    std::vector<Tensor> zero{vec(std::vector<double>(8, 0.0))};
    // moments keep decaying but with wd=0 and g=0 the parameter moves only by
    // lr*m/(sqrt(v)+eps) ... which is nonzero unless m is zero. Use a fresh
    // state to pin the exact fixed-point contract.
    OptState fresh = make_opt(OptKind::adamw, h0);
    std::vector<Tensor> q{frozen};
    apply_step(fresh, q, {&zero[0], 1});
    CHECK(same_values(q[0], frozen));
  }
}

TEST_CASE("non-finite gradients reject the step and leave everything untouched") {
  OptHyper h;
  h.lr = 1e-2;
  OptState s = make_opt(OptKind::adamw, h);
  std::vector<Tensor> p{vec({1.0, 2.0})};
  apply_step(s, p, std::vector<Tensor>{vec({0.5, 0.5})});
  const Tensor before = p[0];
  const auto m_before = s.store->m[0];
  const auto t_before = s.store->t;
  std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(apply_step(s, p, std::vector<Tensor>{make_tensor({2}, std::move(bad))}),
                  std::domain_error);
  CHECK(same_values(p[0], before));
  CHECK(s.store->m[0] == m_before);
  CHECK(s.store->t == t_before);
}

TEST_CASE("the tracked step is bit-identical to the raw step") {
  for (const auto conv : {MomentConvention::read_time, MomentConvention::stored_corrected}) {
    for (const auto kind : {OptKind::adamw, OptKind::sgd}) {
      OptHyper h;
      h.lr = 2e-3;
      h.weight_decay = 0.01;
      OptState raw = make_opt(kind, h, conv);
      OptState tracked = make_opt(kind, h, conv);
      std::vector<Tensor> pr{vec({0.3, -0.7, 1.1, 0.0})};
      std::vector<Tensor> pt = pr;
      const auto grads = random_grads(4, 4, 3);
      for (const auto& g : grads) {
        apply_step(raw, pr, {&g, 1});
        Tape tape;
        std::vector<Tensor> leaves{tape.leaf(pt[0])};
        const auto next = step_differentiable(tracked, leaves, {g});
        pt[0] = next[0].detached();
        CHECK(same_values(pr[0], pt[0]));
        if (kind == OptKind::adamw) {
          CHECK(raw.store->m[0] == tracked.store->m[0]);
          CHECK(raw.store->v[0] == tracked.store->v[0]);
        }
      }
    }
  }
}

TEST_CASE("global-norm clipping caps the step like pre-scaled gradients") {
  OptHyper h;
  h.lr = 1e-2;
  h.grad_clip = 1.0;
  OptState clipped = make_opt(OptKind::adamw, h);
  OptHyper h2 = h;
  h2.grad_clip = 0.0;
  OptState manual = make_opt(OptKind::adamw, h2);
  const Tensor g = vec({3.0, 4.0});  // norm 5
  const Tensor g_scaled = vec({3.0 / 5.0, 4.0 / 5.0});
  std::vector<Tensor> pa{vec({1.0, 1.0})}, pb{vec({1.0, 1.0})};
  apply_step(clipped, pa, {&g, 1});
  apply_step(manual, pb, {&g_scaled, 1});
  for (int i = 0; i < 2; ++i)
    CHECK(pa[0].at(i) == doctest::Approx(pb[0].at(i)).epsilon(1e-12));
}

TEST_CASE("table-5 optimizer combinations are all constructible") {
  OptHyper h;
  h.lr = 1e-3;
  CHECK_NOTHROW((void)make_shared_pair(OptKind::sgd, h, OptKind::sgd, h, Sharing::none));
  CHECK_NOTHROW((void)make_shared_pair(OptKind::sgd, h, OptKind::adamw, h, Sharing::none));
  auto [i3, o3] = make_shared_pair(OptKind::adamw, h, OptKind::sgd, h, Sharing::none);
  CHECK(o3.stateless());  // the outer path is stateless, as the grid notes
  CHECK_NOTHROW((void)make_shared_pair(OptKind::adamw, h, OptKind::adamw, h, Sharing::none));
  CHECK_NOTHROW((void)make_shared_pair(OptKind::adamw, h, OptKind::adamw, h, Sharing::shared));
}

TEST_CASE("optimizer state round-trips through the container format") {
  OptHyper h;
  h.lr = 7e-4;
  h.beta1 = 0.85;
  OptState s = make_opt(OptKind::adamw, h, MomentConvention::stored_corrected);
  std::vector<Tensor> p{vec({1.0, 2.0, 3.0})};
  const auto grads = random_grads(3, 3, 4);
  for (const auto& g : grads) apply_step(s, p, {&g, 1});

  const std::string path = "/tmp/metalm_optstate_test.bin";
  save_opt_state(path, s);
  const OptState r = load_opt_state(path);
  CHECK(r.kind == OptKind::adamw);
  CHECK(r.convention == MomentConvention::stored_corrected);
  CHECK(r.hyper.lr == h.lr);
  CHECK(r.hyper.beta1 == h.beta1);
  CHECK(r.store->t == s.store->t);
  CHECK(r.store->m[0] == s.store->m[0]);
  CHECK(r.store->v[0] == s.store->v[0]);
}
