// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "metalm/kernels.hpp"
#include "metalm/rng.hpp"

namespace kn = metalm::kernels;
using metalm::StreamRng;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -2.0,
                               double hi = 2.0) {
  StreamRng rng(seed, "kernel-test");
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.next_double();
  return v;
}

// independent matmul oracle
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 std::size_t m, std::size_t k, std::size_t n, bool ta, bool tb) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * m + i] : a[i * k + p];
        const double bv = tb ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  return c;
}

struct BackendRestore {
  kn::Backend saved = kn::active_backend();
  ~BackendRestore() { kn::set_backend(saved); }
};

}  // namespace

TEST_CASE("matmul matches the naive oracle on every transpose variant") {
  const std::size_t m = 7, k = 5, n = 9;
  for (const bool ta : {false, true}) {
    for (const bool tb : {false, true}) {
      if (ta && tb) continue;
      const auto a = random_vec(m * k, 17 + ta);
      const auto b = random_vec(k * n, 31 + tb);
      const auto want = naive_matmul(a, b, m, k, n, ta, tb);
      std::vector<double> got(m * n, -1.0);
      kn::matmul(got.data(), a.data(), b.data(), m, k, n, ta, tb, false);
      for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("matmul accumulate adds into the output") {
  const auto a = random_vec(6, 3);
  const auto b = random_vec(6, 4);
  std::vector<double> c(4, 1.0);
  kn::matmul(c.data(), a.data(), b.data(), 2, 3, 2, false, false, true);
  const auto want = naive_matmul(a, b, 2, 3, 2, false, false);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c[i] == doctest::Approx(1.0 + want[i]).epsilon(1e-12));
}

TEST_CASE("scalar and avx2 agree" * doctest::skip(!kn::cpu_has_avx2())) {
  BackendRestore restore;
  const std::size_t n = 1027;  // odd tail on purpose
  const auto a = random_vec(n, 5);
  const auto b = random_vec(n, 6, 0.5, 2.0);

  const auto run_elementwise = [&](kn::Backend be) {
    kn::set_backend(be);
    std::vector<std::vector<double>> outs;
    std::vector<double> t(n);
    kn::add(t.data(), a.data(), b.data(), n);
    outs.push_back(t);
    kn::mul(t.data(), a.data(), b.data(), n);
    outs.push_back(t);
    kn::div(t.data(), a.data(), b.data(), n);
    outs.push_back(t);
    kn::scale(t.data(), a.data(), 1.7, n);
    outs.push_back(t);
    kn::add_scalar(t.data(), a.data(), -0.3, n);
    outs.push_back(t);
    kn::sqrt(t.data(), b.data(), n);
    outs.push_back(t);
    t = a;
    kn::axpy(t.data(), 0.37, b.data(), n);
    outs.push_back(t);
    return outs;
  };

  const auto scalar = run_elementwise(kn::Backend::scalar);
  const auto avx2 = run_elementwise(kn::Backend::avx2);
  REQUIRE(scalar.size() == avx2.size());
  for (std::size_t i = 0; i < scalar.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(scalar[i][j] == avx2[i][j]);  // bit-identical
    }
  }

  // reductions and matmul: tolerance (different summation order)
  kn::set_backend(kn::Backend::scalar);
  const double dot_s = kn::dot(a.data(), b.data(), n);
  const double sum_s = kn::sum(a.data(), n);
  std::vector<double> mm_s(11 * 13);
  const auto ma = random_vec(11 * 29, 7);
  const auto mb = random_vec(29 * 13, 8);
  kn::matmul(mm_s.data(), ma.data(), mb.data(), 11, 29, 13, false, false, false);
  kn::set_backend(kn::Backend::avx2);
  const double dot_a = kn::dot(a.data(), b.data(), n);
  const double sum_a = kn::sum(a.data(), n);
  std::vector<double> mm_a(11 * 13);
  kn::matmul(mm_a.data(), ma.data(), mb.data(), 11, 29, 13, false, false, false);
  CHECK(dot_s == doctest::Approx(dot_a).epsilon(1e-13));
  CHECK(sum_s == doctest::Approx(sum_a).epsilon(1e-13));
  for (std::size_t i = 0; i < mm_s.size(); ++i)
    CHECK(mm_s[i] == doctest::Approx(mm_a[i]).epsilon(1e-12));
}

TEST_CASE("adamw kernel is bit-identical across backends" * doctest::skip(!kn::cpu_has_avx2())) {
  BackendRestore restore;
  const std::size_t n = 101;
  const auto g = random_vec(n, 9);
  const auto p0 = random_vec(n, 10);

  const auto run = [&](kn::Backend be, bool stored) {
    kn::set_backend(be);
    std::vector<double> p = p0, m(n, 0.01), v(n, 0.02);
    for (int t = 1; t <= 3; ++t) {
      const double c1 = 1.0 / (1.0 - std::pow(0.9, t));
      const double c2 = 1.0 / (1.0 - std::pow(0.999, t));
      kn::adamw_update(p.data(), m.data(), v.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8, 0.01,
                       c1, c2, stored);
    }
    return std::tuple{p, m, v};
  };

  for (const bool stored : {false, true}) {
    const auto [ps, ms, vs] = run(kn::Backend::scalar, stored);
    const auto [pa, ma, va] = run(kn::Backend::avx2, stored);
    CHECK(ps == pa);
    CHECK(ms == ma);
    CHECK(vs == va);
  }
}

TEST_CASE("all_finite flags infinities and NaNs anywhere in the buffer") {
  auto v = random_vec(37, 11);
  CHECK(kn::all_finite(v.data(), v.size()));
  v[36] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(kn::all_finite(v.data(), v.size()));
  v[36] = 0.0;
  v[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(kn::all_finite(v.data(), v.size()));
}

TEST_CASE("backend dispatch reports and switches") {
  BackendRestore restore;
  kn::set_backend(kn::Backend::scalar);
  CHECK(kn::active_backend() == kn::Backend::scalar);
  if (kn::cpu_has_avx2()) {
    kn::set_backend(kn::Backend::avx2);
    CHECK(kn::active_backend() == kn::Backend::avx2);
  }
}
