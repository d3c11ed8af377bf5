// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels and the runtime dispatch table.

#include "metalm/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace metalm::kernels {
namespace detail {

namespace {

void s_add(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void s_mul(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void s_div(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] / b[i];
}

void s_scale(double* dst, const double* a, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * c;
}

void s_add_scalar(double* dst, const double* a, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + c;
}

void s_sqrt(double* dst, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::sqrt(a[i]);
}

void s_axpy(double* dst, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * x[i];
}

double s_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double s_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

bool s_all_finite(const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(a[i])) return false;
  return true;
}

// Row-major GEMM. NN and TN walk B rows with axpy-style updates; NT is a dot
// product per output element.
void s_matmul(double* c, const double* a, const double* b, std::size_t m,
              std::size_t k, std::size_t n, bool trans_a, bool trans_b,
              bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[i * k + p];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    // A: m x k, B stored n x k
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        c[i * n + j] += s_dot(arow, b + j * k, k);
      }
    }
  } else if (trans_a && !trans_b) {
    // A stored k x m
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = a + p * m;
      const double* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = arow[i];
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    throw std::logic_error("matmul: trans_a && trans_b unsupported");
  }
}

void s_adamw_update(double* p, double* m, double* v, const double* g,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double wd, double c1, double c2,
                    bool store_corrected) {
  const double one_m_b1 = 1.0 - beta1;
  const double one_m_b2 = 1.0 - beta2;
  const double neg_lr = -lr;
  const double neg_lr_wd = -(lr * wd);
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double m1 = beta1 * m[i];
    const double m2 = one_m_b1 * gi;
    double mi = m1 + m2;
    const double gg = gi * gi;
    const double v1 = beta2 * v[i];
    const double v2 = one_m_b2 * gg;
    double vi = v1 + v2;
    const double mh = mi * c1;
    const double vh = vi * c2;
    if (store_corrected) {
      mi = mh;
      vi = vh;
    }
    m[i] = mi;
    v[i] = vi;
    const double den = std::sqrt(vh) + eps;
    const double u = mh / den;
    const double p_old = p[i];
    p[i] = (p_old + neg_lr * u) + neg_lr_wd * p_old;
  }
}

}  // namespace

void fill_scalar(ImplTable& t) {
  t.add = s_add;
  t.mul = s_mul;
  t.div = s_div;
  t.scale = s_scale;
  t.add_scalar = s_add_scalar;
  t.sqrt = s_sqrt;
  t.axpy = s_axpy;
  t.dot = s_dot;
  t.sum = s_sum;
  t.all_finite = s_all_finite;
  t.matmul = s_matmul;
  t.adamw_update = s_adamw_update;
}

}  // namespace detail

namespace {

struct Dispatch {
  detail::ImplTable table;
  Backend backend;

  Dispatch() {
    detail::fill_scalar(table);
    backend = Backend::scalar;
#ifdef METALM_HAVE_AVX2_TU
    bool want_avx2 = cpu_has_avx2();
    if (const char* env = std::getenv("METALM_KERNELS")) {
      const std::string v(env);
      if (v == "scalar") want_avx2 = false;
      else if (v == "avx2") {
        if (!cpu_has_avx2())
          throw std::runtime_error("METALM_KERNELS=avx2: CPU lacks AVX2");
        want_avx2 = true;
      } else {
        throw std::runtime_error("METALM_KERNELS: unknown backend '" + v + "'");
      }
    }
    if (want_avx2) {
      detail::fill_avx2(table);
      backend = Backend::avx2;
    }
#endif
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

bool cpu_has_avx2() {
#ifdef METALM_HAVE_AVX2_TU
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return dispatch().backend; }

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) {
  Dispatch& d = dispatch();
  if (b == Backend::avx2) {
#ifdef METALM_HAVE_AVX2_TU
    if (!cpu_has_avx2()) throw std::runtime_error("set_backend: CPU lacks AVX2");
    detail::fill_avx2(d.table);
    d.backend = Backend::avx2;
#else
    throw std::runtime_error("set_backend: AVX2 unavailable on this platform");
#endif
  } else {
    detail::fill_scalar(d.table);
    d.backend = Backend::scalar;
  }
}

void add(double* dst, const double* a, const double* b, std::size_t n) {
  dispatch().table.add(dst, a, b, n);
}
void mul(double* dst, const double* a, const double* b, std::size_t n) {
  dispatch().table.mul(dst, a, b, n);
}
void div(double* dst, const double* a, const double* b, std::size_t n) {
  dispatch().table.div(dst, a, b, n);
}
void scale(double* dst, const double* a, double c, std::size_t n) {
  dispatch().table.scale(dst, a, c, n);
}
void add_scalar(double* dst, const double* a, double c, std::size_t n) {
  dispatch().table.add_scalar(dst, a, c, n);
}
void sqrt(double* dst, const double* a, std::size_t n) {
  dispatch().table.sqrt(dst, a, n);
}
void axpy(double* dst, double alpha, const double* x, std::size_t n) {
  dispatch().table.axpy(dst, alpha, x, n);
}
double dot(const double* a, const double* b, std::size_t n) {
  return dispatch().table.dot(a, b, n);
}
double sum(const double* a, std::size_t n) { return dispatch().table.sum(a, n); }
bool all_finite(const double* a, std::size_t n) {
  return dispatch().table.all_finite(a, n);
}
void matmul(double* c, const double* a, const double* b, std::size_t m,
            std::size_t k, std::size_t n, bool trans_a, bool trans_b,
            bool accumulate) {
  dispatch().table.matmul(c, a, b, m, k, n, trans_a, trans_b, accumulate);
}
void adamw_update(double* p, double* m, double* v, const double* g,
                  std::size_t n, double lr, double beta1, double beta2,
                  double eps, double wd, double c1, double c2,
                  bool store_corrected) {
  dispatch().table.adamw_update(p, m, v, g, n, lr, beta1, beta2, eps, wd, c1,
                                c2, store_corrected);
}

}  // namespace metalm::kernels
