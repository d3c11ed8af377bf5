// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 variants. Elementwise kernels keep the scalar rounding sequence (no
// FMA contraction) so scalar/avx2 results are bit-identical; matmul and the
// reductions use FMA and vector accumulators, so they agree with the scalar
// reference only up to rounding.

#include "kernels_impl.hpp"

#ifdef METALM_HAVE_AVX2_TU

#include <immintrin.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace metalm::kernels::detail {
namespace {

void a_add(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void a_mul(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void a_div(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_div_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] / b[i];
}

void a_scale(double* dst, const double* a, double c, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vc));
  }
  for (; i < n; ++i) dst[i] = a[i] * c;
}

void a_add_scalar(double* dst, const double* a, double c, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i), vc));
  }
  for (; i < n; ++i) dst[i] = a[i] + c;
}

void a_sqrt(double* dst, const double* a, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_sqrt_pd(_mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) dst[i] = std::sqrt(a[i]);
}

void a_axpy(double* dst, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), prod));
  }
  for (; i < n; ++i) dst[i] += alpha * x[i];
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double a_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

double a_sum(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double r = hsum(acc);
  for (; i < n; ++i) r += a[i];
  return r;
}

bool a_all_finite(const double* a, std::size_t n) {
  // x - x == 0 exactly when x is finite.
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    const __m256d d = _mm256_sub_pd(v, v);
    const __m256d eq = _mm256_cmp_pd(d, zero, _CMP_EQ_OQ);
    if (_mm256_movemask_pd(eq) != 0xF) return false;
  }
  for (; i < n; ++i)
    if (!std::isfinite(a[i])) return false;
  return true;
}

void a_matmul(double* c, const double* a, const double* b, std::size_t m,
              std::size_t k, std::size_t n, bool trans_a, bool trans_b,
              bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(a[i * k + p]);
        const double* brow = b + p * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
          _mm256_storeu_pd(crow + j,
                           _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j),
                                           _mm256_loadu_pd(crow + j)));
        }
        const double as = a[i * k + p];
        for (; j < n; ++j) crow[j] += as * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        c[i * n + j] += a_dot(arow, b + j * k, k);
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = a + p * m;
      const double* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const __m256d av = _mm256_set1_pd(arow[i]);
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
          _mm256_storeu_pd(crow + j,
                           _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j),
                                           _mm256_loadu_pd(crow + j)));
        }
        const double as = arow[i];
        for (; j < n; ++j) crow[j] += as * brow[j];
      }
    }
  } else {
    throw std::logic_error("matmul: trans_a && trans_b unsupported");
  }
}

void a_adamw_update(double* p, double* m, double* v, const double* g,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double wd, double c1, double c2,
                    bool store_corrected) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vomb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vomb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vneg_lr = _mm256_set1_pd(-lr);
  const __m256d vneg_lr_wd = _mm256_set1_pd(-(lr * wd));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d m1 = _mm256_mul_pd(vb1, _mm256_loadu_pd(m + i));
    const __m256d m2 = _mm256_mul_pd(vomb1, gi);
    __m256d mi = _mm256_add_pd(m1, m2);
    const __m256d gg = _mm256_mul_pd(gi, gi);
    const __m256d v1 = _mm256_mul_pd(vb2, _mm256_loadu_pd(v + i));
    const __m256d v2 = _mm256_mul_pd(vomb2, gg);
    __m256d vi = _mm256_add_pd(v1, v2);
    const __m256d mh = _mm256_mul_pd(mi, vc1);
    const __m256d vh = _mm256_mul_pd(vi, vc2);
    if (store_corrected) {
      mi = mh;
      vi = vh;
    }
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vh), veps);
    const __m256d u = _mm256_div_pd(mh, den);
    const __m256d p_old = _mm256_loadu_pd(p + i);
    const __m256d step = _mm256_add_pd(p_old, _mm256_mul_pd(vneg_lr, u));
    _mm256_storeu_pd(p + i,
                     _mm256_add_pd(step, _mm256_mul_pd(vneg_lr_wd, p_old)));
  }
  const double one_m_b1 = 1.0 - beta1;
  const double one_m_b2 = 1.0 - beta2;
  for (; i < n; ++i) {
    const double gi = g[i];
    double mi = beta1 * m[i] + one_m_b1 * gi;
    double vi = beta2 * v[i] + one_m_b2 * (gi * gi);
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
    p[i] = (p_old + (-lr) * u) + (-(lr * wd)) * p_old;
  }
}

}  // namespace

void fill_avx2(ImplTable& t) {
  t.add = a_add;
  t.mul = a_mul;
  t.div = a_div;
  t.scale = a_scale;
  t.add_scalar = a_add_scalar;
  t.sqrt = a_sqrt;
  t.axpy = a_axpy;
  t.dot = a_dot;
  t.sum = a_sum;
  t.all_finite = a_all_finite;
  t.matmul = a_matmul;
  t.adamw_update = a_adamw_update;
}

}  // namespace metalm::kernels::detail

#endif  // METALM_HAVE_AVX2_TU
