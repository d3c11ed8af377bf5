// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 kernels behind the tensor layer. Every routine has a scalar
// reference implementation and, on x86-64, an AVX2 variant selected once at
// startup. The two are equivalence-tested; reductions may differ by rounding
// (summation order), elementwise routines are bit-identical.

#pragma once

#include <cstddef>
#include <cstdint>

namespace metalm::kernels {

enum class Backend { scalar, avx2 };

// Active backend. Resolved on first use: AVX2 if the CPU supports it,
// overridable with METALM_KERNELS=scalar|avx2.
Backend active_backend();
void set_backend(Backend b);  // throws if the CPU lacks the requested ISA
bool cpu_has_avx2();
const char* backend_name(Backend b);

// Elementwise; dst may alias a or b.
void add(double* dst, const double* a, const double* b, std::size_t n);
void mul(double* dst, const double* a, const double* b, std::size_t n);
void div(double* dst, const double* a, const double* b, std::size_t n);
void scale(double* dst, const double* a, double c, std::size_t n);
void add_scalar(double* dst, const double* a, double c, std::size_t n);
void sqrt(double* dst, const double* a, std::size_t n);
void axpy(double* dst, double alpha, const double* x, std::size_t n);  // dst += alpha*x

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
bool all_finite(const double* a, std::size_t n);

// C[m,n] = op(A) * op(B), accumulating into C when accumulate is set.
// A is m-by-k after applying trans_a, B is k-by-n after trans_b; row-major.
// trans_a && trans_b is unsupported (never produced by the tape).
void matmul(double* c, const double* a, const double* b,
            std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate);

// Fused AdamW inner loop. Written to round exactly like the equivalent
// sequence of elementwise kernels (no FMA) so the optimizer and the
// tape-expression form of the same step produce identical bits.
//   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
//   mh = m*c1; vh = v*c2            (read-time correction)
//   p = (p - lr*(mh/(sqrt(vh)+eps))) - lr*wd*p_old
// When store_corrected is set, mh/vh are written back to m/v.
void adamw_update(double* p, double* m, double* v, const double* g,
                  std::size_t n, double lr, double beta1, double beta2,
                  double eps, double wd, double c1, double c2,
                  bool store_corrected);

}  // namespace metalm::kernels
