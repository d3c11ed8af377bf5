// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace metalm::kernels::detail {

struct ImplTable {
  void (*add)(double*, const double*, const double*, std::size_t);
  void (*mul)(double*, const double*, const double*, std::size_t);
  void (*div)(double*, const double*, const double*, std::size_t);
  void (*scale)(double*, const double*, double, std::size_t);
  void (*add_scalar)(double*, const double*, double, std::size_t);
  void (*sqrt)(double*, const double*, std::size_t);
  void (*axpy)(double*, double, const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  bool (*all_finite)(const double*, std::size_t);
  void (*matmul)(double*, const double*, const double*,
                 std::size_t, std::size_t, std::size_t, bool, bool, bool);
  void (*adamw_update)(double*, double*, double*, const double*, std::size_t,
                       double, double, double, double, double, double, double,
                       bool);
};

void fill_scalar(ImplTable& t);

#if defined(__x86_64__) || defined(_M_X64)
#define METALM_HAVE_AVX2_TU 1
void fill_avx2(ImplTable& t);
#endif

}  // namespace metalm::kernels::detail
