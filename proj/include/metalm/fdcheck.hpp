// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient checking. The oracle side never touches the
// tape: it re-evaluates f at perturbed inputs and compares against whatever
// analytic gradients the caller (or grad()) produced.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "metalm/tensor.hpp"

namespace metalm {

struct FdOptions {
  double h = 1e-5;
  // 0 checks every coordinate; otherwise a deterministic sample of this many
  // coordinates per tensor (keeps big checks inside their time budget).
  std::int64_t max_coords_per_tensor = 0;
  std::uint64_t coord_seed = 12345;
};

// f must be a pure function of its inputs; it is called with plain value
// tensors for the ±h evaluations and with tape leaves when gradients are
// wanted. Returns a scalar tensor either way.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// max over checked coordinates of |fd - analytic| / max(|fd|, |analytic|, 1e-12)
double fd_max_rel_error(const ScalarFn& f, const std::vector<Tensor>& at,
                        const std::vector<Tensor>& analytic, const FdOptions& opts = {});

// Compares grad(f) against central differences of f.
double finite_difference_check(const ScalarFn& f, const std::vector<Tensor>& at,
                               const FdOptions& opts = {});

}  // namespace metalm
