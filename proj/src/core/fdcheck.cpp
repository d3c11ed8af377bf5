// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/fdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metalm/rng.hpp"
#include "metalm/tape.hpp"

namespace metalm {

namespace {

double eval_scalar(const ScalarFn& f, const std::vector<Tensor>& at) {
  const Tensor out = f(at);
  if (out.numel() != 1)
    throw std::invalid_argument("finite_difference_check: f did not return a scalar");
  const double v = out.at(0);
  if (!std::isfinite(v))
    throw std::domain_error("finite_difference_check: non-finite evaluation of f");
  return v;
}

}  // namespace

double fd_max_rel_error(const ScalarFn& f, const std::vector<Tensor>& at,
                        const std::vector<Tensor>& analytic, const FdOptions& opts) {
  if (opts.h <= 0.0) throw std::invalid_argument("finite_difference_check: h must be positive");
  if (analytic.size() != at.size())
    throw std::invalid_argument("fd_max_rel_error: gradient count mismatch");

  double max_rel = 0.0;
  std::vector<Tensor> point = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    point[i] = at[i].detached();
  }

  for (std::size_t i = 0; i < at.size(); ++i) {
    const std::int64_t n = at[i].numel();
    std::vector<std::int64_t> coords;
    if (opts.max_coords_per_tensor > 0 && opts.max_coords_per_tensor < n) {
      StreamRng rng(opts.coord_seed, "fd-coords", i);
      coords = rng.sample_distinct(n, opts.max_coords_per_tensor);
    } else {
      coords.resize(static_cast<std::size_t>(n));
      for (std::int64_t c = 0; c < n; ++c) coords[static_cast<std::size_t>(c)] = c;
    }

    for (const std::int64_t c : coords) {
      std::vector<double> bumped(*at[i].values);
      const double orig = bumped[static_cast<std::size_t>(c)];
      bumped[static_cast<std::size_t>(c)] = orig + opts.h;
      point[i] = make_tensor(at[i].shape, std::move(bumped));
      const double fp = eval_scalar(f, point);

      std::vector<double> bumped2(*at[i].values);
      bumped2[static_cast<std::size_t>(c)] = orig - opts.h;
      point[i] = make_tensor(at[i].shape, std::move(bumped2));
      const double fm = eval_scalar(f, point);

      point[i] = at[i].detached();

      const double fd = (fp - fm) / (2.0 * opts.h);
      const double an = analytic[i].at(c);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-12});
      max_rel = std::max(max_rel, std::abs(fd - an) / denom);
    }
  }
  return max_rel;
}

double finite_difference_check(const ScalarFn& f, const std::vector<Tensor>& at,
                               const FdOptions& opts) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(at.size());
  for (const Tensor& t : at) leaves.push_back(tape.leaf(t.detached()));
  const Tensor loss = f(leaves);
  if (loss.numel() != 1)
    throw std::invalid_argument("finite_difference_check: f did not return a scalar");
  if (!loss.on_tape())
    throw std::invalid_argument("finite_difference_check: f ignored its tape-bound inputs");
  const Gradients g = grad(loss, leaves, /*create_graph=*/false);
  return fd_max_rel_error(f, at, g.tensors, opts);
}

}  // namespace metalm
