// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// SGD and AdamW with bias-corrected moments, plus the inner/outer coupling
// modes: `none` re-initializes the inner moments at every meta-update, `copy`
// moves (m, v, t) into the outer optimizer before each meta-update and back
// after, `shared` keeps a single store (and a single step counter) that every
// inner and outer application advances.
//
// Two moment conventions exist behind a switch: `read_time` (standard AdamW:
// store raw moments, correct when reading) and `stored_corrected` (divide by
// the bias correction inside the recurrence and store that). Both use the
// same update arithmetic otherwise.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metalm/model.hpp"
#include "metalm/tape.hpp"
#include "metalm/tensor.hpp"

namespace metalm::optim {

enum class OptKind { sgd, adamw };
enum class Sharing { none, copy, shared };
enum class MomentConvention { read_time, stored_corrected };

const char* kind_name(OptKind k);
const char* sharing_name(Sharing s);
const char* convention_name(MomentConvention c);

struct OptHyper {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 0.0;  // global-norm cap, 0 = off

  void validate() const;  // 0 <= beta1, beta2 < 1; lr >= 0 (0 = null step)
};

struct MomentStore {
  std::vector<std::vector<double>> m, v;
  std::vector<Shape> shapes;
  std::int64_t t = 0;

  bool initialized() const { return !shapes.empty(); }
  void ensure_shapes(std::span<const Tensor> params);
  void reset();  // zeros and t = 0, keeping shapes
};

struct OptState {
  OptKind kind = OptKind::adamw;
  OptHyper hyper;
  MomentConvention convention = MomentConvention::read_time;
  std::shared_ptr<MomentStore> store;  // present for adamw

  bool stateless() const { return kind == OptKind::sgd; }
  void reset();
};

OptState make_opt(OptKind kind, OptHyper hyper,
                  MomentConvention conv = MomentConvention::read_time);

// Inner/outer pair wired for the given sharing mode. Sharing other than
// `none` requires both optimizers adaptive.
std::pair<OptState, OptState> make_shared_pair(OptKind inner_kind, OptHyper inner_hyper,
                                               OptKind outer_kind, OptHyper outer_hyper,
                                               Sharing sharing,
                                               MomentConvention conv = MomentConvention::read_time);

// Copies (m, v, t) between adaptive states (the `copy` coupling).
void copy_state(const OptState& src, OptState& dst);

// Raw in-place steps. Non-finite gradients reject the step with the state
// untouched. Shapes of grads must mirror params.
void apply_step(OptState& state, std::vector<Tensor>& params, std::span<const Tensor> grads);
void apply_step(OptState& state, Params& params, const Gradients& grads);
void adamw_step(OptState& state, std::vector<Tensor>& params, std::span<const Tensor> grads);
void sgd_step(OptState& state, std::vector<Tensor>& params, std::span<const Tensor> grads);

// Tape-expression form of the same step, used by a tracked inner loop: the
// returned tensors stay differentiable with respect to `params` through the
// current gradient, while historical moments are read from the store as
// constants and the store is advanced with detached values. Produces bit-
// identical values to the raw step.
std::vector<Tensor> step_differentiable(OptState& state, const std::vector<Tensor>& params,
                                        const std::vector<Tensor>& grads);

void save_opt_state(const std::string& path, const OptState& state);
OptState load_opt_state(const std::string& path);

}  // namespace metalm::optim
