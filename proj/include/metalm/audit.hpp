// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Allocation audit for full parameter sets. Counts the collections that hold
// a complete copy of the model parameters (the unadapted set, each adapted
// set, the meta-gradient workspace); per-step activation and gradient
// temporaries on the tape are not parameter sets and are not counted.

#pragma once

#include <cstdint>

namespace metalm::audit {

std::int64_t live_param_sets();
std::int64_t peak_param_sets();
void reset_peak();

class ParamSetToken {
 public:
  ParamSetToken();
  ParamSetToken(ParamSetToken&& other) noexcept;
  ParamSetToken& operator=(ParamSetToken&& other) noexcept;
  ParamSetToken(const ParamSetToken&) = delete;
  ParamSetToken& operator=(const ParamSetToken&) = delete;
  ~ParamSetToken();

 private:
  void release();
  bool armed_ = true;
};

}  // namespace metalm::audit
