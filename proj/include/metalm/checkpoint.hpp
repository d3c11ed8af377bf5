// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-describing binary container:
//   bytes 0..3   magic "MLM1"
//   u64 LE       JSON header length H
//   H bytes      JSON header {kind, extra, tensors:[{name, shape}...]}
//   payload      tensor data in header order, f64 little-endian, row-major
// The same container carries model checkpoints (kind "model", extra holds
// config + seed) and optimizer state (kind "opt_state").

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "metalm/model.hpp"
#include "metalm/tensor.hpp"

namespace metalm {

struct Container {
  std::string kind;
  nlohmann::json extra;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

void save_params(const std::string& path, const Params& params);
Params load_params(const std::string& path);

}  // namespace metalm
