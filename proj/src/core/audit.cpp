// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/audit.hpp"

#include <atomic>

namespace metalm::audit {

namespace {
std::atomic<std::int64_t> g_live{0};
std::atomic<std::int64_t> g_peak{0};

void bump() {
  const std::int64_t now = ++g_live;
  std::int64_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}
}  // namespace

std::int64_t live_param_sets() { return g_live.load(); }
std::int64_t peak_param_sets() { return g_peak.load(); }
void reset_peak() { g_peak.store(g_live.load()); }

ParamSetToken::ParamSetToken() { bump(); }

ParamSetToken::ParamSetToken(ParamSetToken&& other) noexcept : armed_(other.armed_) {
  other.armed_ = false;
}

ParamSetToken& ParamSetToken::operator=(ParamSetToken&& other) noexcept {
  if (this != &other) {
    release();
    armed_ = other.armed_;
    other.armed_ = false;
  }
  return *this;
}

ParamSetToken::~ParamSetToken() { release(); }

void ParamSetToken::release() {
  if (armed_) {
    --g_live;
    armed_ = false;
  }
}

}  // namespace metalm::audit
