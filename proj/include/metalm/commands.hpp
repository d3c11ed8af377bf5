// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace metalm::cli {

struct CommandOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const std::string& config_path, const CommandOverrides& ov = {});
int cmd_evaluate(const std::string& config_path, const std::string& checkpoint_path,
                 const CommandOverrides& ov = {});
int cmd_adapt(const std::string& config_path, const std::string& checkpoint_path,
              const CommandOverrides& ov = {});
int cmd_ablate_optimizers(const std::string& config_path, const CommandOverrides& ov = {});
int cmd_verify(std::ostream& os);

// Oracle suite behind `verify`; prints one PASS/FAIL line per oracle.
bool run_verify_suite(std::ostream& os);

}  // namespace metalm::cli
