// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Prompt rendering and label scoring. Standard prompts read
//   BOS x1 SEP y1 EXS ... EXS xi SEP yi          (loss on yi)
// channel prompts flip each pair,
//   BOS y1 SEP x1 EXS ... EXS yi SEP xi          (loss on every xi token)
// Labels are single tokens, so standard scoring is one argmax over the
// next-token distribution; channel scoring renders one prompt per candidate
// label and compares sequence log-probabilities.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metalm/model.hpp"

namespace metalm::prompt {

enum class PromptMode { standard, channel };
const char* mode_name(PromptMode m);

struct Vocab {
  std::int32_t bos = 0;
  std::int32_t sep = 1;
  std::int32_t exs = 2;
  std::vector<std::int32_t> label_ids;
  std::int32_t content_begin = 0;  // [content_begin, content_end)
  std::int32_t content_end = 0;
  std::int64_t vocab_size = 0;

  void validate() const;
  bool is_label(std::int32_t id) const;
};

// Fixed layout: ids 0..2 reserved, then n_labels label tokens, rest content.
Vocab make_default_vocab(std::int64_t vocab_size, std::int32_t n_labels = 12);

// Raw (x, y) pair. pool_id identifies the instance inside its task pool;
// exemplar sampling excludes the target's own instance by id, not by value
// (equal-valued instances are what make retrieval families solvable).
struct Example {
  std::vector<std::int32_t> x;
  std::int32_t y = -1;
  std::int64_t pool_id = -1;
};

struct EncodedExample {
  std::vector<std::int32_t> tokens;
  std::vector<std::uint8_t> loss_mask;
  std::vector<std::int32_t> answer_positions;
  PromptMode mode = PromptMode::standard;
  std::size_t exemplars_used = 0;  // after truncation
};

// Oldest exemplars are dropped whole until the prompt fits max_len; a target
// that does not fit on its own is rejected.
EncodedExample render_standard(std::span<const Example> exemplars, const Example& target,
                               const Vocab& vocab, std::int64_t max_len);
EncodedExample render_channel(std::span<const Example> exemplars, const Example& target,
                              const Vocab& vocab, std::int64_t max_len);
EncodedExample render(PromptMode mode, std::span<const Example> exemplars, const Example& target,
                      const Vocab& vocab, std::int64_t max_len);

struct DecodedPrompt {
  std::vector<Example> exemplars;
  Example target;
};
DecodedPrompt decode_prompt(const EncodedExample& enc, const Vocab& vocab);

// Argmax over candidates of P(y | prompt) at the answer slot; ties go to the
// lowest label id.
std::int32_t score_labels_standard(const Params& params, std::span<const Example> exemplars,
                                   const std::vector<std::int32_t>& target_x,
                                   std::span<const std::int32_t> candidates, const Vocab& vocab,
                                   std::int64_t max_len);

// Argmax over candidates c of P(target_x | ..., c); one channel prompt per
// candidate; ties go to the lowest label id.
std::int32_t score_labels_channel(const Params& params, std::span<const Example> exemplars,
                                  const std::vector<std::int32_t>& target_x,
                                  std::span<const std::int32_t> candidates, const Vocab& vocab,
                                  std::int64_t max_len);

std::int32_t score_labels(PromptMode mode, const Params& params,
                          std::span<const Example> exemplars,
                          const std::vector<std::int32_t>& target_x,
                          std::span<const std::int32_t> candidates, const Vocab& vocab,
                          std::int64_t max_len);

// One prompt per line: token ids then the mask, for debug dumps.
std::string dump_prompt_line(const EncodedExample& enc);

}  // namespace metalm::prompt
