// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/prompt.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace metalm::prompt {

const char* mode_name(PromptMode m) {
  return m == PromptMode::standard ? "standard" : "channel";
}

void Vocab::validate() const {
  if (bos == sep || bos == exs || sep == exs)
    throw std::invalid_argument("Vocab: reserved ids must be distinct");
  if (label_ids.empty()) throw std::invalid_argument("Vocab: no label ids");
  std::set<std::int32_t> seen{bos, sep, exs};
  for (auto id : label_ids) {
    if (!seen.insert(id).second)
      throw std::invalid_argument("Vocab: duplicate or reserved label id " + std::to_string(id));
    if (id >= content_begin && id < content_end)
      throw std::invalid_argument("Vocab: label id inside content range");
  }
  if (content_begin >= content_end) throw std::invalid_argument("Vocab: empty content range");
  if (content_end > vocab_size) throw std::invalid_argument("Vocab: content range exceeds vocab");
}

bool Vocab::is_label(std::int32_t id) const {
  return std::find(label_ids.begin(), label_ids.end(), id) != label_ids.end();
}

Vocab make_default_vocab(std::int64_t vocab_size, std::int32_t n_labels) {
  if (vocab_size < 3 + n_labels + 8)
    throw std::invalid_argument("make_default_vocab: vocab_size " + std::to_string(vocab_size) +
                                " too small for " + std::to_string(n_labels) + " labels");
  Vocab v;
  v.vocab_size = vocab_size;
  for (std::int32_t i = 0; i < n_labels; ++i) v.label_ids.push_back(3 + i);
  v.content_begin = 3 + n_labels;
  v.content_end = static_cast<std::int32_t>(vocab_size);
  v.validate();
  return v;
}

namespace {

std::int64_t unit_len(const Example& e) { return static_cast<std::int64_t>(e.x.size()) + 2; }

EncodedExample render_impl(PromptMode mode, std::span<const Example> exemplars,
                           const Example& target, const Vocab& vocab, std::int64_t max_len) {
  if (target.x.empty()) throw std::invalid_argument("render: target has empty input");
  if (target.y < 0) throw std::invalid_argument("render: target has no label");

  const std::int64_t target_len = 1 + unit_len(target);  // BOS + unit
  if (target_len > max_len)
    throw std::invalid_argument("render: target alone needs " + std::to_string(target_len) +
                                " tokens, max_len is " + std::to_string(max_len));

  // Drop whole oldest exemplars first until the prompt fits.
  std::size_t first = 0;
  std::int64_t len = target_len;
  for (const Example& e : exemplars) len += unit_len(e) + 1;  // unit + EXS
  while (first < exemplars.size() && len > max_len) {
    len -= unit_len(exemplars[first]) + 1;
    ++first;
  }

  EncodedExample enc;
  enc.mode = mode;
  enc.exemplars_used = exemplars.size() - first;
  enc.tokens.reserve(static_cast<std::size_t>(len));
  enc.tokens.push_back(vocab.bos);
  const auto push_unit = [&](const Example& e) {
    if (mode == PromptMode::standard) {
      enc.tokens.insert(enc.tokens.end(), e.x.begin(), e.x.end());
      enc.tokens.push_back(vocab.sep);
      enc.tokens.push_back(e.y);
    } else {
      enc.tokens.push_back(e.y);
      enc.tokens.push_back(vocab.sep);
      enc.tokens.insert(enc.tokens.end(), e.x.begin(), e.x.end());
    }
  };
  for (std::size_t i = first; i < exemplars.size(); ++i) {
    push_unit(exemplars[i]);
    enc.tokens.push_back(vocab.exs);
  }
  push_unit(target);

  enc.loss_mask.assign(enc.tokens.size(), 0);
  if (mode == PromptMode::standard) {
    const std::int32_t pos = static_cast<std::int32_t>(enc.tokens.size()) - 1;
    enc.answer_positions.push_back(pos);
    enc.loss_mask[static_cast<std::size_t>(pos)] = 1;
  } else {
    const std::size_t nx = target.x.size();
    for (std::size_t i = enc.tokens.size() - nx; i < enc.tokens.size(); ++i) {
      enc.answer_positions.push_back(static_cast<std::int32_t>(i));
      enc.loss_mask[i] = 1;
    }
  }
  return enc;
}

}  // namespace

EncodedExample render_standard(std::span<const Example> exemplars, const Example& target,
                               const Vocab& vocab, std::int64_t max_len) {
  return render_impl(PromptMode::standard, exemplars, target, vocab, max_len);
}

EncodedExample render_channel(std::span<const Example> exemplars, const Example& target,
                              const Vocab& vocab, std::int64_t max_len) {
  return render_impl(PromptMode::channel, exemplars, target, vocab, max_len);
}

EncodedExample render(PromptMode mode, std::span<const Example> exemplars, const Example& target,
                      const Vocab& vocab, std::int64_t max_len) {
  return render_impl(mode, exemplars, target, vocab, max_len);
}

DecodedPrompt decode_prompt(const EncodedExample& enc, const Vocab& vocab) {
  if (enc.tokens.empty() || enc.tokens[0] != vocab.bos)
    throw std::invalid_argument("decode_prompt: prompt does not start with BOS");
  DecodedPrompt out;
  std::vector<Example> units;
  Example cur;
  std::vector<std::int32_t> before_sep;
  bool seen_sep = false;
  std::vector<std::int32_t> after_sep;
  const auto flush = [&]() {
    if (!seen_sep) throw std::invalid_argument("decode_prompt: unit without SEP");
    Example e;
    if (enc.mode == PromptMode::standard) {
      if (after_sep.size() != 1)
        throw std::invalid_argument("decode_prompt: standard unit label is not a single token");
      e.x = before_sep;
      e.y = after_sep[0];
    } else {
      if (before_sep.size() != 1)
        throw std::invalid_argument("decode_prompt: channel unit label is not a single token");
      e.y = before_sep[0];
      e.x = after_sep;
    }
    units.push_back(std::move(e));
    before_sep.clear();
    after_sep.clear();
    seen_sep = false;
  };
  for (std::size_t i = 1; i < enc.tokens.size(); ++i) {
    const std::int32_t tok = enc.tokens[i];
    if (tok == vocab.exs) {
      flush();
    } else if (tok == vocab.sep) {
      if (seen_sep) throw std::invalid_argument("decode_prompt: two SEP in one unit");
      seen_sep = true;
    } else {
      (seen_sep ? after_sep : before_sep).push_back(tok);
    }
  }
  flush();
  out.target = units.back();
  units.pop_back();
  out.exemplars = std::move(units);
  return out;
}

namespace {

// Lowest label id wins ties: scan candidates in increasing id order with a
// strict improvement test.
std::vector<std::int32_t> sorted_by_id(std::span<const std::int32_t> candidates) {
  std::vector<std::int32_t> c(candidates.begin(), candidates.end());
  std::sort(c.begin(), c.end());
  return c;
}

}  // namespace

std::int32_t score_labels_standard(const Params& params, std::span<const Example> exemplars,
                                   const std::vector<std::int32_t>& target_x,
                                   std::span<const std::int32_t> candidates, const Vocab& vocab,
                                   std::int64_t max_len) {
  if (candidates.empty()) throw std::invalid_argument("score_labels: no candidates");
  Example target;
  target.x = target_x;
  target.y = candidates[0];  // placeholder; stripped below
  const EncodedExample enc = render_standard(exemplars, target, vocab, max_len);
  std::vector<std::int32_t> prefix(enc.tokens.begin(), enc.tokens.end() - 1);
  const Tensor logits = forward_logits(params, prefix);
  const double* row = logits.data() + (logits.shape[0] - 1) * logits.shape[1];

  double best = -std::numeric_limits<double>::infinity();
  std::int32_t best_id = -1;
  for (const std::int32_t c : sorted_by_id(candidates)) {
    if (c < 0 || c >= logits.shape[1])
      throw std::invalid_argument("score_labels: candidate id out of vocab");
    if (row[c] > best) {
      best = row[c];
      best_id = c;
    }
  }
  return best_id;
}

std::int32_t score_labels_channel(const Params& params, std::span<const Example> exemplars,
                                  const std::vector<std::int32_t>& target_x,
                                  std::span<const std::int32_t> candidates, const Vocab& vocab,
                                  std::int64_t max_len) {
  if (candidates.empty()) throw std::invalid_argument("score_labels: no candidates");
  double best = -std::numeric_limits<double>::infinity();
  std::int32_t best_id = -1;
  for (const std::int32_t c : sorted_by_id(candidates)) {
    Example target;
    target.x = target_x;
    target.y = c;
    const EncodedExample enc = render_channel(exemplars, target, vocab, max_len);
    const double lp = sequence_logprob(params, enc.tokens, enc.loss_mask);
    if (lp > best) {
      best = lp;
      best_id = c;
    }
  }
  return best_id;
}

std::int32_t score_labels(PromptMode mode, const Params& params, std::span<const Example> exemplars,
                          const std::vector<std::int32_t>& target_x,
                          std::span<const std::int32_t> candidates, const Vocab& vocab,
                          std::int64_t max_len) {
  return mode == PromptMode::standard
             ? score_labels_standard(params, exemplars, target_x, candidates, vocab, max_len)
             : score_labels_channel(params, exemplars, target_x, candidates, vocab, max_len);
}

std::string dump_prompt_line(const EncodedExample& enc) {
  std::ostringstream os;
  os << mode_name(enc.mode) << " tokens=";
  for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
    if (i) os << ',';
    os << enc.tokens[i];
  }
  os << " mask=";
  for (const auto m : enc.loss_mask) os << (m ? '1' : '0');
  return os.str();
}

}  // namespace metalm::prompt
