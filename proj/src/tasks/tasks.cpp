// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

namespace metalm::tasks {

const char* family_name(Family f) {
  switch (f) {
    case Family::label_mapping: return "label-mapping";
    case Family::linear_sign: return "linear-sign";
    case Family::kv_lookup: return "key-value-lookup";
  }
  return "?";
}

std::string TaskSpec::name() const {
  return domain + "#" + std::to_string(uid);
}

bool TaskSpec::same_params(const TaskSpec& other) const {
  return family == other.family && domain == other.domain && label_set == other.label_set &&
         items == other.items && item_class == other.item_class && weights == other.weights &&
         plus_tok == other.plus_tok && minus_tok == other.minus_tok;
}

const std::vector<TaskData>& TaskUniverse::split(std::string_view name) const {
  if (name == "train") return train_tasks;
  if (name == "test") return test_tasks;
  if (name == "unseen") return unseen_tasks;
  throw std::invalid_argument("TaskUniverse::split: unknown split '" + std::string(name) + "'");
}

namespace {

constexpr std::int32_t kDomainsPerFamily = 4;  // last is unseen-only

struct DomainTokens {
  std::string name;
  std::vector<std::int32_t> tokens;
};

struct FamilyLayout {
  Family family;
  std::vector<DomainTokens> domains;
};

char domain_letter(std::int32_t d) { return static_cast<char>('a' + d); }

// Carve the content range into per-(family, domain) token blocks.
std::vector<FamilyLayout> carve_domains(const UniverseConfig& cfg, const prompt::Vocab& vocab) {
  const std::int64_t need =
      static_cast<std::int64_t>(kDomainsPerFamily) *
      (cfg.mapping_words + 2 + cfg.lookup_keys);
  const std::int64_t have = vocab.content_end - vocab.content_begin;
  if (need > have)
    throw std::invalid_argument("make_task_universe: need " + std::to_string(need) +
                                " content tokens, vocab provides " + std::to_string(have));
  std::int32_t next = vocab.content_begin;
  const auto take = [&next](std::int32_t count) {
    std::vector<std::int32_t> out(static_cast<std::size_t>(count));
    for (std::int32_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = next++;
    return out;
  };
  std::vector<FamilyLayout> layouts(3);
  layouts[0].family = Family::label_mapping;
  layouts[1].family = Family::linear_sign;
  layouts[2].family = Family::kv_lookup;
  for (std::int32_t d = 0; d < kDomainsPerFamily; ++d)
    layouts[0].domains.push_back({std::string("map-") + domain_letter(d), take(cfg.mapping_words)});
  for (std::int32_t d = 0; d < kDomainsPerFamily; ++d)
    layouts[1].domains.push_back({std::string("sign-") + domain_letter(d), take(2)});
  for (std::int32_t d = 0; d < kDomainsPerFamily; ++d)
    layouts[2].domains.push_back({std::string("kv-") + domain_letter(d), take(cfg.lookup_keys)});
  return layouts;
}

void validate_config(const UniverseConfig& cfg, const prompt::Vocab& vocab) {
  if (cfg.train_tasks < 1 || cfg.test_tasks < 1 || cfg.unseen_tasks < 1)
    throw std::invalid_argument("make_task_universe: every split needs at least one task");
  if (cfg.sign_features < 1 || cfg.sign_features % 2 == 0)
    throw std::invalid_argument("make_task_universe: sign_features must be odd");
  if (cfg.mapping_labels < 2 || cfg.mapping_words % cfg.mapping_labels != 0)
    throw std::invalid_argument("make_task_universe: mapping_labels must be >= 2 and divide mapping_words");
  if (cfg.lookup_values < 2 || cfg.lookup_keys % cfg.lookup_values != 0)
    throw std::invalid_argument("make_task_universe: lookup_values must be >= 2 and divide lookup_keys");
  const std::int32_t max_labels = static_cast<std::int32_t>(vocab.label_ids.size());
  if (cfg.mapping_labels > max_labels || cfg.lookup_values > max_labels || max_labels < 2)
    throw std::invalid_argument("make_task_universe: label pool too small");
  if (cfg.train_pool < 4 || cfg.test_pool < 1)
    throw std::invalid_argument("make_task_universe: pools too small");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0))
    throw std::invalid_argument("make_task_universe: train_fraction must be in (0,1]");
}

std::vector<std::int32_t> pick_labels(const prompt::Vocab& vocab, std::int32_t count,
                                      StreamRng& rng) {
  const auto idx = rng.sample_distinct(static_cast<std::int64_t>(vocab.label_ids.size()), count);
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(count));
  for (const auto i : idx) out.push_back(vocab.label_ids[static_cast<std::size_t>(i)]);
  std::sort(out.begin(), out.end());
  return out;
}

TaskSpec make_spec(Family family, const DomainTokens& dom, const UniverseConfig& cfg,
                   const prompt::Vocab& vocab, std::uint64_t task_seed) {
  TaskSpec spec;
  spec.family = family;
  spec.domain = dom.name;
  spec.task_seed = task_seed;
  StreamRng rng(task_seed, "task-params");
  switch (family) {
    case Family::label_mapping: {
      spec.label_set = pick_labels(vocab, cfg.mapping_labels, rng);
      spec.items = dom.tokens;
      // balanced partition: shuffled words dealt round-robin to classes
      std::vector<std::int32_t> order(spec.items.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
      rng.shuffle(order);
      spec.item_class.assign(spec.items.size(), 0);
      for (std::size_t i = 0; i < order.size(); ++i)
        spec.item_class[static_cast<std::size_t>(order[i])] =
            static_cast<std::int32_t>(i % static_cast<std::size_t>(cfg.mapping_labels));
      break;
    }
    case Family::linear_sign: {
      spec.label_set = pick_labels(vocab, 2, rng);
      spec.plus_tok = dom.tokens.at(0);
      spec.minus_tok = dom.tokens.at(1);
      spec.n_features = cfg.sign_features;
      spec.weights.resize(static_cast<std::size_t>(cfg.sign_features));
      for (auto& w : spec.weights) w = rng.next_below(2) == 0 ? -1 : 1;
      break;
    }
    case Family::kv_lookup: {
      spec.label_set = pick_labels(vocab, cfg.lookup_values, rng);
      spec.items = dom.tokens;
      std::vector<std::int32_t> order(spec.items.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
      rng.shuffle(order);
      spec.item_class.assign(spec.items.size(), 0);
      for (std::size_t i = 0; i < order.size(); ++i)
        spec.item_class[static_cast<std::size_t>(order[i])] =
            static_cast<std::int32_t>(i % static_cast<std::size_t>(cfg.lookup_values));
      break;
    }
  }
  return spec;
}

prompt::Example nth_example(const TaskSpec& spec, std::int64_t index, StreamRng& shuffle_rng,
                            std::vector<std::int32_t>& deck) {
  // deck cycles through the family's instance space, reshuffled per pass, so
  // label marginals stay exactly balanced.
  prompt::Example e;
  e.pool_id = index;
  switch (spec.family) {
    case Family::label_mapping:
    case Family::kv_lookup: {
      const std::size_t m = spec.items.size();
      if (deck.empty()) {
        deck.resize(m);
        for (std::size_t i = 0; i < m; ++i) deck[i] = static_cast<std::int32_t>(i);
      }
      const std::size_t pos = static_cast<std::size_t>(index) % m;
      if (pos == 0) shuffle_rng.shuffle(deck);
      const std::int32_t item = deck[pos];
      e.x = {spec.items[static_cast<std::size_t>(item)]};
      e.y = spec.label_set[static_cast<std::size_t>(spec.item_class[static_cast<std::size_t>(item)])];
      break;
    }
    case Family::linear_sign: {
      const std::size_t m = static_cast<std::size_t>(1) << spec.weights.size();
      if (deck.empty()) {
        deck.resize(m);
        for (std::size_t i = 0; i < m; ++i) deck[i] = static_cast<std::int32_t>(i);
      }
      const std::size_t pos = static_cast<std::size_t>(index) % m;
      if (pos == 0) shuffle_rng.shuffle(deck);
      const std::int32_t pattern = deck[pos];
      std::int32_t dotp = 0;
      for (std::size_t f = 0; f < spec.weights.size(); ++f) {
        const std::int32_t bit = (pattern >> f) & 1;
        const std::int32_t feat = bit ? 1 : -1;
        e.x.push_back(bit ? spec.plus_tok : spec.minus_tok);
        dotp += spec.weights[f] * feat;
      }
      e.y = spec.label_set[dotp > 0 ? 1 : 0];
      break;
    }
  }
  return e;
}

std::vector<prompt::Example> build_pool(const TaskSpec& spec, std::int32_t count,
                                        std::int64_t id_base, std::uint64_t seed,
                                        std::string_view purpose) {
  StreamRng rng(seed, purpose, static_cast<std::uint64_t>(spec.uid));
  std::vector<std::int32_t> deck;
  std::vector<prompt::Example> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (std::int32_t i = 0; i < count; ++i)
    pool.push_back(nth_example(spec, id_base + i, rng, deck));
  return pool;
}

}  // namespace

TaskUniverse make_task_universe(const UniverseConfig& cfg, const prompt::Vocab& vocab,
                                std::uint64_t seed) {
  vocab.validate();
  validate_config(cfg, vocab);
  TaskUniverse u;
  u.cfg = cfg;
  u.vocab = vocab;
  const auto layouts = carve_domains(cfg, vocab);

  std::int32_t uid = 0;
  std::vector<TaskSpec> all_specs;
  const auto gen_split =
      [&](std::vector<TaskData>& out, std::int32_t count, bool unseen_only, const char* tag) {
        for (std::int32_t i = 0; i < count; ++i) {
          const auto& layout = layouts[static_cast<std::size_t>(i) % layouts.size()];
          const std::int32_t domain_idx =
              unseen_only ? (kDomainsPerFamily - 1)
                          : static_cast<std::int32_t>((i / layouts.size()) % (kDomainsPerFamily - 1));
          const DomainTokens& dom = layout.domains[static_cast<std::size_t>(domain_idx)];
          TaskSpec spec;
          bool fresh = false;
          for (std::uint64_t attempt = 0; attempt < 100 && !fresh; ++attempt) {
            StreamRng seeder(seed, "task-seed", static_cast<std::uint64_t>(uid), attempt);
            spec = make_spec(layout.family, dom, cfg, vocab, seeder.next_u64());
            fresh = true;
            for (const TaskSpec& other : all_specs)
              if (spec.same_params(other)) {
                fresh = false;
                break;
              }
          }
          if (!fresh)
            throw std::invalid_argument(
                std::string("make_task_universe: split sizes exceed the distinct tasks "
                            "available in domain ") +
                dom.name + " (" + tag + ")");
          spec.uid = uid++;
          TaskData data;
          data.spec = std::move(spec);
          data.train_pool = build_pool(data.spec, cfg.train_pool, 0, seed, "train-pool");
          data.test_pool =
              build_pool(data.spec, cfg.test_pool, cfg.train_pool, seed, "test-pool");
          if (cfg.train_fraction < 1.0) {
            StreamRng srng(seed, "stratify", static_cast<std::uint64_t>(data.spec.uid));
            data.train_pool = stratified_subsample(data.train_pool, cfg.train_fraction, srng);
          }
          out.push_back(std::move(data));
          all_specs.push_back(out.back().spec);
        }
      };

  gen_split(u.train_tasks, cfg.train_tasks, false, "train");
  gen_split(u.test_tasks, cfg.test_tasks, false, "test");
  gen_split(u.unseen_tasks, cfg.unseen_tasks, true, "unseen");
  return u;
}

std::vector<prompt::Example> sample_exemplars(const TaskData& task, const prompt::Example& target,
                                              std::int32_t k, StreamRng& rng) {
  const auto& pool = task.train_pool;
  if (k == 0) return {};

  // Bucket candidates by label. Exemplar sets are drawn label-balanced so the
  // in-context label histogram carries no signal about the answer; retrieval
  // from the exemplars is the only route to the label.
  std::map<std::int32_t, std::vector<std::int64_t>> by_label;
  std::int64_t candidate_count = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].pool_id == target.pool_id) continue;
    by_label[pool[i].y].push_back(static_cast<std::int64_t>(i));
    ++candidate_count;
  }
  if (static_cast<std::int64_t>(k) > candidate_count)
    throw std::invalid_argument("sample_exemplars: pool too small for " + std::to_string(k) +
                                " exemplars");

  std::vector<std::int32_t> labels;
  for (const auto& [label, idxs] : by_label) labels.push_back(label);

  // Per-label quotas: k/L each, remainder spread deterministically from a
  // rotating offset so no label is systematically favored.
  const std::int64_t n_labels = static_cast<std::int64_t>(labels.size());
  std::vector<std::int64_t> quota(labels.size(), k / n_labels);
  const std::int64_t extra = k % n_labels;
  const std::int64_t offset = extra > 0 ? rng.next_below(n_labels) : 0;
  for (std::int64_t e = 0; e < extra; ++e)
    ++quota[static_cast<std::size_t>((offset + e) % n_labels)];

  std::vector<prompt::Example> out;
  out.reserve(static_cast<std::size_t>(k));
  std::vector<std::size_t> slot_of_label_start;
  for (std::size_t li = 0; li < labels.size(); ++li) {
    auto& idxs = by_label[labels[li]];
    std::int64_t want = quota[li];
    if (want > static_cast<std::int64_t>(idxs.size())) want = static_cast<std::int64_t>(idxs.size());
    const auto picks = rng.sample_distinct(static_cast<std::int64_t>(idxs.size()), want);
    for (const auto p : picks)
      out.push_back(pool[static_cast<std::size_t>(idxs[static_cast<std::size_t>(p)])]);
  }
  // top up if some label bucket ran short
  while (static_cast<std::int64_t>(out.size()) < k) {
    const auto i = rng.next_below(static_cast<std::int64_t>(pool.size()));
    const auto& e = pool[static_cast<std::size_t>(i)];
    if (e.pool_id == target.pool_id) continue;
    bool dup = false;
    for (const auto& o : out) dup = dup || o.pool_id == e.pool_id;
    if (!dup) out.push_back(e);
  }

  // Retrieval families need an informative exemplar: one whose x matches the
  // target. Replace a same-label slot so the balance is kept.
  if (task.spec.family == Family::label_mapping || task.spec.family == Family::kv_lookup) {
    bool informative = false;
    for (const auto& e : out)
      if (e.x == target.x) {
        informative = true;
        break;
      }
    if (!informative) {
      std::vector<std::int64_t> same_x;
      for (const auto ci : by_label[target.y])
        if (pool[static_cast<std::size_t>(ci)].x == target.x) same_x.push_back(ci);
      if (!same_x.empty()) {
        const auto& replacement =
            pool[static_cast<std::size_t>(same_x[static_cast<std::size_t>(rng.next_below(
                static_cast<std::int64_t>(same_x.size())))])];
        std::vector<std::size_t> same_label_slots;
        for (std::size_t s = 0; s < out.size(); ++s)
          if (out[s].y == target.y) same_label_slots.push_back(s);
        const std::size_t victim =
            same_label_slots.empty()
                ? static_cast<std::size_t>(rng.next_below(k))
                : same_label_slots[static_cast<std::size_t>(
                      rng.next_below(static_cast<std::int64_t>(same_label_slots.size())))];
        out[victim] = replacement;
      }
    }
  }

  // presentation order must not leak the quota structure
  rng.shuffle(out);
  return out;
}

TaskBatch sample_task_batch(const TaskUniverse& universe, std::string_view split, std::int32_t n,
                            std::int32_t k, std::int32_t batch_size, std::int32_t shots,
                            StreamRng& rng) {
  if (n < 1 || k < 1 || batch_size < 1)
    throw std::invalid_argument("sample_task_batch: n, k, batch_size must be >= 1");
  const auto& tasks = universe.split(split);
  if (static_cast<std::size_t>(n) > tasks.size())
    throw std::invalid_argument("sample_task_batch: asked for " + std::to_string(n) +
                                " tasks, split has " + std::to_string(tasks.size()));
  TaskBatch out;
  const auto picks = rng.sample_distinct(static_cast<std::int64_t>(tasks.size()), n);
  for (const auto p : picks) out.task_index.push_back(static_cast<std::int32_t>(p));

  const std::int32_t per_set = k * batch_size;
  for (const auto ti : out.task_index) {
    const TaskData& task = tasks[static_cast<std::size_t>(ti)];
    const std::int64_t pool_size = static_cast<std::int64_t>(task.train_pool.size());
    if (2 * per_set > pool_size)
      throw std::invalid_argument("sample_task_batch: task " + task.spec.name() + " pool (" +
                                  std::to_string(pool_size) +
                                  ") too small for disjoint support/query of " +
                                  std::to_string(per_set) + " each");
    const auto targets = rng.sample_distinct(pool_size, 2 * per_set);
    const auto fill = [&](std::vector<std::vector<PromptExample>>& dst, std::int64_t offset) {
      dst.resize(static_cast<std::size_t>(k));
      for (std::int32_t b = 0; b < k; ++b) {
        auto& batch = dst[static_cast<std::size_t>(b)];
        batch.reserve(static_cast<std::size_t>(batch_size));
        for (std::int32_t e = 0; e < batch_size; ++e) {
          const auto idx = targets[static_cast<std::size_t>(offset + b * batch_size + e)];
          PromptExample pe;
          pe.target = task.train_pool[static_cast<std::size_t>(idx)];
          pe.exemplars = sample_exemplars(task, pe.target, shots, rng);
          batch.push_back(std::move(pe));
        }
      }
    };
    out.support.emplace_back();
    out.query.emplace_back();
    fill(out.support.back(), 0);
    fill(out.query.back(), per_set);
  }
  return out;
}

std::vector<PromptExample> sample_plain_batch(const TaskUniverse& universe, std::string_view split,
                                              std::int32_t batch_size, std::int32_t shots,
                                              StreamRng& rng) {
  if (batch_size < 1) throw std::invalid_argument("sample_plain_batch: batch_size must be >= 1");
  const auto& tasks = universe.split(split);
  const TaskData& task = tasks[static_cast<std::size_t>(rng.next_below(
      static_cast<std::int64_t>(tasks.size())))];
  const std::int64_t pool_size = static_cast<std::int64_t>(task.train_pool.size());
  if (batch_size > pool_size)
    throw std::invalid_argument("sample_plain_batch: batch larger than task pool");
  const auto targets = rng.sample_distinct(pool_size, batch_size);
  std::vector<PromptExample> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (const auto idx : targets) {
    PromptExample pe;
    pe.target = task.train_pool[static_cast<std::size_t>(idx)];
    pe.exemplars = sample_exemplars(task, pe.target, shots, rng);
    out.push_back(std::move(pe));
  }
  return out;
}

std::vector<prompt::Example> stratified_subsample(const std::vector<prompt::Example>& pool,
                                                  double fraction, StreamRng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("stratified_subsample: fraction must be in (0,1]");
  if (fraction == 1.0) return pool;

  std::map<std::int32_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < pool.size(); ++i) by_label[pool[i].y].push_back(i);

  const std::int64_t total_target = static_cast<std::int64_t>(
      std::floor(fraction * static_cast<double>(pool.size()) + 0.5));

  struct Slot {
    std::int32_t label;
    std::int64_t base;
    double remainder;
  };
  std::vector<Slot> slots;
  std::int64_t assigned = 0;
  for (const auto& [label, idxs] : by_label) {
    const double raw = fraction * static_cast<double>(idxs.size());
    const std::int64_t base = static_cast<std::int64_t>(std::floor(raw));
    slots.push_back({label, base, raw - static_cast<double>(base)});
    assigned += base;
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return a.label < b.label;
  });
  std::map<std::int32_t, std::int64_t> want;
  for (const auto& s : slots) want[s.label] = s.base;
  for (std::int64_t extra = total_target - assigned; extra > 0; --extra)
    ++want[slots[static_cast<std::size_t>((total_target - assigned) - extra) % slots.size()].label];

  std::vector<std::uint8_t> keep(pool.size(), 0);
  for (auto& [label, idxs] : by_label) {
    const std::int64_t w = want[label];
    if (w <= 0)
      throw std::invalid_argument("stratified_subsample: fraction " + std::to_string(fraction) +
                                  " leaves zero examples for label " + std::to_string(label));
    const auto picks = rng.sample_distinct(static_cast<std::int64_t>(idxs.size()), w);
    for (const auto p : picks) keep[idxs[static_cast<std::size_t>(p)]] = 1;
  }
  std::vector<prompt::Example> out;
  out.reserve(static_cast<std::size_t>(total_target));
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (keep[i]) out.push_back(pool[i]);
  return out;
}

std::int32_t rule_based_solve(const TaskSpec& spec, std::span<const prompt::Example> exemplars,
                              const std::vector<std::int32_t>& target_x) {
  const auto majority = [&]() {
    std::map<std::int32_t, std::int32_t> votes;
    for (const auto& e : exemplars) ++votes[e.y];
    std::int32_t best = spec.label_set.at(0), best_n = -1;
    for (const auto label : spec.label_set) {
      const auto it = votes.find(label);
      const std::int32_t c = it == votes.end() ? 0 : it->second;
      if (c > best_n) {
        best_n = c;
        best = label;
      }
    }
    return best;
  };

  switch (spec.family) {
    case Family::label_mapping:
    case Family::kv_lookup: {
      for (const auto& e : exemplars)
        if (e.x == target_x) return e.y;
      return majority();
    }
    case Family::linear_sign: {
      // enumerate weight vectors consistent with the exemplars
      const std::size_t nf = static_cast<std::size_t>(spec.n_features);
      std::int64_t votes_pos = 0, votes_neg = 0;
      for (std::uint32_t w = 0; w < (1u << nf); ++w) {
        bool ok = true;
        for (const auto& e : exemplars) {
          std::int32_t dotp = 0;
          for (std::size_t f = 0; f < nf; ++f) {
            const std::int32_t feat = e.x[f] == spec.plus_tok ? 1 : -1;
            const std::int32_t wf = ((w >> f) & 1) ? 1 : -1;
            dotp += wf * feat;
          }
          if (e.y != spec.label_set[dotp > 0 ? 1 : 0]) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        std::int32_t dotp = 0;
        for (std::size_t f = 0; f < nf; ++f) {
          const std::int32_t feat = target_x[f] == spec.plus_tok ? 1 : -1;
          const std::int32_t wf = ((w >> f) & 1) ? 1 : -1;
          dotp += wf * feat;
        }
        (dotp > 0 ? votes_pos : votes_neg) += 1;
      }
      if (votes_pos == 0 && votes_neg == 0) return majority();
      if (votes_pos == votes_neg) return spec.label_set[0];  // lowest id on ties
      return spec.label_set[votes_pos > votes_neg ? 1 : 0];
    }
  }
  return spec.label_set.at(0);
}

void dump_universe(std::ostream& os, const TaskUniverse& universe) {
  const auto emit = [&os](const std::vector<TaskData>& tasks, const char* split) {
    for (const auto& t : tasks)
      os << family_name(t.spec.family) << '\t' << t.spec.domain << '\t' << t.spec.task_seed
         << '\t' << split << '\n';
  };
  emit(universe.train_tasks, "train");
  emit(universe.test_tasks, "test");
  emit(universe.unseen_tasks, "unseen");
}

}  // namespace metalm::tasks
