// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace metalm::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v);
    return out;
  } catch (const std::exception&) {
    bad_value(key, v);
  }
}

std::vector<std::uint64_t> parse_uint_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, v);
    out.push_back(parse_uint(key, item));
  }
  if (out.empty()) bad_value(key, v);
  return out;
}

meta::Mode parse_mode(const std::string& key, const std::string& v) {
  if (v == "metaicl") return meta::Mode::metaicl;
  if (v == "fomaml") return meta::Mode::fomaml;
  if (v == "maml") return meta::Mode::maml;
  bad_value(key, v);
}

optim::OptKind parse_opt_kind(const std::string& key, const std::string& v) {
  if (v == "sgd") return optim::OptKind::sgd;
  if (v == "adamw") return optim::OptKind::adamw;
  bad_value(key, v);
}

optim::Sharing parse_sharing(const std::string& key, const std::string& v) {
  if (v == "none") return optim::Sharing::none;
  if (v == "copy") return optim::Sharing::copy;
  if (v == "shared") return optim::Sharing::shared;
  bad_value(key, v);
}

optim::MomentConvention parse_convention(const std::string& key, const std::string& v) {
  if (v == "read_time") return optim::MomentConvention::read_time;
  if (v == "stored_corrected") return optim::MomentConvention::stored_corrected;
  bad_value(key, v);
}

prompt::PromptMode parse_prompt_mode(const std::string& key, const std::string& v) {
  if (v == "standard") return prompt::PromptMode::standard;
  if (v == "channel") return prompt::PromptMode::channel;
  bad_value(key, v);
}

void apply(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const auto i32 = [&](auto& dst) { dst = static_cast<std::int32_t>(parse_int(key, value)); };
  const auto i64 = [&](auto& dst) { dst = parse_int(key, value); };

  if (key == "model.vocab_size") i64(c.model.vocab_size);
  else if (key == "model.d_model") i64(c.model.d_model);
  else if (key == "model.n_layers") i64(c.model.n_layers);
  else if (key == "model.n_heads") i64(c.model.n_heads);
  else if (key == "model.max_seq") i64(c.model.max_seq);
  else if (key == "tasks.train_tasks") i32(c.task_cfg.train_tasks);
  else if (key == "tasks.test_tasks") i32(c.task_cfg.test_tasks);
  else if (key == "tasks.unseen_tasks") i32(c.task_cfg.unseen_tasks);
  else if (key == "tasks.train_pool") i32(c.task_cfg.train_pool);
  else if (key == "tasks.test_pool") i32(c.task_cfg.test_pool);
  else if (key == "tasks.shots") i32(c.task_cfg.shots);
  else if (key == "tasks.mapping_words") i32(c.task_cfg.mapping_words);
  else if (key == "tasks.mapping_labels") i32(c.task_cfg.mapping_labels);
  else if (key == "tasks.sign_features") i32(c.task_cfg.sign_features);
  else if (key == "tasks.lookup_keys") i32(c.task_cfg.lookup_keys);
  else if (key == "tasks.lookup_values") i32(c.task_cfg.lookup_values);
  else if (key == "tasks.train_fraction") c.task_cfg.train_fraction = parse_double(key, value);
  else if (key == "meta.mode") c.meta_cfg.mode = parse_mode(key, value);
  else if (key == "meta.n") i32(c.meta_cfg.n);
  else if (key == "meta.k") i32(c.meta_cfg.k);
  else if (key == "meta.alpha") c.meta_cfg.alpha = parse_double(key, value);
  else if (key == "meta.beta") c.meta_cfg.beta = parse_double(key, value);
  else if (key == "meta.inner_opt") c.meta_cfg.inner_opt = parse_opt_kind(key, value);
  else if (key == "meta.outer_opt") c.meta_cfg.outer_opt = parse_opt_kind(key, value);
  else if (key == "meta.sharing") c.meta_cfg.sharing = parse_sharing(key, value);
  else if (key == "meta.convention") c.meta_cfg.convention = parse_convention(key, value);
  else if (key == "meta.steps") i64(c.meta_cfg.steps);
  else if (key == "meta.batch_size") i32(c.meta_cfg.batch_size);
  else if (key == "meta.prompt_mode") c.meta_cfg.prompt_mode = parse_prompt_mode(key, value);
  else if (key == "meta.warmup_steps") i64(c.meta_cfg.warmup_steps);
  else if (key == "meta.checkpoint_every") i64(c.meta_cfg.checkpoint_every);
  else if (key == "opt.beta1") c.meta_cfg.opt.beta1 = parse_double(key, value);
  else if (key == "opt.beta2") c.meta_cfg.opt.beta2 = parse_double(key, value);
  else if (key == "opt.eps") c.meta_cfg.opt.eps = parse_double(key, value);
  else if (key == "opt.weight_decay") c.meta_cfg.opt.weight_decay = parse_double(key, value);
  else if (key == "opt.grad_clip") c.meta_cfg.opt.grad_clip = parse_double(key, value);
  else if (key == "eval.seeds") c.eval_cfg.seeds = parse_uint_list(key, value);
  else if (key == "eval.examples_per_task") i32(c.eval_cfg.examples_per_task);
  else if (key == "eval.shots") i32(c.eval_cfg.shots);
  else if (key == "adapt.count") i32(c.adapt_count);
  else if (key == "adapt.steps") i32(c.adapt_steps);
  else if (key == "adapt.lr") c.adapt_lr = parse_double(key, value);
  else if (key == "ablate.seeds") c.ablate_seeds = parse_uint_list(key, value);
  else if (key == "ablate.steps") i64(c.ablate_steps);
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "master_seed") c.master_seed = parse_uint(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  meta_cfg.validate();
  if (adapt_count < 1 || adapt_steps < 1)
    throw std::invalid_argument("config: adapt.count and adapt.steps must be >= 1");
  if (adapt_lr < 0) throw std::invalid_argument("config: adapt.lr must be >= 0");
  if (eval_cfg.seeds.empty()) throw std::invalid_argument("config: eval.seeds is empty");
  if (ablate_seeds.empty()) throw std::invalid_argument("config: ablate.seeds is empty");
  if (out_dir.empty()) throw std::invalid_argument("config: out_dir is empty");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: " + origin + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    apply(cfg, key, value);
  }
  // eval prompt mode follows the training prompt mode
  cfg.eval_cfg.mode = cfg.meta_cfg.prompt_mode;
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_list(const std::vector<std::uint64_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "model.vocab_size=" << c.model.vocab_size << '\n';
  os << "model.d_model=" << c.model.d_model << '\n';
  os << "model.n_layers=" << c.model.n_layers << '\n';
  os << "model.n_heads=" << c.model.n_heads << '\n';
  os << "model.max_seq=" << c.model.max_seq << '\n';
  os << "tasks.train_tasks=" << c.task_cfg.train_tasks << '\n';
  os << "tasks.test_tasks=" << c.task_cfg.test_tasks << '\n';
  os << "tasks.unseen_tasks=" << c.task_cfg.unseen_tasks << '\n';
  os << "tasks.train_pool=" << c.task_cfg.train_pool << '\n';
  os << "tasks.test_pool=" << c.task_cfg.test_pool << '\n';
  os << "tasks.shots=" << c.task_cfg.shots << '\n';
  os << "tasks.mapping_words=" << c.task_cfg.mapping_words << '\n';
  os << "tasks.mapping_labels=" << c.task_cfg.mapping_labels << '\n';
  os << "tasks.sign_features=" << c.task_cfg.sign_features << '\n';
  os << "tasks.lookup_keys=" << c.task_cfg.lookup_keys << '\n';
  os << "tasks.lookup_values=" << c.task_cfg.lookup_values << '\n';
  os << "tasks.train_fraction=" << fmt_double(c.task_cfg.train_fraction) << '\n';
  os << "meta.mode=" << meta::mode_name(c.meta_cfg.mode) << '\n';
  os << "meta.n=" << c.meta_cfg.n << '\n';
  os << "meta.k=" << c.meta_cfg.k << '\n';
  os << "meta.alpha=" << fmt_double(c.meta_cfg.alpha) << '\n';
  os << "meta.beta=" << fmt_double(c.meta_cfg.beta) << '\n';
  os << "meta.inner_opt=" << optim::kind_name(c.meta_cfg.inner_opt) << '\n';
  os << "meta.outer_opt=" << optim::kind_name(c.meta_cfg.outer_opt) << '\n';
  os << "meta.sharing=" << optim::sharing_name(c.meta_cfg.sharing) << '\n';
  os << "meta.convention=" << optim::convention_name(c.meta_cfg.convention) << '\n';
  os << "meta.steps=" << c.meta_cfg.steps << '\n';
  os << "meta.batch_size=" << c.meta_cfg.batch_size << '\n';
  os << "meta.prompt_mode=" << prompt::mode_name(c.meta_cfg.prompt_mode) << '\n';
  os << "meta.warmup_steps=" << c.meta_cfg.warmup_steps << '\n';
  os << "meta.checkpoint_every=" << c.meta_cfg.checkpoint_every << '\n';
  os << "opt.beta1=" << fmt_double(c.meta_cfg.opt.beta1) << '\n';
  os << "opt.beta2=" << fmt_double(c.meta_cfg.opt.beta2) << '\n';
  os << "opt.eps=" << fmt_double(c.meta_cfg.opt.eps) << '\n';
  os << "opt.weight_decay=" << fmt_double(c.meta_cfg.opt.weight_decay) << '\n';
  os << "opt.grad_clip=" << fmt_double(c.meta_cfg.opt.grad_clip) << '\n';
  os << "eval.seeds=" << fmt_list(c.eval_cfg.seeds) << '\n';
  os << "eval.examples_per_task=" << c.eval_cfg.examples_per_task << '\n';
  os << "eval.shots=" << c.eval_cfg.shots << '\n';
  os << "adapt.count=" << c.adapt_count << '\n';
  os << "adapt.steps=" << c.adapt_steps << '\n';
  os << "adapt.lr=" << fmt_double(c.adapt_lr) << '\n';
  os << "ablate.seeds=" << fmt_list(c.ablate_seeds) << '\n';
  os << "ablate.steps=" << c.ablate_steps << '\n';
  os << "out_dir=" << c.out_dir << '\n';
  os << "master_seed=" << c.master_seed << '\n';
  return os.str();
}

}  // namespace metalm::cli
