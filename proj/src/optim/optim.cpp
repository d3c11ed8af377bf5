// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0

#include "metalm/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "metalm/checkpoint.hpp"
#include "metalm/kernels.hpp"
#include "metalm/ops.hpp"

namespace metalm::optim {

namespace kn = metalm::kernels;

const char* kind_name(OptKind k) { return k == OptKind::sgd ? "sgd" : "adamw"; }

const char* sharing_name(Sharing s) {
  switch (s) {
    case Sharing::none: return "none";
    case Sharing::copy: return "copy";
    case Sharing::shared: return "shared";
  }
  return "?";
}

const char* convention_name(MomentConvention c) {
  return c == MomentConvention::read_time ? "read_time" : "stored_corrected";
}

void OptHyper::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw std::invalid_argument("OptHyper: lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("OptHyper: betas must lie in [0,1)");
  if (!(eps > 0.0)) throw std::invalid_argument("OptHyper: eps must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("OptHyper: weight_decay must be >= 0");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("OptHyper: grad_clip must be >= 0");
}

void MomentStore::ensure_shapes(std::span<const Tensor> params) {
  if (!initialized()) {
    shapes.reserve(params.size());
    m.reserve(params.size());
    v.reserve(params.size());
    for (const Tensor& p : params) {
      shapes.push_back(p.shape);
      m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
      v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
    return;
  }
  if (shapes.size() != params.size())
    throw std::invalid_argument("MomentStore: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (shapes[i] != params[i].shape)
      throw std::invalid_argument("MomentStore: shape mismatch at tensor " + std::to_string(i));
}

void MomentStore::reset() {
  for (auto& b : m) std::fill(b.begin(), b.end(), 0.0);
  for (auto& b : v) std::fill(b.begin(), b.end(), 0.0);
  t = 0;
}

void OptState::reset() {
  if (store) store->reset();
}

OptState make_opt(OptKind kind, OptHyper hyper, MomentConvention conv) {
  hyper.validate();
  OptState s;
  s.kind = kind;
  s.hyper = hyper;
  s.convention = conv;
  if (kind == OptKind::adamw) s.store = std::make_shared<MomentStore>();
  return s;
}

std::pair<OptState, OptState> make_shared_pair(OptKind inner_kind, OptHyper inner_hyper,
                                               OptKind outer_kind, OptHyper outer_hyper,
                                               Sharing sharing, MomentConvention conv) {
  if (sharing != Sharing::none && (inner_kind != OptKind::adamw || outer_kind != OptKind::adamw))
    throw std::invalid_argument(std::string("make_shared_pair: sharing '") +
                                sharing_name(sharing) + "' needs adaptive optimizers, got " +
                                kind_name(inner_kind) + "+" + kind_name(outer_kind));
  OptState inner = make_opt(inner_kind, inner_hyper, conv);
  OptState outer = make_opt(outer_kind, outer_hyper, conv);
  if (sharing == Sharing::shared) outer.store = inner.store;
  return {std::move(inner), std::move(outer)};
}

void copy_state(const OptState& src, OptState& dst) {
  if (!src.store || !dst.store)
    throw std::invalid_argument("copy_state: both optimizers must be adaptive");
  *dst.store = *src.store;
}

namespace {

void check_step_inputs(const std::vector<Tensor>& params, std::span<const Tensor> grads,
                       const char* op) {
  if (params.size() != grads.size())
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(params.size()) +
                                " params vs " + std::to_string(grads.size()) + " grads");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape != grads[i].shape)
      throw std::invalid_argument(std::string(op) + ": shape mismatch at tensor " +
                                  std::to_string(i) + ": " + shape_str(params[i].shape) + " vs " +
                                  shape_str(grads[i].shape));
    if (!kn::all_finite(grads[i].data(), grads[i].values->size()))
      throw std::domain_error(std::string(op) + ": non-finite gradient, step rejected");
  }
}

// Global-norm clip factor; 1.0 when off or under the cap. The factor is a
// plain constant in both the raw and the tracked step.
double clip_factor(double cap, std::span<const Tensor> grads) {
  if (cap <= 0.0) return 1.0;
  double sq = 0.0;
  for (const Tensor& g : grads) sq += kn::dot(g.data(), g.data(), g.values->size());
  const double norm = std::sqrt(sq);
  return norm > cap ? cap / norm : 1.0;
}

struct BiasCorrection {
  double c1, c2;
};

BiasCorrection bias_correction(const OptHyper& h, std::int64_t t) {
  return {1.0 / (1.0 - std::pow(h.beta1, static_cast<double>(t))),
          1.0 / (1.0 - std::pow(h.beta2, static_cast<double>(t)))};
}

}  // namespace

void sgd_step(OptState& state, std::vector<Tensor>& params, std::span<const Tensor> grads) {
  check_step_inputs(params, grads, "sgd_step");
  const double lr = state.hyper.lr;
  const double wd = state.hyper.weight_decay;
  const double cf = clip_factor(state.hyper.grad_clip, grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].values->size();
    // same sequence as the tracked step: p = (p + (-lr)*(cf*g)) + (-(lr*wd))*p_old
    std::vector<double> g(n);
    kn::scale(g.data(), grads[i].data(), cf, n);
    std::vector<double> t1(n);
    kn::scale(t1.data(), g.data(), -lr, n);
    std::vector<double> p(n);
    kn::add(p.data(), params[i].data(), t1.data(), n);
    std::vector<double> t2(n);
    kn::scale(t2.data(), params[i].data(), -(lr * wd), n);
    kn::add(p.data(), p.data(), t2.data(), n);
    params[i] = make_tensor(params[i].shape, std::move(p));
  }
}

void adamw_step(OptState& state, std::vector<Tensor>& params, std::span<const Tensor> grads) {
  if (!state.store) throw std::invalid_argument("adamw_step: state has no moment store");
  check_step_inputs(params, grads, "adamw_step");
  MomentStore& store = *state.store;
  store.ensure_shapes(params);
  const double cf = clip_factor(state.hyper.grad_clip, grads);
  const std::int64_t t_new = store.t + 1;
  const auto [c1, c2] = bias_correction(state.hyper, t_new);
  const bool stored = state.convention == MomentConvention::stored_corrected;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].values->size();
    std::vector<double> p(*params[i].values);
    const double* g = grads[i].data();
    std::vector<double> gc;
    if (cf != 1.0) {
      gc.resize(n);
      kn::scale(gc.data(), g, cf, n);
      g = gc.data();
    }
    kn::adamw_update(p.data(), store.m[i].data(), store.v[i].data(), g, n, state.hyper.lr,
                     state.hyper.beta1, state.hyper.beta2, state.hyper.eps,
                     state.hyper.weight_decay, c1, c2, stored);
    params[i] = make_tensor(params[i].shape, std::move(p));
  }
  store.t = t_new;
}

void apply_step(OptState& state, std::vector<Tensor>& params, std::span<const Tensor> grads) {
  if (state.kind == OptKind::sgd) {
    sgd_step(state, params, grads);
  } else {
    adamw_step(state, params, grads);
  }
}

void apply_step(OptState& state, Params& params, const Gradients& grads) {
  std::vector<Tensor> ts = params.tensor_list();
  apply_step(state, ts, grads.tensors);
  params.replace_tensors(std::move(ts));
}

std::vector<Tensor> step_differentiable(OptState& state, const std::vector<Tensor>& params,
                                        const std::vector<Tensor>& grads) {
  check_step_inputs(params, grads, "step_differentiable");
  const double lr = state.hyper.lr;
  const double wd = state.hyper.weight_decay;
  const double cf = clip_factor(state.hyper.grad_clip, grads);
  std::vector<Tensor> out;
  out.reserve(params.size());

  if (state.kind == OptKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor g = cf != 1.0 ? ops::scale(grads[i], cf) : grads[i];
      Tensor p = ops::add(params[i], ops::scale(g, -lr));
      out.push_back(ops::add(p, ops::scale(params[i], -(lr * wd))));
    }
    return out;
  }

  if (!state.store) throw std::invalid_argument("step_differentiable: no moment store");
  MomentStore& store = *state.store;
  store.ensure_shapes(params);
  const std::int64_t t_new = store.t + 1;
  const auto [c1, c2] = bias_correction(state.hyper, t_new);
  const bool stored = state.convention == MomentConvention::stored_corrected;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor g = cf != 1.0 ? ops::scale(grads[i], cf) : grads[i];
    const Tensor m_prev = make_tensor(params[i].shape, std::vector<double>(store.m[i]));
    const Tensor v_prev = make_tensor(params[i].shape, std::vector<double>(store.v[i]));
    Tensor m_new = ops::add(ops::scale(m_prev, state.hyper.beta1),
                            ops::scale(g, 1.0 - state.hyper.beta1));
    Tensor v_new = ops::add(ops::scale(v_prev, state.hyper.beta2),
                            ops::scale(ops::mul(g, g), 1.0 - state.hyper.beta2));
    Tensor mh = ops::scale(m_new, c1);
    Tensor vh = ops::scale(v_new, c2);
    store.m[i] = *(stored ? mh : m_new).values;
    store.v[i] = *(stored ? vh : v_new).values;
    Tensor den = ops::add_scalar(ops::sqrt(vh), state.hyper.eps);
    Tensor upd = ops::div(mh, den);
    Tensor p = ops::add(params[i], ops::scale(upd, -lr));
    out.push_back(ops::add(p, ops::scale(params[i], -(lr * wd))));
  }
  store.t = t_new;
  return out;
}

void save_opt_state(const std::string& path, const OptState& state) {
  Container c;
  c.kind = "opt_state";
  c.extra = {
      {"opt", kind_name(state.kind)},
      {"convention", convention_name(state.convention)},
      {"t", state.store ? state.store->t : 0},
      {"hyper",
       {{"lr", state.hyper.lr},
        {"beta1", state.hyper.beta1},
        {"beta2", state.hyper.beta2},
        {"eps", state.hyper.eps},
        {"weight_decay", state.hyper.weight_decay},
        {"grad_clip", state.hyper.grad_clip}}},
  };
  if (state.store) {
    const MomentStore& s = *state.store;
    for (std::size_t i = 0; i < s.shapes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "m.%04zu", i);
      c.tensors.emplace_back(name, make_tensor(s.shapes[i], std::vector<double>(s.m[i])));
    }
    for (std::size_t i = 0; i < s.shapes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "v.%04zu", i);
      c.tensors.emplace_back(name, make_tensor(s.shapes[i], std::vector<double>(s.v[i])));
    }
  }
  save_container(path, c);
}

OptState load_opt_state(const std::string& path) {
  const Container c = load_container(path);
  if (c.kind != "opt_state")
    throw std::runtime_error("load_opt_state: " + path + " holds '" + c.kind + "'");
  OptState s;
  const std::string opt = c.extra.at("opt").get<std::string>();
  s.kind = opt == "sgd" ? OptKind::sgd : OptKind::adamw;
  const std::string conv = c.extra.at("convention").get<std::string>();
  s.convention =
      conv == "stored_corrected" ? MomentConvention::stored_corrected : MomentConvention::read_time;
  const auto& jh = c.extra.at("hyper");
  s.hyper.lr = jh.at("lr").get<double>();
  s.hyper.beta1 = jh.at("beta1").get<double>();
  s.hyper.beta2 = jh.at("beta2").get<double>();
  s.hyper.eps = jh.at("eps").get<double>();
  s.hyper.weight_decay = jh.at("weight_decay").get<double>();
  s.hyper.grad_clip = jh.at("grad_clip").get<double>();
  if (s.kind == OptKind::adamw) {
    s.store = std::make_shared<MomentStore>();
    s.store->t = c.extra.at("t").get<std::int64_t>();
    const std::size_t half = c.tensors.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
      s.store->shapes.push_back(c.tensors[i].second.shape);
      s.store->m.push_back(*c.tensors[i].second.values);
      s.store->v.push_back(*c.tensors[half + i].second.values);
    }
  }
  return s;
}

}  // namespace metalm::optim
