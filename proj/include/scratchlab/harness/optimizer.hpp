#pragma once

// AdamW with global-norm clipping, linear warmup and decoupled weight decay.

#include <cmath>
#include <cstdint>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/kv.hpp"
#include "scratchlab/model/parameters.hpp"

namespace scratchlab::harness {

using model::ParameterStore;
using numerics::Tensor;

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
  std::size_t warmup_steps = 100;
  double clip_norm = 1.0;  // <= 0 disables clipping

  /// Learning rate of the (1-based) update `t`: linear warmup, then constant.
  double lr_at(std::uint64_t t) const {
    if (warmup_steps == 0 || t >= warmup_steps) return lr;
    return lr * static_cast<double>(t) / static_cast<double>(warmup_steps);
  }

  void apply(const KeyValues& kv, const std::string& prefix = "optim.") {
    get_kv(kv, prefix + "lr", lr);
    get_kv(kv, prefix + "beta1", beta1);
    get_kv(kv, prefix + "beta2", beta2);
    get_kv(kv, prefix + "eps", eps);
    get_kv(kv, prefix + "weight_decay", weight_decay);
    get_kv(kv, prefix + "warmup_steps", warmup_steps);
    get_kv(kv, prefix + "clip_norm", clip_norm);
  }
};

struct AdamWState {
  std::vector<Tensor<float>> m, v;
  std::uint64_t step = 0;     // successful updates
  std::uint64_t skipped = 0;  // updates dropped for non-finite gradients
};

/// Global L2 norm of a gradient list, accumulated in double.
inline double global_norm(const std::vector<Tensor<float>>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (float x : g.data()) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

/// One AdamW update. Returns false (and leaves params and moments
/// untouched) when a gradient is not finite. Weight decay applies to
/// tensors of rank >= 2 only, i.e. not to biases and layernorm gains.
inline bool optimizer_step(ParameterStore<float>& params, std::vector<Tensor<float>> grads, AdamWState& st,
                           const AdamWConfig& cfg) {
  if (grads.size() != params.size()) throw ShapeError("optimizer: gradient count differs from parameter count");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params[i].shape()) throw ShapeError("optimizer: gradient shape mismatch for " + params.name(i));
  }
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) {
    ++st.skipped;
    return false;
  }
  if (st.m.empty()) {
    for (const auto& p : params.tensors()) {
      st.m.push_back(Tensor<float>::zeros(p.shape()));
      st.v.push_back(Tensor<float>::zeros(p.shape()));
    }
  }
  const double scale = cfg.clip_norm > 0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
  const std::uint64_t t = ++st.step;
  const double lr = cfg.lr_at(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto m = st.m[i].data();
    auto v = st.v[i].data();
    const auto& g = grads[i].data();
    const double decay = params[i].rank() >= 2 ? lr * cfg.weight_decay : 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j] * scale;
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      double pj = p[j];
      pj -= decay * pj;
      pj -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
      p[j] = static_cast<float>(pj);
    }
  }
  return true;
}

}  // namespace scratchlab::harness
