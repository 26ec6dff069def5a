#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/model/config.hpp"
#include "scratchlab/numerics/tape.hpp"
#include "scratchlab/numerics/tensor.hpp"

namespace scratchlab::model {

using numerics::Shape;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

/// Named parameter tensors in a fixed insertion order.
template <class T>
class ParameterStore {
 public:
  void add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    index_.emplace(name, tensors_.size());
    names_.push_back(name);
    tensors_.push_back(std::move(value));
  }

  std::size_t size() const noexcept { return tensors_.size(); }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return it->second;
  }

  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  Tensor<T>& operator[](std::size_t i) { return tensors_.at(i); }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_.at(i); }
  Tensor<T>& get(const std::string& name) { return tensors_[index(name)]; }
  const Tensor<T>& get(const std::string& name) const { return tensors_[index(name)]; }

  std::vector<Tensor<T>>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const noexcept { return tensors_; }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
  }

  template <class U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

  /// FNV-1a over names, shapes and raw bytes; used to detect mutation.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ull;
    };
    for (std::size_t i = 0; i < size(); ++i) {
      mix(names_[i].data(), names_[i].size());
      for (auto d : tensors_[i].shape()) mix(&d, sizeof d);
      mix(tensors_[i].ptr(), tensors_[i].numel() * sizeof(T));
    }
    return h;
  }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters bound as leaves of one tape, looked up by store index.
template <class T>
struct BoundParams {
  const ParameterStore<T>* store = nullptr;
  std::vector<Var<T>> vars;

  Var<T> operator()(const std::string& name) const { return vars[store->index(name)]; }
};

template <class T>
BoundParams<T> bind(Tape<T>& tape, const ParameterStore<T>& store, bool requires_grad) {
  BoundParams<T> b{&store, {}};
  b.vars.reserve(store.size());
  for (const auto& t : store.tensors()) b.vars.push_back(tape.leaf(t, requires_grad));
  return b;
}

inline std::string layer_name(std::size_t l, const char* suffix) {
  return "h" + std::to_string(l) + "." + suffix;
}

/// Deterministic in (config, seed): weights N(0, 0.02), biases 0, layernorm
/// gains 1. Parameters are created in a fixed order.
template <class T>
ParameterStore<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t d = cfg.d_model, f = cfg.ff(), V = cfg.vocab_size, C = cfg.max_context;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto gaussian = [&](Shape s) {
    Tensor<T> t(std::move(s));
    for (auto& v : t.data()) v = static_cast<T>(normal(rng));
    return t;
  };
  ParameterStore<T> ps;
  ps.add("wte", gaussian({V, d}));
  ps.add("wpe", gaussian({C, d}));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    ps.add(layer_name(l, "ln_1.weight"), Tensor<T>::ones({d}));
    ps.add(layer_name(l, "ln_1.bias"), Tensor<T>::zeros({d}));
    for (const char* p : {"attn.q", "attn.k", "attn.v", "attn.proj"}) {
      ps.add(layer_name(l, p) + ".weight", gaussian({d, d}));
      ps.add(layer_name(l, p) + ".bias", Tensor<T>::zeros({d}));
    }
    ps.add(layer_name(l, "ln_2.weight"), Tensor<T>::ones({d}));
    ps.add(layer_name(l, "ln_2.bias"), Tensor<T>::zeros({d}));
    ps.add(layer_name(l, "mlp.fc.weight"), gaussian({d, f}));
    ps.add(layer_name(l, "mlp.fc.bias"), Tensor<T>::zeros({f}));
    ps.add(layer_name(l, "mlp.proj.weight"), gaussian({f, d}));
    ps.add(layer_name(l, "mlp.proj.bias"), Tensor<T>::zeros({d}));
  }
  ps.add("ln_f.weight", Tensor<T>::ones({d}));
  ps.add("ln_f.bias", Tensor<T>::zeros({d}));
  if (!cfg.tie_output_head) ps.add("lm_head.weight", gaussian({d, V}));
  return ps;
}

/// Throws unless `ps` has exactly the names and shapes `init_model(cfg)` makes.
template <class T>
void check_store_matches(const ParameterStore<T>& ps, const ModelConfig& cfg) {
  ModelConfig shape_cfg = cfg;
  const ParameterStore<T> ref = init_model<T>(shape_cfg, 0);
  if (ref.names() != ps.names()) throw FormatError("parameter names do not match the model config");
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].shape() != ps[i].shape()) {
      throw FormatError("parameter " + ref.name(i) + " has shape " + numerics::shape_str(ps[i].shape()) +
                        ", expected " + numerics::shape_str(ref[i].shape()));
    }
  }
}

}  // namespace scratchlab::model
