#pragma once

#include <cstddef>
#include <string>

#include "scratchlab/errors.hpp"
#include "scratchlab/kv.hpp"

namespace scratchlab::model {

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_model = 128;
  std::size_t d_ff = 0;  // 0 means 4 * d_model
  std::size_t vocab_size = 0;
  std::size_t max_context = 256;
  double dropout = 0.0;
  bool tie_output_head = false;

  std::size_t ff() const { return d_ff ? d_ff : 4 * d_model; }

  void validate() const {
    if (n_layers == 0) throw ConfigError("n_layers must be positive");
    if (n_heads == 0 || d_model == 0) throw ConfigError("n_heads and d_model must be positive");
    if (d_model % n_heads != 0) {
      throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                        std::to_string(n_heads));
    }
    if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
    if (max_context == 0) throw ConfigError("max_context must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  }

  /// Closed-form parameter count.
  std::size_t parameter_count() const {
    const std::size_t d = d_model, f = ff(), V = vocab_size;
    const std::size_t per_layer = 4 * d * d + 4 * d + 2 * d * f + f + d + 4 * d;
    return V * d + max_context * d + n_layers * per_layer + 2 * d + (tie_output_head ? 0 : d * V);
  }

  /// Parameters inside the transformer blocks only.
  std::size_t block_parameter_count() const {
    const std::size_t d = d_model, f = ff();
    return n_layers * (4 * d * d + 4 * d + 2 * d * f + f + d + 4 * d);
  }

  static ModelConfig paper_default(std::size_t vocab) {
    ModelConfig c;
    c.n_layers = 6;
    c.n_heads = 6;
    c.d_model = 384;
    c.vocab_size = vocab;
    return c;
  }

  static ModelConfig desk_default(std::size_t vocab) {
    ModelConfig c;
    c.vocab_size = vocab;
    return c;
  }

  /// Reads "model.*" keys (or bare keys when prefix is empty).
  void apply(const KeyValues& kv, const std::string& prefix = "model.") {
    get_kv(kv, prefix + "n_layers", n_layers);
    get_kv(kv, prefix + "n_heads", n_heads);
    get_kv(kv, prefix + "d_model", d_model);
    get_kv(kv, prefix + "d_ff", d_ff);
    get_kv(kv, prefix + "vocab_size", vocab_size);
    get_kv(kv, prefix + "max_context", max_context);
    get_kv(kv, prefix + "dropout", dropout);
    get_kv(kv, prefix + "tie_output_head", tie_output_head);
  }

  void store(KeyValues& kv, const std::string& prefix = "model.") const {
    kv[prefix + "n_layers"] = std::to_string(n_layers);
    kv[prefix + "n_heads"] = std::to_string(n_heads);
    kv[prefix + "d_model"] = std::to_string(d_model);
    kv[prefix + "d_ff"] = std::to_string(d_ff);
    kv[prefix + "vocab_size"] = std::to_string(vocab_size);
    kv[prefix + "max_context"] = std::to_string(max_context);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", dropout);
    kv[prefix + "dropout"] = buf;
    kv[prefix + "tie_output_head"] = tie_output_head ? "1" : "0";
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace scratchlab::model
