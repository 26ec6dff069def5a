#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scratchlab/errors.hpp"

namespace scratchlab::numerics {

/// Square query-by-key visibility relation for one sequence. Materialized
/// once per sequence and shared by every layer and head.
class Visibility {
 public:
  Visibility() = default;

  explicit Visibility(std::size_t n, bool value = false)
      : n_(n), bits_(n * n, value ? 1 : 0) {}

  static Visibility causal(std::size_t n) {
    Visibility v(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) v.set(i, j, true);
    return v;
  }

  /// Token i sees token j iff j <= i and group(j) is 0 or equals group(i).
  static Visibility from_groups(std::span<const int> groups) {
    Visibility v(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i)
      for (std::size_t j = 0; j <= i; ++j)
        v.set(i, j, groups[j] == 0 || groups[j] == groups[i]);
    return v;
  }

  std::size_t size() const noexcept { return n_; }

  bool operator()(std::size_t i, std::size_t j) const noexcept { return bits_[i * n_ + j] != 0; }

  void set(std::size_t i, std::size_t j, bool visible) { bits_[i * n_ + j] = visible ? 1 : 0; }

  /// Throws unless every row sees at least one key and no row sees a later key.
  void validate_causal() const {
    for (std::size_t i = 0; i < n_; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < n_; ++j) {
        if (!(*this)(i, j)) continue;
        if (j > i) {
          throw ShapeError("attention mask violates causality at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
        }
        any = true;
      }
      if (!any) throw ShapeError("attention mask row " + std::to_string(i) + " is fully hidden");
    }
  }

  friend bool operator==(const Visibility&, const Visibility&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace scratchlab::numerics
