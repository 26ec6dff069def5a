#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scratchlab/numerics/tape.hpp"
#include "scratchlab/numerics/tensor.hpp"

namespace scratchlab::numerics {

struct GradCheckOptions {
  double h = 1e-5;
  /// Denominator floor for the relative error, so near-zero gradients are
  /// compared absolutely.
  double floor = 1e-6;
  /// Tensors with more entries than this are checked on a seeded sample of
  /// this many coordinates.
  std::size_t max_coords = 64;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

/// Builds a scalar loss on a fresh tape from leaves bound to `params`.
template <class T>
using LossBuilder = std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>;

/// Compares reverse-mode gradients of `build` against central differences
/// (f(p+h) - f(p-h)) / 2h. Parameters are perturbed in place and restored.
template <class T>
GradCheckResult finite_diff_check(const LossBuilder<T>& build, std::vector<Tensor<T>>& params,
                                  const GradCheckOptions& opt = {}) {
  if (!(opt.h > 0.0)) throw ShapeError("finite_diff_check: h must be positive");

  auto evaluate = [&](bool with_grad, std::vector<Tensor<T>>* grads) {
    Tape<T> tape;
    std::vector<Var<T>> leaves;
    leaves.reserve(params.size());
    for (auto& p : params) leaves.push_back(tape.leaf(p, with_grad));
    Var<T> loss = build(tape, leaves);
    const T v = loss.value().item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
    if (grads) {
      tape.backward(loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor<T>* g = tape.grad(leaves[i].id);
        grads->push_back(g ? *g : Tensor<T>::zeros(params[i].shape()));
      }
    }
    return static_cast<double>(v);
  };

  std::vector<Tensor<T>> analytic;
  evaluate(true, &analytic);

  GradCheckResult res;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = params[pi];
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opt.max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      const T orig = p[c];
      p[c] = orig + static_cast<T>(opt.h);
      const double fp = evaluate(false, nullptr);
      p[c] = orig - static_cast<T>(opt.h);
      const double fm = evaluate(false, nullptr);
      p[c] = orig;
      const double numeric = (fp - fm) / (2.0 * opt.h);
      const double a = static_cast<double>(analytic[pi][c]);
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++res.coords_checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = pi;
        res.worst_index = c;
      }
    }
  }
  return res;
}

}  // namespace scratchlab::numerics
