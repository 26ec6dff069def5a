#pragma once

// Dense kernels shared by the autodiff ops.
//
// Every output element of the matrix products is accumulated from zero in
// ascending inner-index order with separate multiply and add roundings, so
// its value does not depend on how many rows or columns the call covers.
// Build with -ffp-contract=off to keep that guarantee (the CMake target does).

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "scratchlab/errors.hpp"

namespace scratchlab::numerics::kernels {

/// Additive attention-mask value for hidden entries.
template <class T>
constexpr T hidden_sentinel() {
  return static_cast<T>(-1e9);
}

/// Mask entries at or below this value count as hidden.
template <class T>
constexpr bool is_hidden(T mask_value) {
  return mask_value <= static_cast<T>(-1e8);
}

namespace detail {

template <class T>
struct Lanes {
  static constexpr std::size_t width = 64 / sizeof(T);
  typedef T vec __attribute__((vector_size(64)));
};

template <class T>
inline typename Lanes<T>::vec load(const T* p) {
  typename Lanes<T>::vec v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <class T>
inline void store(T* p, typename Lanes<T>::vec v) {
  std::memcpy(p, &v, sizeof(v));
}

// C[M x N] += A[M x K] * B[K x N] with leading dimensions lda, ldb, ldc.
// With TransA, A is stored [K x M] and read in place. Every accumulator
// starts from the current C value, so running this over consecutive K
// ranges reproduces the single-pass summation order.
template <bool TransA, class T>
void gemm_panel(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
                std::size_t ldb, T* C, std::size_t ldc) {
  using V = typename Lanes<T>::vec;
  constexpr std::size_t L = Lanes<T>::width;
  constexpr std::size_t CB = 2 * L;

  // a(i, k) = a_i[k * sa]
  const std::size_t sa = TransA ? lda : 1;
  auto row_of = [&](std::size_t i) { return TransA ? A + i : A + i * lda; };

  auto scalar_cell = [&](std::size_t i, std::size_t j) {
    T acc = C[i * ldc + j];
    const T* ai = row_of(i);
    for (std::size_t k = 0; k < K; ++k) acc = acc + ai[k * sa] * B[k * ldb + j];
    C[i * ldc + j] = acc;
  };

  std::size_t i = 0;
  for (; i + 4 <= M; i += 4) {
    const T* a0 = row_of(i + 0);
    const T* a1 = row_of(i + 1);
    const T* a2 = row_of(i + 2);
    const T* a3 = row_of(i + 3);
    T* r0 = C + (i + 0) * ldc;
    T* r1 = C + (i + 1) * ldc;
    T* r2 = C + (i + 2) * ldc;
    T* r3 = C + (i + 3) * ldc;
    std::size_t j = 0;
    for (; j + CB <= N; j += CB) {
      V c00 = load(r0 + j), c01 = load(r0 + j + L), c10 = load(r1 + j), c11 = load(r1 + j + L);
      V c20 = load(r2 + j), c21 = load(r2 + j + L), c30 = load(r3 + j), c31 = load(r3 + j + L);
      for (std::size_t k = 0; k < K; ++k) {
        const T* brow = B + k * ldb + j;
        const V b0 = load(brow);
        const V b1 = load(brow + L);
        const V x0 = V{} + a0[k * sa];
        const V x1 = V{} + a1[k * sa];
        const V x2 = V{} + a2[k * sa];
        const V x3 = V{} + a3[k * sa];
        c00 = c00 + x0 * b0;
        c01 = c01 + x0 * b1;
        c10 = c10 + x1 * b0;
        c11 = c11 + x1 * b1;
        c20 = c20 + x2 * b0;
        c21 = c21 + x2 * b1;
        c30 = c30 + x3 * b0;
        c31 = c31 + x3 * b1;
      }
      store(r0 + j, c00);
      store(r0 + j + L, c01);
      store(r1 + j, c10);
      store(r1 + j + L, c11);
      store(r2 + j, c20);
      store(r2 + j + L, c21);
      store(r3 + j, c30);
      store(r3 + j + L, c31);
    }
    for (; j + L <= N; j += L) {
      V c0 = load(r0 + j), c1 = load(r1 + j), c2 = load(r2 + j), c3 = load(r3 + j);
      for (std::size_t k = 0; k < K; ++k) {
        const V b0 = load(B + k * ldb + j);
        c0 = c0 + (V{} + a0[k * sa]) * b0;
        c1 = c1 + (V{} + a1[k * sa]) * b0;
        c2 = c2 + (V{} + a2[k * sa]) * b0;
        c3 = c3 + (V{} + a3[k * sa]) * b0;
      }
      store(r0 + j, c0);
      store(r1 + j, c1);
      store(r2 + j, c2);
      store(r3 + j, c3);
    }
    for (; j < N; ++j) {
      for (std::size_t r = 0; r < 4; ++r) scalar_cell(i + r, j);
    }
  }
  for (; i < M; ++i) {
    const T* a0 = row_of(i);
    T* r0 = C + i * ldc;
    std::size_t j = 0;
    for (; j + CB <= N; j += CB) {
      V c0 = load(r0 + j), c1 = load(r0 + j + L);
      for (std::size_t k = 0; k < K; ++k) {
        const T* brow = B + k * ldb + j;
        const V x0 = V{} + a0[k * sa];
        c0 = c0 + x0 * load(brow);
        c1 = c1 + x0 * load(brow + L);
      }
      store(r0 + j, c0);
      store(r0 + j + L, c1);
    }
    for (; j + L <= N; j += L) {
      V c0 = load(r0 + j);
      for (std::size_t k = 0; k < K; ++k) c0 = c0 + (V{} + a0[k * sa]) * load(B + k * ldb + j);
      store(r0 + j, c0);
    }
    for (; j < N; ++j) scalar_cell(i, j);
  }
}

// Blocked over K and N so the B block stays in cache.
template <bool TransA, class T>
void gemm_blocked(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  constexpr std::size_t KB = 256, NB = 256;
  std::vector<T> tmp;
  T* out = C;
  if (accumulate) {
    tmp.assign(M * N, T{0});
    out = tmp.data();
  } else {
    std::fill(C, C + M * N, T{0});
  }
  for (std::size_t j0 = 0; j0 < N; j0 += NB) {
    const std::size_t nb = std::min(NB, N - j0);
    for (std::size_t k0 = 0; k0 < K; k0 += KB) {
      const std::size_t kb = std::min(KB, K - k0);
      const T* a = TransA ? A + k0 * M : A + k0;
      gemm_panel<TransA>(M, nb, kb, a, TransA ? M : K, B + k0 * N + j0, N, out + j0, N);
    }
  }
  if (accumulate)
    for (std::size_t i = 0; i < M * N; ++i) C[i] = C[i] + tmp[i];
}

}  // namespace detail

/// C[M x N] (+)= A[M x K] * B[K x N], all row-major and densely packed.
template <class T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  detail::gemm_blocked<false>(M, N, K, A, B, C, accumulate);
}

/// out[cols x rows] = in[rows x cols]^T
template <class T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out) {
  constexpr std::size_t B = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += B) {
    for (std::size_t c0 = 0; c0 < cols; c0 += B) {
      const std::size_t r1 = std::min(rows, r0 + B);
      const std::size_t c1 = std::min(cols, c0 + B);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
    }
  }
}

/// C[M x N] (+)= A[M x K] * B^T where B is [N x K].
template <class T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  std::vector<T> bt(N * K);
  transpose(N, K, B, bt.data());
  gemm_nn(M, N, K, A, bt.data(), C, accumulate);
}

/// C[M x N] (+)= A^T * B where A is [K x M] and B is [K x N], read in place.
template <class T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  detail::gemm_blocked<true>(M, N, K, A, B, C, accumulate);
}

/// tanh for float without a libm call, so loops over it vectorize. Absolute
/// error below 3e-7. Evaluates e = 2^(2u log2 e) by a split into integer
/// and fractional exponent and returns (e - 1) / (e + 1).
inline float tanh_fast(float u) {
  const float x = std::clamp(u, -9.0f, 9.0f) * 2.8853900817779268f;  // 2u * log2(e)
  const float n = std::nearbyint(x);
  const float f = x - n;  // [-0.5, 0.5]
  // 2^f, minimax-style Taylor of degree 6 in f * ln 2
  const float t = f * 0.69314718055994531f;
  float p = 1.0f / 720.0f;
  p = p * t + 1.0f / 120.0f;
  p = p * t + 1.0f / 24.0f;
  p = p * t + 1.0f / 6.0f;
  p = p * t + 0.5f;
  p = p * t + 1.0f;
  p = p * t + 1.0f;
  const float e = std::bit_cast<float>(std::bit_cast<std::int32_t>(p) + (static_cast<std::int32_t>(n) << 23));
  return (e - 1.0f) / (e + 1.0f);
}

template <class T>
inline T tanh_k(T u) {
  if constexpr (std::is_same_v<T, float>) {
    return tanh_fast(u);
  } else {
    return std::tanh(u);
  }
}

/// Row softmax over visible entries. `visible[j]` false entries output
/// exactly zero. Throws if no entry is visible.
template <class T, class VisibleFn>
void softmax_row(std::span<const T> logits, VisibleFn visible, std::span<T> out) {
  T mx = -std::numeric_limits<T>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (visible(j)) {
      any = true;
      if (logits[j] > mx) mx = logits[j];
    }
  }
  if (!any) throw ShapeError("softmax row has no visible entry");
  T sum{0};
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (visible(j)) {
      out[j] = std::exp(logits[j] - mx);
      sum = sum + out[j];
    } else {
      out[j] = T{0};
    }
  }
  const T inv = T{1} / sum;
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = out[j] * inv;
}

}  // namespace scratchlab::numerics::kernels
