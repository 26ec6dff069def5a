#pragma once

// Differentiable primitives over Tape<T>. Every op validates shapes, checks
// its output for non-finite values, and records a backward closure only when
// at least one input needs a gradient.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scratchlab/numerics/kernels.hpp"
#include "scratchlab/numerics/tape.hpp"
#include "scratchlab/numerics/tensor.hpp"
#include "scratchlab/numerics/visibility.hpp"

namespace scratchlab::numerics {

namespace detail {

template <class T>
void same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.tape != b.tape) throw ShapeError(std::string(op) + ": operands live on different tapes");
}

template <class T>
void require_rank2(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

}  // namespace detail

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "matmul");
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  detail::require_rank2(A, "matmul");
  detail::require_rank2(B, "matmul");
  const std::size_t M = A.dim(0), K = A.dim(1), N = B.dim(1);
  if (B.dim(0) != K) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(A.shape()) + " x " +
                     shape_str(B.shape()));
  }
  Tensor<T> C({M, N});
  kernels::gemm_nn(M, N, K, A.ptr(), B.ptr(), C.ptr(), false);
  require_finite(C, "matmul");
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape->record(std::move(C), rg, [ia = a.id, ib = b.id, M, N, K](Tape<T>& t, const Tensor<T>& g) {
    if (t.requires_grad(ia)) {
      Tensor<T> ga({M, K});
      kernels::gemm_nt(M, K, N, g.ptr(), t.value(ib).ptr(), ga.ptr(), false);
      t.accumulate_grad(ia, std::move(ga));
    }
    if (t.requires_grad(ib)) {
      Tensor<T> gb({K, N});
      kernels::gemm_tn(K, N, M, t.value(ia).ptr(), g.ptr(), gb.ptr(), false);
      t.accumulate_grad(ib, std::move(gb));
    }
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "add");
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a.value();
  const T* pb = b.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] + pb[i];
  require_finite(out, "add");
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape->record(std::move(out), rg, [ia = a.id, ib = b.id](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate_grad(ia, g);
    t.accumulate_grad(ib, g);
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "mul");
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a.value();
  const T* pb = b.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] * pb[i];
  require_finite(out, "mul");
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape->record(std::move(out), rg, [ia = a.id, ib = b.id](Tape<T>& t, const Tensor<T>& g) {
    if (t.requires_grad(ia)) {
      Tensor<T> ga = g;
      const T* pb = t.value(ib).ptr();
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] = ga[i] * pb[i];
      t.accumulate_grad(ia, std::move(ga));
    }
    if (t.requires_grad(ib)) {
      Tensor<T> gb = g;
      const T* pa = t.value(ia).ptr();
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] = gb[i] * pa[i];
      t.accumulate_grad(ib, std::move(gb));
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = v * s;
  require_finite(out, "scale");
  return a.tape->record(std::move(out), a.requires_grad(), [ia = a.id, s](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga = g;
    for (auto& v : ga.data()) v = v * s;
    t.accumulate_grad(ia, std::move(ga));
  });
}

/// out[r, c] = a[r, c] + bias[c]
template <class T>
Var<T> add_bias(Var<T> a, Var<T> bias) {
  detail::same_tape(a, bias, "add_bias");
  const Tensor<T>& A = a.value();
  const Tensor<T>& b = bias.value();
  if (b.numel() != A.cols()) {
    throw ShapeError("add_bias: bias " + shape_str(b.shape()) + " does not match columns of " +
                     shape_str(A.shape()));
  }
  Tensor<T> out = A;
  const std::size_t R = A.rows(), C = A.cols();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = out[r * C + c] + b[c];
  require_finite(out, "add_bias");
  const bool rg = a.requires_grad() || bias.requires_grad();
  return a.tape->record(std::move(out), rg, [ia = a.id, ib = bias.id, R, C](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate_grad(ia, g);
    if (t.requires_grad(ib)) {
      Tensor<T> gb = Tensor<T>::zeros(t.value(ib).shape());
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) gb[c] = gb[c] + g[r * C + c];
      t.accumulate_grad(ib, std::move(gb));
    }
  });
}

template <class T>
Var<T> transpose(Var<T> a) {
  const Tensor<T>& A = a.value();
  detail::require_rank2(A, "transpose");
  const std::size_t R = A.dim(0), C = A.dim(1);
  Tensor<T> out({C, R});
  kernels::transpose(R, C, A.ptr(), out.ptr());
  return a.tape->record(std::move(out), a.requires_grad(), [ia = a.id, R, C](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga({R, C});
    kernels::transpose(C, R, g.ptr(), ga.ptr());
    t.accumulate_grad(ia, std::move(ga));
  });
}

/// GELU, tanh approximation. In float the tanh is kernels::tanh_fast.
template <class T>
Var<T> gelu(Var<T> a) {
  const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T c = static_cast<T>(0.044715);
  Tensor<T> out = a.value();
  // tanh(u) per element, reused by the backward pass
  auto th = std::make_shared<std::vector<T>>(out.numel());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const T x = out[i];
    const T u = k * (x + c * x * x * x);
    (*th)[i] = kernels::tanh_k(u);
    out[i] = T(0.5) * x * (T(1) + (*th)[i]);
  }
  require_finite(out, "gelu");
  if (!a.requires_grad()) th.reset();
  return a.tape->record(std::move(out), a.requires_grad(), [ia = a.id, k, c, th](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& X = t.value(ia);
    Tensor<T> ga = g;
    for (std::size_t i = 0; i < ga.numel(); ++i) {
      const T x = X[i];
      const T h = (*th)[i];
      const T du = k * (T(1) + T(3) * c * x * x);
      const T d = T(0.5) * (T(1) + h) + T(0.5) * x * (T(1) - h * h) * du;
      ga[i] = ga[i] * d;
    }
    t.accumulate_grad(ia, std::move(ga));
  });
}

/// Rows of `table` [V x d] selected by `ids`; output [ids.size() x d].
template <class T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  const Tensor<T>& W = table.value();
  detail::require_rank2(W, "embedding");
  if (ids.empty()) throw ShapeError("embedding: empty index list");
  const std::size_t V = W.dim(0), d = W.dim(1);
  Tensor<T> out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= V) {
      throw ShapeError("embedding: index " + std::to_string(ids[r]) + " out of range [0," +
                       std::to_string(V) + ")");
    }
    std::copy_n(W.ptr() + ids[r] * d, d, out.ptr() + r * d);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape->record(std::move(out), table.requires_grad(),
                            [it = table.id, idx = std::move(idx), d](Tape<T>& t, const Tensor<T>& g) {
                              Tensor<T>& gw = t.grad_buffer(it);
                              for (std::size_t r = 0; r < idx.size(); ++r) {
                                T* dst = gw.ptr() + idx[r] * d;
                                const T* src = g.ptr() + r * d;
                                for (std::size_t c = 0; c < d; ++c) dst[c] = dst[c] + src[c];
                              }
                            });
}

/// Selected rows of a matrix, in the given order.
template <class T>
Var<T> gather_rows(Var<T> a, std::span<const std::size_t> rows) {
  const Tensor<T>& A = a.value();
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const std::size_t C = A.cols();
  Tensor<T> out({rows.size(), C});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= A.rows()) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(A.ptr() + rows[r] * C, C, out.ptr() + r * C);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape->record(std::move(out), a.requires_grad(),
                        [ia = a.id, idx = std::move(idx), C](Tape<T>& t, const Tensor<T>& g) {
                          Tensor<T>& ga = t.grad_buffer(ia);
                          for (std::size_t r = 0; r < idx.size(); ++r) {
                            T* dst = ga.ptr() + idx[r] * C;
                            const T* src = g.ptr() + r * C;
                            for (std::size_t c = 0; c < C; ++c) dst[c] = dst[c] + src[c];
                          }
                        });
}

/// Row-wise layer normalization over the last dimension.
template <class T>
Var<T> layernorm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const Tensor<T>& X = x.value();
  const std::size_t R = X.rows(), d = X.cols();
  if (gain.value().numel() != d || bias.value().numel() != d) {
    throw ShapeError("layernorm: gain/bias must have " + std::to_string(d) + " entries");
  }
  if (!(eps > T{0})) throw ShapeError("layernorm: eps must be positive");
  Tensor<T> out(X.shape());
  auto xhat = std::make_shared<std::vector<T>>(X.numel());
  auto rstd = std::make_shared<std::vector<T>>(R);
  const T* g = gain.value().ptr();
  const T* b = bias.value().ptr();
  for (std::size_t r = 0; r < R; ++r) {
    const T* xr = X.ptr() + r * d;
    T mean{0};
    for (std::size_t c = 0; c < d; ++c) mean = mean + xr[c];
    mean = mean / static_cast<T>(d);
    T var{0};
    for (std::size_t c = 0; c < d; ++c) var = var + (xr[c] - mean) * (xr[c] - mean);
    var = var / static_cast<T>(d);
    const T rs = T{1} / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < d; ++c) {
      const T xh = (xr[c] - mean) * rs;
      (*xhat)[r * d + c] = xh;
      out[r * d + c] = xh * g[c] + b[c];
    }
  }
  require_finite(out, "layernorm");
  const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  return x.tape->record(
      std::move(out), rg,
      [ix = x.id, ig = gain.id, ib = bias.id, xhat, rstd, R, d](Tape<T>& t, const Tensor<T>& gy) {
        const T* g = t.value(ig).ptr();
        if (t.requires_grad(ig) || t.requires_grad(ib)) {
          Tensor<T> gg = Tensor<T>::zeros(t.value(ig).shape());
          Tensor<T> gb = Tensor<T>::zeros(t.value(ib).shape());
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < d; ++c) {
              gg[c] = gg[c] + gy[r * d + c] * (*xhat)[r * d + c];
              gb[c] = gb[c] + gy[r * d + c];
            }
          t.accumulate_grad(ig, std::move(gg));
          t.accumulate_grad(ib, std::move(gb));
        }
        if (t.requires_grad(ix)) {
          Tensor<T> gx(t.value(ix).shape());
          std::vector<T> dxh(d);
          for (std::size_t r = 0; r < R; ++r) {
            T s1{0}, s2{0};
            for (std::size_t c = 0; c < d; ++c) {
              dxh[c] = gy[r * d + c] * g[c];
              s1 = s1 + dxh[c];
              s2 = s2 + dxh[c] * (*xhat)[r * d + c];
            }
            const T inv_d = T{1} / static_cast<T>(d);
            for (std::size_t c = 0; c < d; ++c) {
              gx[r * d + c] = (*rstd)[r] * (dxh[c] - inv_d * s1 - (*xhat)[r * d + c] * inv_d * s2);
            }
          }
          t.accumulate_grad(ix, std::move(gx));
        }
      });
}

/// Row-wise softmax of `logits + additive_mask` restricted to visible entries.
/// Mask entries are 0 (visible) or the hidden sentinel / -inf; hidden entries
/// output exactly 0. The mask is treated as a constant.
template <class T>
Var<T> masked_softmax(Var<T> logits, const Tensor<T>& additive_mask) {
  const Tensor<T>& L = logits.value();
  if (L.shape() != additive_mask.shape()) {
    throw ShapeError("masked_softmax: mask shape " + shape_str(additive_mask.shape()) +
                     " does not match logits " + shape_str(L.shape()));
  }
  const std::size_t R = L.rows(), n = L.cols();
  Tensor<T> out(L.shape());
  std::vector<T> shifted(n);
  for (std::size_t r = 0; r < R; ++r) {
    const T* m = additive_mask.ptr() + r * n;
    const T* l = L.ptr() + r * n;
    for (std::size_t j = 0; j < n; ++j) shifted[j] = kernels::is_hidden(m[j]) ? T{0} : l[j] + m[j];
    kernels::softmax_row<T>(shifted, [m](std::size_t j) { return !kernels::is_hidden(m[j]); },
                            out.row(r));
  }
  require_finite(out, "masked_softmax");
  return logits.tape->record(out, logits.requires_grad(), [il = logits.id, p = out, R, n](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> gl(p.shape());
    for (std::size_t r = 0; r < R; ++r) {
      T dot{0};
      for (std::size_t j = 0; j < n; ++j) dot = dot + g[r * n + j] * p[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gl[r * n + j] = p[r * n + j] * (g[r * n + j] - dot);
    }
    t.accumulate_grad(il, std::move(gl));
  });
}

enum class Reduction { mean, sum };

/// Masked softmax cross-entropy. logits [R x V], one target and one mask
/// entry per row. Mean (or sum) over rows whose mask entry is nonzero.
template <class T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, std::span<const std::uint8_t> loss_mask,
                     Reduction reduction = Reduction::mean) {
  const Tensor<T>& L = logits.value();
  detail::require_rank2(L, "cross_entropy");
  const std::size_t R = L.dim(0), V = L.dim(1);
  if (targets.size() != R || loss_mask.size() != R) {
    throw ShapeError("cross_entropy: targets/mask length must equal the number of rows");
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < R; ++r) {
    if (!loss_mask[r]) continue;
    ++count;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= V) {
      throw ShapeError("cross_entropy: target " + std::to_string(targets[r]) + " out of range");
    }
  }
  if (count == 0) throw ShapeError("cross_entropy: loss mask selects no position");
  auto probs = std::make_shared<std::vector<T>>(R * V, T{0});
  T total{0};
  for (std::size_t r = 0; r < R; ++r) {
    if (!loss_mask[r]) continue;
    const T* l = L.ptr() + r * V;
    T mx = l[0];
    for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, l[v]);
    T z{0};
    for (std::size_t v = 0; v < V; ++v) z = z + std::exp(l[v] - mx);
    const T lse = mx + std::log(z);
    total = total + (lse - l[targets[r]]);
    for (std::size_t v = 0; v < V; ++v) (*probs)[r * V + v] = std::exp(l[v] - lse);
  }
  const T norm = reduction == Reduction::mean ? T{1} / static_cast<T>(count) : T{1};
  Tensor<T> out = Tensor<T>::scalar(total * norm);
  require_finite(out, "cross_entropy");
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<std::uint8_t> mk(loss_mask.begin(), loss_mask.end());
  return logits.tape->record(
      std::move(out), logits.requires_grad(),
      [il = logits.id, probs, tg = std::move(tg), mk = std::move(mk), norm, R, V](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T> gl = Tensor<T>::zeros({R, V});
        const T s = g[0] * norm;
        for (std::size_t r = 0; r < R; ++r) {
          if (!mk[r]) continue;
          for (std::size_t v = 0; v < V; ++v) gl[r * V + v] = (*probs)[r * V + v] * s;
          gl[r * V + tg[r]] = gl[r * V + tg[r]] - s;
        }
        t.accumulate_grad(il, std::move(gl));
      });
}

template <class T>
Var<T> sum(Var<T> a) {
  T s{0};
  for (T v : a.value().data()) s = s + v;
  Tensor<T> out = Tensor<T>::scalar(s);
  require_finite(out, "sum");
  return a.tape->record(std::move(out), a.requires_grad(), [ia = a.id](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga(t.value(ia).shape(), g[0]);
    t.accumulate_grad(ia, std::move(ga));
  });
}

/// Inverted dropout driven by an explicit per-call seed. p == 0 is identity.
template <class T>
Var<T> dropout(Var<T> a, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw ShapeError("dropout: probability must be in [0,1)");
  if (p == 0.0) return a;
  std::mt19937_64 rng(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(a.value().numel());
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    (*mask)[i] = u < p ? T{0} : keep_scale;
    out[i] = out[i] * (*mask)[i];
  }
  return a.tape->record(std::move(out), a.requires_grad(), [ia = a.id, mask](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> ga = g;
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] = ga[i] * (*mask)[i];
    t.accumulate_grad(ia, std::move(ga));
  });
}

/// One packed sequence inside a row-concatenated batch.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
  const Visibility* visible = nullptr;
};

/// Multi-head scaled dot-product attention over packed sequences.
/// q, k, v are [N x d]; each segment attends only within its own rows and
/// only where its visibility relation allows. Output [N x d].
template <class T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::span<const Segment> segments, std::size_t n_heads) {
  detail::same_tape(q, k, "attention");
  detail::same_tape(q, v, "attention");
  const Tensor<T>& Q = q.value();
  const Tensor<T>& K = k.value();
  const Tensor<T>& Vv = v.value();
  detail::require_rank2(Q, "attention");
  if (K.shape() != Q.shape() || Vv.shape() != Q.shape()) throw ShapeError("attention: q/k/v shapes differ");
  const std::size_t N = Q.dim(0), d = Q.dim(1);
  if (n_heads == 0 || d % n_heads != 0) throw ShapeError("attention: d not divisible by heads");
  const std::size_t dh = d / n_heads;
  const T scale_f = T{1} / std::sqrt(static_cast<T>(dh));

  std::size_t covered = 0;
  std::size_t cache_size = 0;
  for (const auto& s : segments) {
    if (!s.visible || s.visible->size() != s.length) throw ShapeError("attention: segment mask size mismatch");
    if (s.offset != covered) throw ShapeError("attention: segments must tile the rows in order");
    covered += s.length;
    cache_size += s.length * s.length * n_heads;
  }
  if (covered != N) throw ShapeError("attention: segments do not cover all rows");

  auto probs = std::make_shared<std::vector<T>>(cache_size, T{0});
  Tensor<T> out = Tensor<T>::zeros({N, d});
  std::vector<T> scores;
  std::size_t base = 0;
  for (const auto& s : segments) {
    const std::size_t L = s.length;
    scores.assign(L, T{0});
    for (std::size_t h = 0; h < n_heads; ++h) {
      T* P = probs->data() + base + h * L * L;
      for (std::size_t i = 0; i < L; ++i) {
        const T* qi = Q.ptr() + (s.offset + i) * d + h * dh;
        for (std::size_t j = 0; j < L; ++j) {
          if (!(*s.visible)(i, j)) {
            scores[j] = T{0};
            continue;
          }
          const T* kj = K.ptr() + (s.offset + j) * d + h * dh;
          T acc{0};
          for (std::size_t c = 0; c < dh; ++c) acc = acc + qi[c] * kj[c];
          scores[j] = acc * scale_f;
        }
        const Visibility& vis = *s.visible;
        kernels::softmax_row<T>(scores, [&vis, i](std::size_t j) { return vis(i, j); },
                                std::span<T>(P + i * L, L));
        T* oi = out.ptr() + (s.offset + i) * d + h * dh;
        for (std::size_t j = 0; j < L; ++j) {
          const T pij = P[i * L + j];
          if (!vis(i, j)) continue;
          const T* vj = Vv.ptr() + (s.offset + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) oi[c] = oi[c] + pij * vj[c];
        }
      }
    }
    base += L * L * n_heads;
  }
  require_finite(out, "attention");

  const bool rg = q.requires_grad() || k.requires_grad() || v.requires_grad();
  std::vector<Segment> segs(segments.begin(), segments.end());
  return q.tape->record(
      std::move(out), rg,
      [iq = q.id, ik = k.id, iv = v.id, probs, segs = std::move(segs), n_heads, dh, d, N,
       scale_f](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& Q = t.value(iq);
        const Tensor<T>& K = t.value(ik);
        const Tensor<T>& Vv = t.value(iv);
        Tensor<T> gq = Tensor<T>::zeros({N, d});
        Tensor<T> gk = Tensor<T>::zeros({N, d});
        Tensor<T> gv = Tensor<T>::zeros({N, d});
        std::vector<T> dp;
        std::size_t base = 0;
        for (const auto& s : segs) {
          const std::size_t L = s.length;
          dp.assign(L, T{0});
          const Visibility& vis = *s.visible;
          for (std::size_t h = 0; h < n_heads; ++h) {
            const T* P = probs->data() + base + h * L * L;
            for (std::size_t i = 0; i < L; ++i) {
              const T* gi = g.ptr() + (s.offset + i) * d + h * dh;
              T rowdot{0};
              for (std::size_t j = 0; j < L; ++j) {
                if (!vis(i, j)) continue;
                const T pij = P[i * L + j];
                const T* vj = Vv.ptr() + (s.offset + j) * d + h * dh;
                T* gvj = gv.ptr() + (s.offset + j) * d + h * dh;
                T acc{0};
                for (std::size_t c = 0; c < dh; ++c) {
                  acc = acc + gi[c] * vj[c];
                  gvj[c] = gvj[c] + pij * gi[c];
                }
                dp[j] = acc;
                rowdot = rowdot + acc * pij;
              }
              const T* qi = Q.ptr() + (s.offset + i) * d + h * dh;
              T* gqi = gq.ptr() + (s.offset + i) * d + h * dh;
              for (std::size_t j = 0; j < L; ++j) {
                if (!vis(i, j)) continue;
                const T ds = P[i * L + j] * (dp[j] - rowdot) * scale_f;
                const T* kj = K.ptr() + (s.offset + j) * d + h * dh;
                T* gkj = gk.ptr() + (s.offset + j) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  gqi[c] = gqi[c] + ds * kj[c];
                  gkj[c] = gkj[c] + ds * qi[c];
                }
              }
            }
          }
          base += L * L * n_heads;
        }
        t.accumulate_grad(iq, std::move(gq));
        t.accumulate_grad(ik, std::move(gk));
        t.accumulate_grad(iv, std::move(gv));
      });
}

}  // namespace scratchlab::numerics
