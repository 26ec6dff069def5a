#pragma once

// Finite-difference checks of every autodiff primitive and of a tiny full
// model, in double precision. Shared by the CLI, the gradcheck preset and
// the acceptance run.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "scratchlab/model/transformer.hpp"
#include "scratchlab/numerics/gradcheck.hpp"
#include "scratchlab/numerics/ops.hpp"

namespace scratchlab::harness {

struct GradCheckEntry {
  std::string name;
  int trial = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coords = 0;

  bool pass() const { return max_rel_error <= tolerance; }
};

struct GradCheckSuite {
  std::vector<GradCheckEntry> entries;

  bool pass() const {
    for (const auto& e : entries)
      if (!e.pass()) return false;
    return !entries.empty();
  }
};

namespace detail {

using numerics::Segment;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;
using numerics::Visibility;

inline Tensor<double> randn(numerics::Shape s, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor<double> t(std::move(s));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

// Scalar reduction through a fixed random projection, so every output
// coordinate matters.
inline Var<double> project(Tape<double>& t, Var<double> x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return numerics::sum(numerics::mul(x, t.constant(randn(x.shape(), rng))));
}

}  // namespace detail

/// Primitive checks over `trials` random shape draws (rel err <= 1e-4).
inline void primitive_gradchecks(GradCheckSuite& suite, int trials, std::uint64_t seed) {
  using namespace numerics;
  using detail::project;
  using detail::randn;
  using Ps = std::vector<Var<double>>;
  const double tol = 1e-4;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + 1000 + static_cast<std::uint64_t>(trial));
    const std::size_t R = 1 + rng() % 5, C = 1 + rng() % 6, K = 1 + rng() % 4;
    auto check = [&](const char* name, std::vector<Tensor<double>> ps, LossBuilder<double> f) {
      const auto r = finite_diff_check<double>(f, ps);
      suite.entries.push_back({name, trial, r.max_rel_error, tol, r.coords_checked});
    };
    check("matmul", {randn({R, K}, rng), randn({K, C}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, matmul(v[0], v[1]), 1); });
    check("add", {randn({R, C}, rng), randn({R, C}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, add(v[0], v[1]), 2); });
    check("mul", {randn({R, C}, rng), randn({R, C}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, mul(v[0], v[1]), 3); });
    check("scale", {randn({R, C}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, scale(v[0], -1.7), 4); });
    check("add_bias", {randn({R, C}, rng), randn({C}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, add_bias(v[0], v[1]), 5); });
    check("transpose", {randn({R, C}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, transpose(v[0]), 6); });
    check("gelu", {randn({R, C}, rng, 2.0)},
          [](Tape<double>& t, const Ps& v) { return project(t, gelu(v[0]), 7); });
    {
      std::vector<int> ids;
      for (std::size_t i = 0; i < R + 2; ++i) ids.push_back(static_cast<int>(rng() % 4));
      check("embedding", {randn({4, C}, rng)}, [ids](Tape<double>& t, const Ps& v) {
        return project(t, embedding(v[0], std::span<const int>(ids)), 8);
      });
    }
    {
      std::vector<std::size_t> rows{R - 1, 0, R / 2, R - 1};
      check("gather_rows", {randn({R, C}, rng)}, [rows](Tape<double>& t, const Ps& v) {
        return project(t, gather_rows(v[0], std::span<const std::size_t>(rows)), 9);
      });
    }
    check("layernorm", {randn({R, C + 1}, rng), randn({C + 1}, rng), randn({C + 1}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, layernorm(v[0], v[1], v[2], 1e-5), 10); });
    {
      Tensor<double> mask({R, C}, 0.0);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 1; c < C; ++c)
          if (rng() % 3 == 0) mask.at(r, c) = kernels::hidden_sentinel<double>();
      check("masked_softmax", {randn({R, C}, rng)}, [mask](Tape<double>& t, const Ps& v) {
        return project(t, masked_softmax(v[0], mask), 11);
      });
    }
    {
      std::vector<int> targets;
      std::vector<std::uint8_t> lm;
      for (std::size_t r = 0; r < R; ++r) {
        targets.push_back(static_cast<int>(rng() % (C + 1)));
        lm.push_back(r == 0 || rng() % 2);
      }
      check("cross_entropy", {randn({R, C + 1}, rng)}, [targets, lm](Tape<double>&, const Ps& v) {
        return cross_entropy(v[0], std::span<const int>(targets), std::span<const std::uint8_t>(lm));
      });
    }
    check("dropout", {randn({R, C}, rng)},
          [](Tape<double>& t, const Ps& v) { return project(t, dropout(v[0], 0.3, 77), 12); });
    {
      const std::size_t heads = 1 + rng() % 2, d = heads * (1 + rng() % 3);
      const std::size_t L1 = 1 + rng() % 4, L2 = 1 + rng() % 4;
      auto v1 = std::make_shared<Visibility>(Visibility::causal(L1));
      std::vector<int> groups;
      for (std::size_t i = 0; i < L2; ++i) groups.push_back(i == 0 ? 0 : static_cast<int>(1 + rng() % 2));
      auto v2 = std::make_shared<Visibility>(Visibility::from_groups(groups));
      std::vector<Segment> segs{{0, L1, v1.get()}, {L1, L2, v2.get()}};
      const std::size_t N = L1 + L2;
      check("attention", {randn({N, d}, rng), randn({N, d}, rng), randn({N, d}, rng)},
            [segs, heads, v1, v2](Tape<double>& t, const Ps& v) {
              return project(t, attention(v[0], v[1], v[2], std::span<const Segment>(segs), heads), 13);
            });
    }
  }
}

/// Whole-model check on a 1-layer, 1-head, width-16 transformer with a
/// packed batch mixing an inductive group mask and a causal sequence
/// (rel err <= 1e-3), untied and tied head.
inline void model_gradchecks(GradCheckSuite& suite, std::uint64_t seed) {
  using namespace model;
  for (bool tied : {false, true}) {
    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 1;
    cfg.d_model = 16;
    cfg.vocab_size = 13;
    cfg.max_context = 12;
    cfg.tie_output_head = tied;
    auto ps = init_model<double>(cfg, seed + 21);
    std::mt19937_64 rng(seed + 22);
    std::normal_distribution<double> nd(0.0, 0.2);
    for (auto& t : ps.tensors())
      for (auto& v : t.data()) v += nd(rng);
    auto toks = [&](std::size_t n) {
      std::vector<int> out;
      for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<int>(rng() % cfg.vocab_size));
      return out;
    };
    std::vector<TrainSequence> batch;
    batch.push_back({toks(8), {0, 1, 2, 3, 2, 3, 4, 5}, {0, 1, 1, 0, 1, 1, 1, 1},
                     AttentionMask::from_groups(std::vector<int>{0, 0, 1, 1, 2, 2, 2, 2})});
    batch.push_back({toks(5), {0, 1, 2, 3, 4}, {0, 0, 1, 1, 1}, AttentionMask::causal(5)});
    numerics::LossBuilder<double> build = [&](numerics::Tape<double>& tape,
                                              const std::vector<numerics::Var<double>>& leaves) {
      BoundParams<double> P{&ps, leaves};
      return sequence_loss(tape, P, cfg, std::span<const TrainSequence>(batch), numerics::Reduction::mean);
    };
    numerics::GradCheckOptions opt;
    opt.max_coords = 40;
    opt.seed = seed;
    const auto r = numerics::finite_diff_check<double>(build, ps.tensors(), opt);
    suite.entries.push_back({tied ? "model_1x1x16_tied" : "model_1x1x16", 0, r.max_rel_error, 1e-3,
                             r.coords_checked});
  }
}

inline GradCheckSuite run_gradcheck_suite(int trials = 10, std::uint64_t seed = 0) {
  GradCheckSuite s;
  primitive_gradchecks(s, trials, seed);
  model_gradchecks(s, seed);
  return s;
}

}  // namespace scratchlab::harness
