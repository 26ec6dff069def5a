#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "scratchlab/harness/experiments.hpp"
#include "scratchlab/harness/gradcheck_suite.hpp"
#include "scratchlab/harness/optimizer.hpp"
#include "scratchlab/harness/task.hpp"
#include "scratchlab/harness/train.hpp"

using namespace scratchlab;
using namespace scratchlab::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("scratchlab_harness_" + name);
  fs::remove_all(p);
  return p;
}

// A tiny model so that a training step takes milliseconds.
KeyValues tiny(const std::string& extra = "") {
  return parse_kv(
      "task.kind=cycle\n"
      "task.n=2\n"
      "task.mode=none\n"
      "model.n_layers=1\n"
      "model.n_heads=2\n"
      "model.d_model=16\n"
      "train.batch_size=8\n"
      "train.steps=10\n"
      "train.eval_interval=5\n"
      "train.wall_time=false\n"
      "eval.size=16\n"
      "optim.warmup_steps=2\n" +
      extra);
}

ParameterStore<float> scalar_store(float value, std::size_t rank = 1) {
  ParameterStore<float> ps;
  ps.add("w", rank == 1 ? Tensor<float>({1}, value) : Tensor<float>({1, 1}, value));
  return ps;
}

}  // namespace

// ------------------------------------------------------------ optimizer

TEST(AdamW, ZeroGradientsZeroDecayLeaveParametersUnchanged) {
  auto ps = model::init_model<float>(model::ModelConfig::desk_default(20), 3);
  const auto before = ps.checksum();
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamWState st;
  for (int i = 0; i < 3; ++i) {
    std::vector<Tensor<float>> g;
    for (const auto& t : ps.tensors()) g.push_back(Tensor<float>::zeros(t.shape()));
    ASSERT_TRUE(optimizer_step(ps, std::move(g), st, cfg));
  }
  EXPECT_EQ(ps.checksum(), before);
  EXPECT_EQ(st.step, 3u);
}

TEST(AdamW, DecayOnlyShrinksMatricesByLrTimesWd) {
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.5;
  cfg.warmup_steps = 0;
  ParameterStore<float> ps;
  ps.add("m", Tensor<float>({2, 2}, 2.0f));
  ps.add("b", Tensor<float>({2}, 2.0f));
  AdamWState st;
  double expect = 2.0;
  for (int i = 0; i < 4; ++i) {
    ASSERT_TRUE(optimizer_step(ps, {Tensor<float>::zeros({2, 2}), Tensor<float>::zeros({2})}, st, cfg));
    expect *= 1.0 - cfg.lr * cfg.weight_decay;
    for (float v : ps[0].data()) EXPECT_NEAR(v, expect, 1e-6);
    for (float v : ps[1].data()) EXPECT_EQ(v, 2.0f);  // vectors are not decayed
  }
}

TEST(AdamW, ScalarMatchesHandComputation) {
  // Constant gradient g: m_t/bc1 = g and v_t/bc2 = g^2, so every step moves
  // by lr_t * g / (|g| + eps).
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.warmup_steps = 2;
  cfg.clip_norm = 0.0;
  cfg.weight_decay = 0.0;
  auto ps = scalar_store(1.0f);
  AdamWState st;
  const double g = 0.5;
  double w = 1.0;
  for (int t = 1; t <= 4; ++t) {
    ASSERT_TRUE(optimizer_step(ps, {Tensor<float>({1}, static_cast<float>(g))}, st, cfg));
    const double lr = t < 2 ? 0.05 : 0.1;
    w -= lr * g / (g + cfg.eps);
    EXPECT_NEAR(ps[0].data()[0], w, 1e-6) << "step " << t;
  }
}

TEST(AdamW, ClippingScalesTheFirstMoment) {
  AdamWConfig cfg;
  cfg.lr = 1.0;
  cfg.warmup_steps = 0;
  cfg.weight_decay = 0.0;
  cfg.clip_norm = 1.0;
  auto ps = scalar_store(0.0f);
  AdamWState st;
  ASSERT_TRUE(optimizer_step(ps, {Tensor<float>({1}, 10.0f)}, st, cfg));
  // m = 0.1 * 1, v = 0.05 * 1 after clipping to norm 1.
  EXPECT_NEAR(st.m[0].data()[0], 0.1f, 1e-7);
  EXPECT_NEAR(st.v[0].data()[0], 0.05f, 1e-7);
}

TEST(AdamW, NonFiniteGradientIsSkippedAndCounted) {
  auto ps = scalar_store(1.0f);
  AdamWState st;
  AdamWConfig cfg;
  EXPECT_FALSE(optimizer_step(ps, {Tensor<float>({1}, std::numeric_limits<float>::quiet_NaN())}, st, cfg));
  EXPECT_FALSE(optimizer_step(ps, {Tensor<float>({1}, std::numeric_limits<float>::infinity())}, st, cfg));
  EXPECT_EQ(st.skipped, 2u);
  EXPECT_EQ(st.step, 0u);
  EXPECT_EQ(ps[0].data()[0], 1.0f);
}

TEST(AdamW, ShapeMismatchThrows) {
  auto ps = scalar_store(1.0f);
  AdamWState st;
  EXPECT_THROW(optimizer_step(ps, {Tensor<float>({2}, 1.0f)}, st, AdamWConfig{}), ShapeError);
  EXPECT_THROW(optimizer_step(ps, {}, st, AdamWConfig{}), ShapeError);
}

// ------------------------------------------------------------ task registry

TEST(TaskRegistry, EveryKindAndModeVerifiesAgainstItsOracle) {
  struct Case {
    TaskKind kind;
    int n, n_min, d_amb;
  };
  const std::vector<Case> cases{{TaskKind::cycle, 3, 1, 0},      {TaskKind::mixed, 4, 1, 0},
                                {TaskKind::ood_uneven, 6, 1, 0}, {TaskKind::ood_i, 3, 1, 0},
                                {TaskKind::random_graph, 8, 1, 0}, {TaskKind::parity, 8, 1, 12},
                                {TaskKind::half_parity, 10, 1, 0}, {TaskKind::add_spaces, 4, 1, 0},
                                {TaskKind::add_shift, 3, 1, 6}};
  for (const auto& c : cases) {
    for (ScratchMode m : {ScratchMode::none, ScratchMode::flat, ScratchMode::inductive}) {
      TaskSpec s;
      s.kind = c.kind;
      s.n = c.n;
      s.n_min = c.n_min;
      s.d_amb = c.d_amb;
      s.mode = m;
      if (c.kind == TaskKind::random_graph && m != ScratchMode::none) {
        EXPECT_THROW(s.validate(), ConfigError);
        continue;
      }
      s.validate();
      for (std::uint64_t i = 0; i < 200; ++i) {
        const auto g = generate(s, derive_seed(5, i));
        ASSERT_TRUE(verify(s, g)) << s.describe() << " sample " << i;
      }
    }
  }
}

TEST(TaskRegistry, ExtractionFromGroundTruthIsExact) {
  // Teacher-forced: feed the ground-truth output to the answer reader.
  for (auto kind : {TaskKind::cycle, TaskKind::parity, TaskKind::half_parity, TaskKind::add_spaces, TaskKind::add_shift}) {
    for (ScratchMode m : {ScratchMode::none, ScratchMode::flat, ScratchMode::inductive}) {
      TaskSpec s;
      s.kind = kind;
      s.n = kind == TaskKind::half_parity ? 8 : 4;
      s.mode = m;
      std::size_t correct = 0, total = 300;
      for (std::uint64_t i = 0; i < total; ++i) {
        const auto g = generate(s, derive_seed(9, i));
        const Tokens out = m == ScratchMode::inductive ? g.sample.states.back() : target_tokens(s, g.sample);
        correct += read_answer(s, out) == g.sample.answer;
      }
      EXPECT_EQ(correct, total) << s.describe();
    }
  }
}

TEST(TaskRegistry, ParseRoundTripAndErrors) {
  TaskSpec s;
  s.apply(parse_kv("task.kind=add_shift\ntask.n=3\ntask.d_amb=12\ntask.mode=flat\n"));
  KeyValues kv;
  s.store(kv);
  TaskSpec t;
  t.apply(kv);
  EXPECT_EQ(t.describe(), s.describe());
  EXPECT_THROW(parse_task_kind("knapsack"), ConfigError);
  EXPECT_THROW(parse_mode("sideways"), ConfigError);
}

TEST(TaskRegistry, GenerationIsSeedDeterministic) {
  TaskSpec s;
  s.kind = TaskKind::cycle;
  s.n = 4;
  s.mode = ScratchMode::inductive;
  const auto a = generate(s, 77), b = generate(s, 77), c = generate(s, 78);
  EXPECT_EQ(a.sample.question, b.sample.question);
  EXPECT_EQ(a.sample.states, b.sample.states);
  EXPECT_NE(a.sample.question, c.sample.question);
}

TEST(TaskRegistry, CumulativeMixtureSizesStayWithinStage) {
  TaskSpec s;
  s.kind = TaskKind::mixed;
  s.n = 4;
  std::vector<int> seen(5, 0);
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto g = generate(s, derive_seed(1, i));
    ASSERT_TRUE(g.graph.has_value());
    const int n = static_cast<int>(g.sample.meta.at("n"));
    ASSERT_GE(n, 2);
    ASSERT_LE(n, 4);
    ++seen[n];
  }
  for (int n = 2; n <= 4; ++n) EXPECT_NEAR(seen[n] / 2000.0, 1.0 / 3.0, 0.05) << n;
}

// ------------------------------------------------------------ config

TEST(TrainConfigTest, DefaultsFollowTheLedger) {
  const auto c = config_from_kv(parse_kv("task.kind=cycle\ntask.n=2\n"));
  EXPECT_EQ(c.batch_size, 256u);
  EXPECT_DOUBLE_EQ(c.optim.beta1, 0.9);
  EXPECT_DOUBLE_EQ(c.optim.beta2, 0.95);
  EXPECT_DOUBLE_EQ(c.optim.lr, 3e-4);
  EXPECT_EQ(c.optim.warmup_steps, 100u);
  EXPECT_EQ(c.model.n_layers, 4u);
  EXPECT_EQ(c.model.d_model, 128u);
  EXPECT_EQ(c.model.dropout, 0.0);
  EXPECT_EQ(c.model.vocab_size, tasks::Vocabulary::graph().size());
  ASSERT_EQ(c.evals.size(), 1u);
  EXPECT_EQ(c.evals[0].name, "test");
}

TEST(TrainConfigTest, EvalOverridesAndRoundTrip) {
  auto kv = tiny("eval.sets=train,ood\neval.ood.n=6\neval.ood.size=7\n");
  const auto c = config_from_kv(kv);
  ASSERT_EQ(c.evals.size(), 2u);
  EXPECT_EQ(c.evals[0].task.n, 2);
  EXPECT_EQ(c.evals[1].task.n, 6);
  EXPECT_EQ(c.evals[1].size, 7u);
  // max_context covers the longer eval distribution.
  const auto longest = detail::probe_context(c.evals[1].task, c.seed, 50);
  EXPECT_GE(c.model.max_context, longest);
  const auto d = config_from_kv(config_to_kv(c));
  EXPECT_EQ(format_kv(config_to_kv(d)), format_kv(config_to_kv(c)));
}

TEST(TrainConfigTest, InvalidValuesAreRejected) {
  EXPECT_THROW(config_from_kv(tiny("train.batch_size=0\n")), ConfigError);
  EXPECT_THROW(config_from_kv(tiny("train.steps=0\n")), ConfigError);
  EXPECT_THROW(config_from_kv(tiny("train.data=streamed\n")), ConfigError);
  EXPECT_THROW(config_from_kv(tiny("train.grad_accum=9\n")), ConfigError);
  EXPECT_THROW(config_from_kv(tiny("eval.sets=p\neval.p.kind=parity\n")), ConfigError);
  EXPECT_THROW(config_from_kv(tiny("curriculum.schedule=sometimes\n")), ConfigError);
}

// ------------------------------------------------------------ evaluation

TEST(Evaluate, RecordsReproduceTheScalarAndParametersAreUntouched) {
  auto c = config_from_kv(tiny("task.n=3\ntask.mode=inductive\n"));
  const auto vocab = task_vocabulary(c.task.kind);
  auto params = model::init_model<float>(c.model, 4);
  const auto es = build_eval_set("x", c.task, 40, 1);
  const auto before = params.checksum();
  const auto r = evaluate(params, c.model, vocab, es, {16, 1});
  EXPECT_EQ(params.checksum(), before);
  ASSERT_EQ(r.records.size(), 40u);
  EXPECT_EQ(accuracy_of(r.records), r.accuracy);
  EXPECT_GE(r.accuracy, 0.0);
  EXPECT_LE(r.accuracy, 1.0);
  for (std::size_t i = 0; i < r.records.size(); ++i) EXPECT_EQ(r.records[i].index, i);
}

TEST(Evaluate, ThreadedMatchesSerial) {
  auto c = config_from_kv(tiny("task.mode=flat\n"));
  const auto vocab = task_vocabulary(c.task.kind);
  auto params = model::init_model<float>(c.model, 8);
  const auto es = build_eval_set("x", c.task, 30, 2);
  const auto a = evaluate(params, c.model, vocab, es, {7, 1});
  const auto b = evaluate(params, c.model, vocab, es, {7, 3});
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].predicted, b.records[i].predicted);
  EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(Evaluate, FormatOnlyModelSitsAtChance) {
  // A few steps teach the output format (emit 0 or 1) long before the
  // cycle question is learned; accuracy on a balanced set is then chance.
  auto kv = tiny("train.steps=30\ntrain.eval_interval=30\ntrain.batch_size=32\noptim.lr=0.003\n");
  const auto c = config_from_kv(kv);
  const auto res = train(c);
  const auto vocab = task_vocabulary(c.task.kind);
  const auto es = build_eval_set("chance", c.task, 2000, 11);
  const auto r = evaluate(res.params, c.model, vocab, es, {256, env_threads()});
  EXPECT_NEAR(r.accuracy, 0.5, 0.05);
  std::size_t labelled = 0;
  for (const auto& rec : r.records) labelled += rec.predicted == "0" || rec.predicted == "1";
  EXPECT_EQ(labelled, r.records.size());
}

TEST(Evaluate, UnfinishedDecodesCountAsWrong) {
  auto c = config_from_kv(tiny("task.mode=flat\n"));
  const auto vocab = task_vocabulary(c.task.kind);
  auto params = model::init_model<float>(c.model, 8);
  const auto es = build_eval_set("x", c.task, 20, 2);
  const auto r = evaluate(params, c.model, vocab, es);
  for (const auto& rec : r.records)
    if (!rec.finished) EXPECT_FALSE(rec.correct);
}

// ------------------------------------------------------------ training

TEST(Train, TenStepsWithIntervalFiveWriteTwoEvalRows) {
  auto kv = tiny();
  auto c = config_from_kv(kv);
  const auto dir = scratch_dir("ten");
  c.out_dir = dir.string();
  c.source_text = "# verbatim\n" + format_kv(kv);
  const auto res = train(c);
  EXPECT_EQ(res.steps_run, 10u);
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_EQ(res.rows[0].step, 5u);
  EXPECT_EQ(res.rows[1].step, 10u);
  const auto csv = slurp(dir / "metrics.csv");
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], kMetricsHeader);
  EXPECT_EQ(lines[1].rfind("5,", 0), 0u);
  EXPECT_EQ(slurp(dir / "config.txt"), c.source_text);
  EXPECT_TRUE(fs::exists(dir / "model.ckpt"));
  const auto ck = model::load_checkpoint((dir / "model.ckpt").string());
  EXPECT_EQ(ck.params.checksum(), res.params.checksum());
}

TEST(Train, SameSeedGivesByteIdenticalMetrics) {
  auto kv = tiny("task.mode=inductive\ntrain.steps=6\ntrain.eval_interval=3\ntrain.log_interval=1\n");
  auto c = config_from_kv(kv);
  const auto da = scratch_dir("det_a"), db = scratch_dir("det_b");
  c.out_dir = da.string();
  const auto a = train(c);
  c.out_dir = db.string();
  const auto b = train(c);
  const auto ma = slurp(da / "metrics.csv");
  const auto mb = slurp(db / "metrics.csv");
  EXPECT_FALSE(ma.empty());
  EXPECT_EQ(ma, mb);
  EXPECT_EQ(a.params.checksum(), b.params.checksum());
  c.seed = 1;
  c.out_dir.clear();
  EXPECT_NE(train(c).params.checksum(), a.params.checksum());
}

TEST(Train, GradientAccumulationMatchesOneBatch) {
  auto c1 = config_from_kv(tiny("train.steps=3\ntrain.eval_interval=3\n"));
  auto c4 = c1;
  c4.grad_accum = 4;
  const auto a = train(c1), b = train(c4);
  ASSERT_EQ(a.losses.size(), b.losses.size());
  for (std::size_t i = 0; i < a.losses.size(); ++i) EXPECT_NEAR(a.losses[i], b.losses[i], 1e-5);
}

TEST(Train, FixedDatasetModeRuns) {
  auto c = config_from_kv(tiny("train.data=fixed\ntrain.dataset_size=12\n"));
  const auto res = train(c);
  EXPECT_EQ(res.steps_run, 10u);
  for (double l : res.losses) EXPECT_TRUE(std::isfinite(l));
}

TEST(Train, LossFallsOnAnEasyTask) {
  auto c = config_from_kv(tiny("task.mode=flat\ntrain.steps=40\ntrain.eval_interval=40\noptim.lr=0.003\n"));
  const auto res = train(c);
  EXPECT_LT(res.losses.back(), res.losses.front());
}

TEST(Train, ContextOverflowIsAnError) {
  auto c = config_from_kv(tiny("task.mode=flat\nmodel.max_context=6\n"));
  EXPECT_THROW(train(c), ContextOverflow);
}

TEST(Train, NonFiniteStreakAborts) {
  auto c = config_from_kv(tiny("train.nonfinite_limit=2\noptim.clip_norm=0\n"));
  c.optim.lr = std::numeric_limits<double>::infinity();
  c.optim.warmup_steps = 0;
  EXPECT_THROW(train(c), NumericError);
}

TEST(Train, VocabularyMismatchIsAConfigError) {
  auto c = config_from_kv(tiny());
  c.model.vocab_size = 5;
  EXPECT_THROW(train(c), ConfigError);
}

TEST(Train, EarlyStopAtTarget) {
  // A target of 1e-9 is met at the first evaluation.
  auto c = config_from_kv(tiny("train.stop_eval=test\ntrain.stop_accuracy=1e-9\n"));
  auto res = train(c);
  std::optional<std::size_t> first;
  for (const auto& r : res.rows)
    if (r.accuracy >= 1e-9 && !first) first = r.step;
  EXPECT_EQ(res.reached_step, first);
  if (first) {
    EXPECT_EQ(res.steps_run, *first);
    EXPECT_EQ(res.stopped_early, *first < 10);
    EXPECT_EQ(res.rows.back().step, *first);
  } else {
    EXPECT_EQ(res.steps_run, 10u);
  }
}

// ------------------------------------------------------------ curriculum

TEST(Curriculum, CumulativeStagesNeverShrink) {
  auto c = config_from_kv(tiny("curriculum.schedule=cumulative\ncurriculum.n_max=6\n"));
  const auto st = curriculum_stages(c);
  ASSERT_EQ(st.size(), 5u);
  int prev = 0;
  for (const auto& s : st) {
    EXPECT_EQ(s.task.kind, TaskKind::mixed);
    EXPECT_GE(s.task.n, prev);
    prev = s.task.n;
    EXPECT_DOUBLE_EQ(s.target_accuracy, 0.95);
  }
  c.curriculum.schedule = Schedule::forgetful;
  for (const auto& s : curriculum_stages(c)) EXPECT_EQ(s.task.kind, TaskKind::cycle);
  c.curriculum.n_max = 1;
  EXPECT_THROW(curriculum_stages(c), ConfigError);
}

TEST(Curriculum, SingleStageEqualsPlainTraining) {
  const std::string common = "model.max_context=48\n";
  auto cc = config_from_kv(tiny(common + "eval.test.kind=mixed\ncurriculum.schedule=cumulative\ncurriculum.n_max=2\ncurriculum.stage_steps=10\n"));
  auto tc = config_from_kv(tiny(common + "task.kind=mixed\ntrain.stop_eval=stage\ntrain.stop_accuracy=0.95\n"));
  cc.out_dir = scratch_dir("cur").string();
  tc.out_dir = scratch_dir("plain").string();
  const auto a = curriculum_train(cc);
  const auto b = train(tc);
  EXPECT_EQ(slurp(fs::path(cc.out_dir) / "metrics.csv"), slurp(fs::path(tc.out_dir) / "metrics.csv"));
  EXPECT_EQ(a.params.checksum(), b.params.checksum());
  ASSERT_EQ(a.stages.size(), 1u);
}

TEST(Curriculum, ExhaustedStageReportsPartial) {
  auto c = config_from_kv(
      tiny("curriculum.schedule=forgetful\ncurriculum.n_max=3\ncurriculum.stage_steps=2\ncurriculum.threshold=1.01\n"));
  c.out_dir = scratch_dir("partial").string();
  const auto res = curriculum_train(c);
  EXPECT_TRUE(res.partial);
  EXPECT_EQ(res.stages.size(), 1u);
  EXPECT_EQ(res.steps_run, 2u);
  EXPECT_TRUE(fs::exists(fs::path(c.out_dir) / "stages.csv"));
}

// ------------------------------------------------------------ gradcheck suite

TEST(GradCheckSuiteTest, PassesInDoublePrecision) {
  const auto s = run_gradcheck_suite(2, 0);
  EXPECT_TRUE(s.pass());
  for (const auto& e : s.entries) EXPECT_LE(e.max_rel_error, e.tolerance) << e.name << " trial " << e.trial;
}

// ------------------------------------------------------------ presets

TEST(Experiments, EveryTrainingPresetParses) {
  for (const auto& name : preset_names()) {
    if (!is_training_preset(name)) continue;
    const auto c = config_from_kv(preset_kv(name, {}));
    EXPECT_NO_THROW(c.validate()) << name;
  }
  EXPECT_EQ(config_from_kv(preset_kv("cycle-nosp", {})).batch_size, 512u);
  const auto ood = config_from_kv(preset_kv("cycle-ood", {}));
  EXPECT_EQ(ood.task.kind, TaskKind::ood_uneven);
  ASSERT_EQ(ood.evals.size(), 2u);
  EXPECT_EQ(ood.evals[1].task.kind, TaskKind::cycle);
  EXPECT_EQ(ood.evals[1].task.n, 12);
}

TEST(Experiments, UnknownPresetIsAnError) {
  EXPECT_THROW(run_experiment("cycle-teleport", {}, ""), ConfigError);
}

TEST(Experiments, GradcheckPresetPasses) {
  const auto dir = scratch_dir("gc");
  const auto r = run_experiment("gradcheck", {{"gradcheck.trials", "1"}}, dir.string());
  EXPECT_EQ(r.pass, std::optional<bool>(true));
  EXPECT_TRUE(fs::exists(dir / "gradcheck.csv"));
  EXPECT_EQ(slurp(dir / "summary.txt"), r.summary + "\n");
}

TEST(Experiments, GlobalityPresetAtTwo) {
  const auto r = run_experiment("globality-cycle", {{"globality.n", "2"}}, "");
  EXPECT_EQ(r.pass, std::optional<bool>(true));
  EXPECT_DOUBLE_EQ(r.values.at("analytic"), 1.0);
}

TEST(Experiments, TrainingPresetWritesArtifactsAndAppliesThresholds) {
  const auto dir = scratch_dir("ood");
  KeyValues o = tiny("train.steps=2\ntrain.eval_interval=2\neval.size=4\ntask.mode=flat\n");
  o.erase("task.kind");
  o.erase("task.n");
  const auto r = run_experiment("cycle-ood", o, dir.string());
  ASSERT_TRUE(r.train.has_value());
  EXPECT_EQ(r.train->steps_run, 2u);
  EXPECT_TRUE(r.values.count("train"));
  EXPECT_TRUE(r.values.count("ood"));
  ASSERT_TRUE(r.pass.has_value());
  EXPECT_EQ(*r.pass, r.values.at("train") >= 0.95 && r.values.at("ood") <= 0.6);
  const auto snap = parse_kv(slurp(dir / "config.txt"));
  EXPECT_EQ(snap.at("accept.ood.max"), "0.6");
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "model.ckpt"));
}

TEST(Experiments, ThresholdKeysAreValidated) {
  EXPECT_THROW(thresholds_from({{"accept.test.median", "1"}}), ConfigError);
  const auto t = thresholds_from({{"accept.a.min", "0.5"}, {"accept.a.max", "0.7"}});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].min, std::optional<double>(0.5));
  EXPECT_EQ(t[0].max, std::optional<double>(0.7));
}
