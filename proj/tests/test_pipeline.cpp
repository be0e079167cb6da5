#include "doctest.h"
#include "oracles.hpp"
#include "seqnat/optimizer.hpp"
#include "seqnat/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace seqnat;
namespace fs = std::filesystem;

namespace {

TaskSpec small_task(TaskKind kind, std::size_t pairs = 300) {
  TaskSpec s;
  s.kind = kind;
  s.src_vocab = 6;
  s.tgt_vocab = kind == TaskKind::Synonym ? 12 : 6;
  s.min_len = 2;
  s.max_len = 5;
  s.pairs = pairs;
  s.seed = 4;
  return s;
}

ModelParams small_model(const TaskSpec& task, std::uint64_t seed) {
  ModelDims d;
  d.src_vocab = task.src_vocab;
  d.tgt_vocab = task.tgt_vocab;
  d.embed = 8;
  d.hidden = 16;
  d.max_len = 8;
  Rng rng(seed);
  return ModelParams::initialize(d, rng);
}

StageSchedule schedule_of(const std::string& strategy, std::vector<int> steps, int batch = 4, double lr = 5e-3) {
  EstimatorConfig rl;
  rl.k = 2;
  rl.n_samples = 2;
  return parse_schedule(strategy, steps, {batch}, {lr}, rl);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("corpus generation is deterministic and task-shaped") {
  const TaskSpec spec = small_task(TaskKind::Synonym);
  const Corpus a = generate_corpus(spec), b = generate_corpus(spec);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.valid.size() + a.test.size() == spec.pairs);
  CHECK(a.valid.size() == 30);
  int mode1 = 0;
  for (const Pair& p : a.train) {
    REQUIRE(p.src.size() == p.ref.size());
    CHECK(p.src.size() >= spec.min_len);
    CHECK(p.src.size() <= spec.max_len);
    const bool identity = p.ref == p.src;
    if (!identity) {
      ++mode1;
      for (std::size_t i = 0; i < p.src.size(); ++i) CHECK(p.ref[i] == synonym_of(p.src[i], 1, spec));
    }
  }
  CHECK(mode1 > 60);
  CHECK(mode1 < 180);

  const Corpus rev = generate_corpus(small_task(TaskKind::Reverse));
  CHECK(rev.train[0].ref == Sentence(rev.train[0].src.rbegin(), rev.train[0].src.rend()));
}

TEST_CASE("task spec validation") {
  TaskSpec s = small_task(TaskKind::Copy);
  s.tgt_vocab = 3;
  CHECK_THROWS_AS(generate_corpus(s), ConfigError);
  s = small_task(TaskKind::Copy, 3);
  CHECK_THROWS_AS(generate_corpus(s), ConfigError);
  s = small_task(TaskKind::Copy);
  s.min_len = 0;
  CHECK_THROWS_AS(generate_corpus(s), ConfigError);
  CHECK_THROWS_AS(parse_task_kind("translate"), ConfigError);
}

TEST_CASE("corpus files round trip") {
  const fs::path dir = fs::temp_directory_path() / "seqnat_test_corpus";
  fs::remove_all(dir);
  const Corpus c = generate_corpus(small_task(TaskKind::Synonym));
  write_corpus(dir, c);
  const Corpus back = read_corpus(dir);
  CHECK(back.train == c.train);
  CHECK(back.valid == c.valid);
  CHECK(back.test == c.test);
  CHECK(back.spec.tgt_vocab == c.spec.tgt_vocab);
  CHECK(back.spec.kind == TaskKind::Synonym);
  CHECK(slurp(dir / "train.tsv").find('\t') != std::string::npos);

  std::ofstream(dir / "valid.tsv", std::ios::app) << "1 2 99\t1\n";
  CHECK_THROWS_AS(read_corpus(dir), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("schedule parsing") {
  const StageSchedule s = schedule_of("ce,bon:2,rl:traverse_ref", {30, 3, 1});
  REQUIRE(s.stages.size() == 3);
  CHECK(s.stages[0].objective.kind == ObjectiveKind::CrossEntropy);
  CHECK(s.stages[1].objective.bon_order == 2);
  CHECK(s.stages[2].objective.rl.method == EstimatorMethod::TraverseRef);
  CHECK(s.stages[2].objective.rl.k == 2);
  CHECK(s.total_steps() == 34);
  CHECK(s.stages[2].objective.name() == "rl:traverse_ref");
  CHECK(schedule_of("bow:cos", {1}).stages[0].objective.bow_metric == BowMetric::Cos);

  CHECK_THROWS_AS(schedule_of("ce,bon", {10, 0}), ConfigError);
  CHECK_THROWS_AS(schedule_of("ce,bon", {10, 5, 5}), ConfigError);
  CHECK_THROWS_AS(schedule_of("ce,,bon", {10}), ConfigError);
  CHECK_THROWS_AS(schedule_of("bon:7", {10}), ConfigError);
  CHECK_THROWS_AS(schedule_of("mle", {10}), ConfigError);
  try {
    schedule_of("rl:ppo", {10});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("traverse_ref") != std::string::npos);
  }
}

TEST_CASE("learning rate warms up then decays") {
  CHECK(scheduled_learning_rate(1, 100, 1.0) == doctest::Approx(0.2));
  CHECK(scheduled_learning_rate(5, 100, 1.0) == doctest::Approx(1.0));
  CHECK(scheduled_learning_rate(20, 100, 1.0) == doctest::Approx(0.5));
  CHECK(scheduled_learning_rate(1, 10, 0.3) == doctest::Approx(0.3));
}

TEST_CASE("adam step moves against the gradient with bias-corrected size") {
  ModelDims d;
  d.src_vocab = 2;
  d.tgt_vocab = 2;
  d.embed = 1;
  d.hidden = 1;
  d.max_len = 1;
  ModelParams p(d);
  ParamGrads g(d);
  g[Block::B2](0, 0) = 3.0;
  g[Block::B2](0, 1) = -0.5;
  Adam adam(d);
  adam.step(p, g, 0.01);
  CHECK(p[Block::B2](0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[Block::B2](0, 1) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p[Block::W1](0, 0) == 0.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("training is reproducible and logs every step") {
  const Corpus c = generate_corpus(small_task(TaskKind::Copy));
  const StageSchedule sched = schedule_of("ce,bon:2,bow:l2", {6, 3, 2});
  TrainOptions opt;
  opt.seed = 9;
  opt.eval_interval = 2;
  TrainingLog la, lb;
  const ModelParams a = train(c, small_model(c.spec, 1), sched, opt, la);
  const ModelParams b = train(c, small_model(c.spec, 1), sched, opt, lb);
  CHECK(params_hash(a) == params_hash(b));
  REQUIRE(la.rows.size() == 11);
  std::ostringstream sa, sb;
  la.write_csv(sa);
  lb.write_csv(sb);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("step,stage,objective,loss,val_gleu,val_bleu,reward_calls_cum\n", 0) == 0);
  CHECK(la.rows[1].val_gleu.has_value());
  CHECK_FALSE(la.rows[0].val_gleu.has_value());
  CHECK(la.rows[6].objective == "bon:2");
  CHECK(la.rows[10].step == 11);
}

TEST_CASE("resuming at a stage boundary reproduces the uninterrupted run") {
  const Corpus c = generate_corpus(small_task(TaskKind::Synonym));
  const StageSchedule sched = schedule_of("ce,bon:2,rl:traverse_ref", {8, 3, 2});
  TrainOptions opt;
  opt.seed = 5;
  std::vector<std::uint64_t> stage_hashes;
  std::vector<ModelParams> snapshots;
  opt.on_stage_end = [&](std::size_t, const ModelParams& p) {
    stage_hashes.push_back(params_hash(p));
    snapshots.push_back(p);
  };
  TrainingLog full_log;
  const ModelParams full = train(c, small_model(c.spec, 2), sched, opt, full_log);
  REQUIRE(snapshots.size() == 3);

  TrainOptions resume = opt;
  resume.first_stage = 1;
  std::vector<std::uint64_t> resumed_hashes;
  resume.on_stage_end = [&](std::size_t, const ModelParams& p) { resumed_hashes.push_back(params_hash(p)); };
  TrainingLog part_log;
  const ModelParams resumed = train(c, snapshots[0], sched, resume, part_log);
  CHECK(params_hash(resumed) == params_hash(full));
  CHECK(resumed_hashes == std::vector<std::uint64_t>(stage_hashes.begin() + 1, stage_hashes.end()));
  CHECK(part_log.rows.front().step == 9);
}

TEST_CASE("RL stage reward calls follow the closed form") {
  TaskSpec spec = small_task(TaskKind::Copy);
  spec.min_len = spec.max_len = 4;
  const Corpus c = generate_corpus(spec);
  const StageSchedule sched = schedule_of("rl:step", {3}, 5);
  TrainOptions opt;
  TrainingLog log;
  train(c, small_model(spec, 3), sched, opt, log);
  // Step: n * T per item.
  CHECK(log.rows.back().reward_calls_cum == 3u * 5u * 2u * 4u);
}

TEST_CASE("parallel batches agree with the serial run to rounding") {
  const Corpus c = generate_corpus(small_task(TaskKind::Copy));
  const StageSchedule sched = schedule_of("ce", {5}, 8);
  TrainOptions one, four;
  four.threads = 4;
  TrainingLog l1, l4, l4b;
  const ModelParams a = train(c, small_model(c.spec, 1), sched, one, l1);
  const ModelParams b = train(c, small_model(c.spec, 1), sched, four, l4);
  const ModelParams b2 = train(c, small_model(c.spec, 1), sched, four, l4b);
  CHECK(params_hash(b) == params_hash(b2));
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    for (std::size_t j = 0; j < a.blocks()[i].data().size(); ++j) {
      CHECK(std::abs(a.blocks()[i].data()[j] - b.blocks()[i].data()[j]) < 1e-9);
    }
  }
}

TEST_CASE("evaluation metrics") {
  const Corpus c = generate_corpus(small_task(TaskKind::Copy));
  const ModelParams untrained = small_model(c.spec, 1);
  const EvalResult r = evaluate(untrained, c.test, {RewardKind::Gleu, RewardKind::Bleu, RewardKind::Rouge2});
  CHECK(r.sentences == c.test.size());
  CHECK(r.metrics.at(RewardKind::Gleu) < 0.5);

  std::vector<Pair> reversed(c.test.rbegin(), c.test.rend());
  const EvalResult r2 = evaluate(untrained, reversed, {RewardKind::Gleu});
  CHECK(r2.metrics.at(RewardKind::Gleu) == doctest::Approx(r.metrics.at(RewardKind::Gleu)).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate(untrained, std::vector<Pair>{}, {RewardKind::Gleu}), InvalidInput);
}

TEST_CASE("pearson and correlation preconditions") {
  const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8.5}, flat = {1, 1, 1, 1};
  CHECK(pearson(x, y) > 0.99);
  try {
    pearson(x, flat, "ce", "gleu");
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("gleu") != std::string::npos);
  }
  const Corpus c = generate_corpus(small_task(TaskKind::Copy));
  CHECK_THROWS_AS(correlate_losses(small_model(c.spec, 1), c.valid, 2), InvalidInput);
}
