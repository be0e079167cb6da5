#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqnat/bon_loss.hpp"
#include "seqnat/core.hpp"
#include "seqnat/nat_model.hpp"
#include "seqnat/rewards.hpp"
#include "seqnat/rl_estimators.hpp"

namespace seqnat {

// -------------------------------------------------------------------- tasks

enum class TaskKind { Copy, Reverse, Synonym };
std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view name);

/// Synthetic length-preserving translation task. The synonym task maps each
/// source token to one of two target synonyms; the mode is drawn uniformly
/// per sentence and applies to every token of it.
struct TaskSpec {
  TaskKind kind = TaskKind::Copy;
  std::size_t src_vocab = 20;
  std::size_t tgt_vocab = 20;
  std::size_t min_len = 4;
  std::size_t max_len = 8;
  std::size_t pairs = 5000;
  std::uint64_t seed = 1;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;

  void validate() const;
};

/// Target token of source token `s` under synonym mode 0 or 1. Mode 0 is the
/// identity; mode 1 is s + src_vocab (mod tgt_vocab), disjoint from mode 0
/// when tgt_vocab >= 2 src_vocab.
TokenId synonym_of(TokenId s, int mode, const TaskSpec& spec);

struct Pair {
  Sentence src;
  Sentence ref;
  friend bool operator==(const Pair&, const Pair&) = default;
};

struct Corpus {
  TaskSpec spec;
  std::vector<Pair> train;
  std::vector<Pair> valid;
  std::vector<Pair> test;
};

Corpus generate_corpus(const TaskSpec& spec);

/// Writes train.tsv, valid.tsv, test.tsv (`src ids<TAB>ref ids`) and the
/// corpus.header sidecar into `dir`.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);
inline constexpr const char* kCorpusFiles[] = {"train.tsv", "valid.tsv", "test.tsv", "corpus.header"};

// ----------------------------------------------------------------- schedule

enum class ObjectiveKind { CrossEntropy, BoN, BoW, RL };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::CrossEntropy;
  int bon_order = 2;
  BowMetric bow_metric = BowMetric::L1;
  EstimatorConfig rl;

  /// "ce", "bon:2", "bow:l1", "rl:traverse_ref", ...
  std::string name() const;
};

/// Parses one strategy token. `rl_defaults` supplies k, n_samples and the
/// reward for RL stages.
Objective parse_objective(std::string_view token, const EstimatorConfig& rl_defaults);

struct Stage {
  Objective objective;
  int steps = 0;
  int batch_size = 32;
  double learning_rate = 1e-3;
};

struct StageSchedule {
  std::vector<Stage> stages;
  void validate() const;
  std::uint64_t total_steps() const;
};

/// Builds a schedule from a comma-separated strategy ("ce,bon:2,rl:traverse_ref")
/// and per-stage lists; a single-element list applies to every stage.
StageSchedule parse_schedule(std::string_view strategy, const std::vector<int>& steps,
                             const std::vector<int>& batch_sizes, const std::vector<double>& learning_rates,
                             const EstimatorConfig& rl_defaults);

// ----------------------------------------------------------------- training

struct TrainOptions {
  std::uint64_t seed = 1;
  int threads = 1;
  /// Validation every `eval_interval` steps (0 = only at stage ends).
  int eval_interval = 0;
  /// Validation pairs used for logged metrics (0 = whole split).
  std::size_t eval_pairs = 200;
  /// Stages before this index are skipped; the params passed in are taken to
  /// be the checkpoint that ended stage first_stage - 1.
  std::size_t first_stage = 0;
  std::function<void(std::size_t stage, const ModelParams&)> on_stage_end;
};

struct LogRow {
  std::uint64_t step = 0;
  std::size_t stage = 0;
  std::string objective;
  double loss = 0.0;
  std::optional<double> val_gleu;
  std::optional<double> val_bleu;
  std::uint64_t reward_calls_cum = 0;
};

struct TrainingLog {
  std::vector<LogRow> rows;
  /// `step,stage,objective,loss,val_gleu,val_bleu,reward_calls_cum`
  void write_csv(std::ostream& out) const;
};

/// Executes the stages in order and returns the final parameters. Each
/// stage gets a fresh Adam state and its own rng stream derived from the
/// seed, so resuming at a stage boundary reproduces an uninterrupted run.
ModelParams train(const Corpus& corpus, ModelParams params, const StageSchedule& schedule,
                  const TrainOptions& options, TrainingLog& log);

// --------------------------------------------------------------- evaluation

struct EvalResult {
  std::map<RewardKind, double> metrics;  // corpus mean of sentence scores
  double exact_match = 0.0;
  std::size_t sentences = 0;
};

/// Argmax decoding at the source length, scored against each reference.
EvalResult evaluate(const ModelParams& params, std::span<const Pair> split, const std::vector<RewardKind>& metrics);

struct CorrelationResult {
  double pearson_ce = 0.0;
  double pearson_bon = 0.0;
  std::size_t sentences = 0;
};

/// Pearson correlation of -CE/T and of -BoN-L1 (normalized) against the
/// GLEU of the decoded output, per sentence. Needs >= 100 sentences.
CorrelationResult correlate_losses(const ModelParams& params, std::span<const Pair> split, int n);

/// Throws InvalidInput naming the column when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y, std::string_view x_name = "x",
               std::string_view y_name = "y");

}  // namespace seqnat
