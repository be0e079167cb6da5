#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "seqnat/nat_model.hpp"
#include "seqnat/pipeline.hpp"
#include "seqnat/rewards.hpp"
#include "seqnat/rl_estimators.hpp"

namespace seqnat {

/// Declarative run description parsed from a flat `dotted.key = value` file.
/// Lines starting with '#' are comments. Unknown and duplicate keys are
/// errors; relative paths resolve against the config file's directory.
struct RunConfig {
  std::string text;  // verbatim source, echoed into every run directory
  std::filesystem::path source;

  std::filesystem::path output_dir = "run";
  std::uint64_t seed = 1;
  int threads = 1;

  TaskSpec task;
  std::filesystem::path data_dir;  // default: <output_dir>/gen-data

  std::size_t model_embed = 32;
  std::size_t model_hidden = 64;
  std::size_t model_max_len = 64;

  std::string train_strategy = "ce,bon:2,rl:traverse_ref";
  std::vector<int> train_steps = {3000, 300, 100};
  std::vector<int> train_batch_size = {32};
  std::vector<double> train_lr = {2e-3};
  int train_eval_interval = 100;
  std::size_t train_eval_pairs = 200;
  std::filesystem::path train_resume_from;
  std::size_t train_resume_stage = 0;

  EstimatorConfig rl;  // reward, k, n_samples for RL stages

  std::filesystem::path eval_checkpoint;  // default: last stage of <output_dir>/train
  std::string eval_split = "test";
  std::vector<RewardKind> eval_metrics = {RewardKind::Gleu, RewardKind::Bleu, RewardKind::Rouge2};

  std::string bench_instance = "canonical";  // or "random"
  std::size_t bench_vocab = 8;
  std::size_t bench_length = 4;
  int bench_runs = 10000;
  std::vector<EstimatorMethod> bench_methods = {EstimatorMethod::Base, EstimatorMethod::Step, EstimatorMethod::Topk,
                                                EstimatorMethod::TraverseRef};
  int bench_k = 4;
  int bench_n_samples = 10;
  RewardKind bench_reward = RewardKind::Rouge2;

  std::vector<std::size_t> complexity_lengths = {2, 4, 8, 16};
  std::size_t complexity_vocab = 1000;
  int complexity_k = 5;
  int complexity_n_samples = 10;
  RewardKind complexity_reward = RewardKind::Rouge2;

  std::filesystem::path correlate_checkpoint;  // default: as eval_checkpoint
  std::string correlate_split = "valid";
  int correlate_order = 2;
  std::size_t correlate_max_sentences = 500;

  static RunConfig parse(std::string_view text, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  /// Output directory of one subcommand: <output_dir>/<command>.
  std::filesystem::path command_dir(std::string_view command) const;
  std::filesystem::path effective_data_dir() const;
  std::filesystem::path effective_checkpoint(const std::filesystem::path& configured) const;
  StageSchedule schedule() const;
};

}  // namespace seqnat
