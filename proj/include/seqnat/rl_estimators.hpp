#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "seqnat/core.hpp"
#include "seqnat/rewards.hpp"

namespace seqnat {

/// Upper bound on the number of sentences an exact oracle will enumerate.
inline constexpr std::uint64_t kEnumerationBound = 1'000'000;

enum class EstimatorMethod { Base, Step, Topk, TraverseRef };

std::string_view to_string(EstimatorMethod m);
/// "base", "step", "topk", "traverse_ref"; anything else is a ConfigError
/// listing the valid names.
EstimatorMethod parse_estimator_method(std::string_view name);

/// How step rewards r(y_t) are obtained. MonteCarlo is the sampling
/// estimator; Exact enumerates completions and is meant for oracle tests.
enum class StepRewardMode { MonteCarlo, Exact };

struct EstimatorConfig {
  EstimatorMethod method = EstimatorMethod::TraverseRef;
  int n_samples = 10;
  int k = 5;
  RewardKind reward = RewardKind::Rouge2;
  std::uint64_t seed = 0;
  StepRewardMode step_reward = StepRewardMode::MonteCarlo;

  void validate(std::size_t vocab_size) const;
};

struct EstimatorReport {
  GradTable grad;
  std::uint64_t reward_calls = 0;
  double wall_time = 0.0;  // seconds
};

/// Top-k split of each position's distribution.
struct TopkPartition {
  struct Position {
    std::vector<TokenId> top;       // by probability desc, ties to smaller id
    double mass = 0.0;              // P_k: probability mass of `top`
    double residual_mass = 0.0;     // mass outside `top`, summed directly
    std::vector<double> residual;   // renormalized over V \ top; zero on `top`
    bool residual_empty = false;    // residual_mass < kResidualEpsilon
  };
  static constexpr double kResidualEpsilon = 1e-12;
  std::vector<Position> positions;
};

/// -sum_Y grad_z P(Y) r(Y) by enumerating V^T.
GradTable exact_gradient_oracle(const ProbTable& p, const RewardFn& reward);

/// E[r(Y) | y_t = y] by enumerating the other positions.
double exact_step_reward(const ProbTable& p, const RewardFn& reward, std::size_t t, TokenId y);
double exact_step_reward(const ProbTable& p, RewardCallCounter& reward, std::size_t t, TokenId y);

/// Monte-Carlo step reward: mean reward of n_samples completions sampled
/// from p with position t clamped to y.
double estimate_step_reward(const ProbTable& p, RewardCallCounter& reward, std::size_t t, TokenId y, int n_samples,
                            Rng& rng);
double estimate_step_reward(const ProbTable& p, const RewardFn& reward, std::size_t t, TokenId y, int n_samples,
                            Rng& rng);

EstimatorReport reinforce_base(const ProbTable& p, const RewardFn& reward, Rng& rng);
EstimatorReport reinforce_step(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng);
TopkPartition build_topk_partition(const ProbTable& p, int k);
EstimatorReport reinforce_topk(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng);
/// Requires a reference-based reward; throws ConfigError otherwise.
EstimatorReport traverse_ref(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng);

/// Dispatches on cfg.method.
EstimatorReport run_estimator(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng);

/// Reward calls one Monte-Carlo invocation makes, from the closed forms:
/// Base 1, Step nT, Topk n * sum_t (k + [residual_t non-empty]),
/// TraverseRef n (|V_ref| + [V_ref != V]) T.
std::uint64_t closed_form_reward_calls(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg);

struct MethodBenchResult {
  EstimatorConfig config;
  GradTable mean_grad;
  double total_variance = 0.0;           // sum of per-component sample variances
  std::optional<double> mse_vs_oracle;   // absent when V^T exceeds the bound
  std::uint64_t reward_calls = 0;        // per invocation
  double wall_time = 0.0;                // total seconds over all runs
};

std::vector<MethodBenchResult> estimator_variance_bench(const ProbTable& p, const RewardFn& reward,
                                                        const std::vector<EstimatorConfig>& cfgs, int runs, Rng& rng);

/// Fixed V=8, T=4 instance with rows peaked on the reference tokens.
struct BenchInstance {
  ProbTable p;
  Sentence reference;
};
BenchInstance canonical_bench_instance();

}  // namespace seqnat
