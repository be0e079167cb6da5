#include "seqnat/rl_estimators.hpp"

#include "enumerate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace seqnat {

std::string_view to_string(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::Base: return "base";
    case EstimatorMethod::Step: return "step";
    case EstimatorMethod::Topk: return "topk";
    case EstimatorMethod::TraverseRef: return "traverse_ref";
  }
  return "?";
}

EstimatorMethod parse_estimator_method(std::string_view name) {
  if (name == "base") return EstimatorMethod::Base;
  if (name == "step") return EstimatorMethod::Step;
  if (name == "topk") return EstimatorMethod::Topk;
  if (name == "traverse_ref") return EstimatorMethod::TraverseRef;
  throw ConfigError("unknown estimator '" + std::string(name) + "' (valid: base, step, topk, traverse_ref)");
}

void EstimatorConfig::validate(std::size_t vocab_size) const {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (method == EstimatorMethod::Topk && (k < 1 || static_cast<std::size_t>(k) > vocab_size)) {
    throw ConfigError("topk size k=" + std::to_string(k) + " outside [1, V=" + std::to_string(vocab_size) + "]");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

using detail::checked_space;
using detail::next_sentence;

/// grad.row(t) -= sum_{y in S} dp_dz(y) r(y), evaluated as
/// p_j (r_j [j in S] - s) with s = sum_{y in S} p_y r_y in ascending id order.
/// Shared by Topk's traversed part and Traverse-Ref so that Topk with k = V
/// reproduces Traverse-Ref bit for bit.
void subtract_weighted_dp(const ProbTable& p, std::size_t t, std::span<const double> r,
                          std::span<const char> in_set, GradTable& grad) {
  auto pr = p.row(t);
  double s = 0.0;
  for (std::size_t y = 0; y < pr.size(); ++y) {
    if (in_set[y]) s += pr[y] * r[y];
  }
  auto g = grad.row(t);
  for (std::size_t j = 0; j < pr.size(); ++j) g[j] -= pr[j] * ((in_set[j] ? r[j] : 0.0) - s);
}

double step_reward(const ProbTable& p, RewardCallCounter& counter, const EstimatorConfig& cfg, std::size_t t,
                   TokenId y, Rng& rng) {
  if (cfg.step_reward == StepRewardMode::Exact) return exact_step_reward(p, counter, t, y);
  return estimate_step_reward(p, counter, t, y, cfg.n_samples, rng);
}

std::vector<TokenId> distinct_tokens(const Sentence& s) {
  std::vector<TokenId> out(s.begin(), s.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

// ------------------------------------------------------------------ oracles

GradTable exact_gradient_oracle(const ProbTable& p, const RewardFn& reward) {
  const std::size_t T = p.length(), V = p.vocab_size();
  checked_space(V, T);
  // grad_t = -sum_Y r(Y) P(Y) (e_{y_t} - p_t) = -(A_t - W p_t)
  Table weighted(T, V);
  double total = 0.0;
  Sentence y(T, 0);
  do {
    double prob = 1.0;
    for (std::size_t t = 0; t < T; ++t) prob *= p(t, static_cast<std::size_t>(y[t]));
    const double w = prob * reward(y);
    total += w;
    for (std::size_t t = 0; t < T; ++t) weighted(t, static_cast<std::size_t>(y[t])) += w;
  } while (next_sentence(y, V, T));

  GradTable grad(T, V);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < V; ++j) grad(t, j) = -(weighted(t, j) - total * p(t, j));
  }
  return grad;
}

double exact_step_reward(const ProbTable& p, RewardCallCounter& reward, std::size_t t, TokenId y) {
  const std::size_t T = p.length(), V = p.vocab_size();
  if (t >= T) throw IndexOutOfRange("step reward position out of range");
  if (y < 0 || static_cast<std::size_t>(y) >= V) throw IndexOutOfRange("step reward token out of range");
  checked_space(V, T - 1);
  Sentence sent(T, 0);
  sent[t] = y;
  double expectation = 0.0;
  do {
    double prob = 1.0;
    for (std::size_t i = 0; i < T; ++i) {
      if (i != t) prob *= p(i, static_cast<std::size_t>(sent[i]));
    }
    if (prob != 0.0) expectation += prob * reward(sent);
  } while (next_sentence(sent, V, t));
  return expectation;
}

double exact_step_reward(const ProbTable& p, const RewardFn& reward, std::size_t t, TokenId y) {
  RewardCallCounter counter(reward);
  return exact_step_reward(p, counter, t, y);
}

// --------------------------------------------------------------- estimators

double estimate_step_reward(const ProbTable& p, RewardCallCounter& reward, std::size_t t, TokenId y, int n_samples,
                            Rng& rng) {
  const std::size_t T = p.length();
  Sentence sent(T);
  double sum = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    for (std::size_t pos = 0; pos < T; ++pos) sent[pos] = pos == t ? y : rng.categorical(p.row(pos));
    sum += reward(sent);
  }
  return sum / n_samples;
}

double estimate_step_reward(const ProbTable& p, const RewardFn& reward, std::size_t t, TokenId y, int n_samples,
                            Rng& rng) {
  RewardCallCounter counter(reward);
  return estimate_step_reward(p, counter, t, y, n_samples, rng);
}

EstimatorReport reinforce_base(const ProbTable& p, const RewardFn& reward, Rng& rng) {
  const auto start = Clock::now();
  RewardCallCounter counter(reward);
  const Sentence y = sample_sentence(p, rng);
  const double r = counter(y);
  GradTable grad(p.length(), p.vocab_size());
  for (std::size_t t = 0; t < p.length(); ++t) add_dlogp_dz(p, t, y[t], -r, grad);
  return {std::move(grad), counter.count(), seconds_since(start)};
}

EstimatorReport reinforce_step(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng) {
  cfg.validate(p.vocab_size());
  const auto start = Clock::now();
  RewardCallCounter counter(reward);
  GradTable grad(p.length(), p.vocab_size());
  for (std::size_t t = 0; t < p.length(); ++t) {
    const TokenId y = rng.categorical(p.row(t));
    const double r = step_reward(p, counter, cfg, t, y, rng);
    add_dlogp_dz(p, t, y, -r, grad);
  }
  return {std::move(grad), counter.count(), seconds_since(start)};
}

TopkPartition build_topk_partition(const ProbTable& p, int k) {
  const std::size_t V = p.vocab_size();
  if (k < 1 || static_cast<std::size_t>(k) > V) throw InvalidInput("topk size outside [1, V]");
  TopkPartition part;
  part.positions.resize(p.length());
  std::vector<TokenId> order(V);
  for (std::size_t t = 0; t < p.length(); ++t) {
    auto pr = p.row(t);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](TokenId a, TokenId b) {
      return pr[a] != pr[b] ? pr[a] > pr[b] : a < b;
    });
    auto& pos = part.positions[t];
    pos.top.assign(order.begin(), order.begin() + k);
    std::vector<char> is_top(V, 0);
    for (TokenId y : pos.top) {
      is_top[y] = 1;
      pos.mass += pr[y];
    }
    for (std::size_t y = 0; y < V; ++y) {
      if (!is_top[y]) pos.residual_mass += pr[y];
    }
    pos.residual.assign(V, 0.0);
    pos.residual_empty = pos.residual_mass < TopkPartition::kResidualEpsilon;
    if (!pos.residual_empty) {
      for (std::size_t y = 0; y < V; ++y) {
        if (!is_top[y]) pos.residual[y] = pr[y] / pos.residual_mass;
      }
    }
  }
  return part;
}

EstimatorReport reinforce_topk(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng) {
  cfg.validate(p.vocab_size());
  const auto start = Clock::now();
  const std::size_t V = p.vocab_size();
  RewardCallCounter counter(reward);
  const TopkPartition part = build_topk_partition(p, cfg.k);
  GradTable grad(p.length(), V);
  std::vector<double> r(V, 0.0);
  std::vector<char> in_top(V, 0);
  for (std::size_t t = 0; t < p.length(); ++t) {
    const auto& pos = part.positions[t];
    std::fill(r.begin(), r.end(), 0.0);
    std::fill(in_top.begin(), in_top.end(), 0);
    for (TokenId y : pos.top) {
      r[y] = step_reward(p, counter, cfg, t, y, rng);
      in_top[y] = 1;
    }
    subtract_weighted_dp(p, t, r, in_top, grad);
    if (pos.residual_empty) continue;
    const TokenId y = rng.categorical(pos.residual);
    const double ry = step_reward(p, counter, cfg, t, y, rng);
    add_dlogp_dz(p, t, y, -pos.residual_mass * ry, grad);
  }
  return {std::move(grad), counter.count(), seconds_since(start)};
}

EstimatorReport traverse_ref(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng) {
  cfg.validate(p.vocab_size());
  if (!reward.is_reference_based()) {
    throw ConfigError("traverse_ref needs a reference-based reward (bleu, gleu, rouge2); got '" + reward.name() + "'");
  }
  const auto start = Clock::now();
  const std::size_t V = p.vocab_size();
  check_sentence(reward.reference(), V, "traverse_ref reference");
  RewardCallCounter counter(reward);

  const std::vector<TokenId> ref_tokens = distinct_tokens(reward.reference());
  std::vector<char> in_ref(V, 0);
  for (TokenId y : ref_tokens) in_ref[y] = 1;
  std::vector<TokenId> out_ref;
  for (std::size_t y = 0; y < V; ++y) {
    if (!in_ref[y]) out_ref.push_back(static_cast<TokenId>(y));
  }
  // One out-of-reference representative for the whole invocation.
  const std::optional<TokenId> w =
      out_ref.empty() ? std::nullopt : std::optional<TokenId>(out_ref[rng.index(out_ref.size())]);

  GradTable grad(p.length(), V);
  std::vector<double> r(V, 0.0);
  const std::vector<char> everything(V, 1);
  for (std::size_t t = 0; t < p.length(); ++t) {
    for (TokenId y : ref_tokens) r[y] = step_reward(p, counter, cfg, t, y, rng);
    if (w) {
      const double rw = step_reward(p, counter, cfg, t, *w, rng);
      for (TokenId y : out_ref) r[y] = rw;
    }
    subtract_weighted_dp(p, t, r, everything, grad);
  }
  return {std::move(grad), counter.count(), seconds_since(start)};
}

EstimatorReport run_estimator(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg, Rng& rng) {
  switch (cfg.method) {
    case EstimatorMethod::Base: return reinforce_base(p, reward, rng);
    case EstimatorMethod::Step: return reinforce_step(p, reward, cfg, rng);
    case EstimatorMethod::Topk: return reinforce_topk(p, reward, cfg, rng);
    case EstimatorMethod::TraverseRef: return traverse_ref(p, reward, cfg, rng);
  }
  throw ConfigError("unhandled estimator method");
}

std::uint64_t closed_form_reward_calls(const ProbTable& p, const RewardFn& reward, const EstimatorConfig& cfg) {
  const std::uint64_t n = static_cast<std::uint64_t>(cfg.n_samples);
  const std::uint64_t T = p.length();
  switch (cfg.method) {
    case EstimatorMethod::Base: return 1;
    case EstimatorMethod::Step: return n * T;
    case EstimatorMethod::Topk: {
      const TopkPartition part = build_topk_partition(p, cfg.k);
      std::uint64_t per_n = 0;
      for (const auto& pos : part.positions) per_n += static_cast<std::uint64_t>(cfg.k) + (pos.residual_empty ? 0 : 1);
      return n * per_n;
    }
    case EstimatorMethod::TraverseRef: {
      const std::uint64_t distinct = distinct_tokens(reward.reference()).size();
      return n * (distinct + (distinct < p.vocab_size() ? 1 : 0)) * T;
    }
  }
  return 0;
}

// -------------------------------------------------------------------- bench

std::vector<MethodBenchResult> estimator_variance_bench(const ProbTable& p, const RewardFn& reward,
                                                        const std::vector<EstimatorConfig>& cfgs, int runs,
                                                        Rng& rng) {
  if (runs < 2) throw InvalidInput("variance bench needs at least 2 runs");
  std::optional<GradTable> oracle;
  try {
    oracle = exact_gradient_oracle(p, reward);
  } catch (const BoundExceeded&) {
  }

  std::vector<MethodBenchResult> results;
  const std::size_t T = p.length(), V = p.vocab_size();
  for (const auto& cfg : cfgs) {
    Rng method_rng = rng.derive(static_cast<std::uint64_t>(cfg.method) * 1'000'003ULL + cfg.seed);
    // Welford accumulation per component.
    Table mean(T, V), m2(T, V);
    std::uint64_t calls = 0;
    const auto start = Clock::now();
    for (int run = 0; run < runs; ++run) {
      const EstimatorReport rep = run_estimator(p, reward, cfg, method_rng);
      calls += rep.reward_calls;
      const double count = run + 1;
      auto g = rep.grad.data();
      auto mu = mean.data();
      auto s2 = m2.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double delta = g[i] - mu[i];
        mu[i] += delta / count;
        s2[i] += delta * (g[i] - mu[i]);
      }
    }
    MethodBenchResult res;
    res.config = cfg;
    res.wall_time = seconds_since(start);
    res.reward_calls = calls / static_cast<std::uint64_t>(runs);
    for (double v : m2.data()) res.total_variance += v / (runs - 1);
    if (oracle) {
      double sq = 0.0;
      for (std::size_t i = 0; i < mean.data().size(); ++i) {
        const double d = mean.data()[i] - oracle->data()[i];
        sq += d * d;
      }
      res.mse_vs_oracle = sq / static_cast<double>(mean.data().size());
    }
    res.mean_grad = GradTable(std::move(mean));
    results.push_back(std::move(res));
  }
  return results;
}

BenchInstance canonical_bench_instance() {
  constexpr std::size_t kV = 8, kT = 4;
  const Sentence reference = {1, 3, 4, 6};
  Rng rng(20240601);
  LogitTable z(kT, kV);
  for (std::size_t t = 0; t < kT; ++t) {
    for (std::size_t j = 0; j < kV; ++j) z(t, j) = rng.uniform(-1.0, 1.0);
    z(t, static_cast<std::size_t>(reference[t])) += 2.5;
  }
  return {softmax_rows(z), reference};
}

}  // namespace seqnat
