#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqnat/core.hpp"

namespace seqnat {

enum class RewardKind { Bleu, Gleu, Rouge2 };

/// 4 for BLEU and GLEU, 2 for ROUGE-2.
int max_ngram_order(RewardKind kind);
std::string_view to_string(RewardKind kind);
/// Accepts "bleu", "gleu", "rouge2" (also "rouge-2").
RewardKind parse_reward_kind(std::string_view name);

inline constexpr int kMaxRewardOrder = 4;

/// Sorted (packed n-gram, count) pairs for orders 1..4 of one sentence.
class NgramProfile {
 public:
  explicit NgramProfile(SentenceView s);

  std::size_t length() const { return length_; }
  /// Occurrences of the packed gram at the given order (1-based).
  std::uint32_t count(int order, std::uint64_t key) const;
  /// T - n + 1, or 0 when the sentence is shorter than n.
  std::size_t total(int order) const { return length_ >= static_cast<std::size_t>(order) ? length_ - order + 1 : 0; }

 private:
  std::size_t length_;
  std::array<std::vector<std::pair<std::uint64_t, std::uint32_t>>, kMaxRewardOrder> grams_;
};

/// Per-order clipped match counts of a hypothesis against a reference.
struct NgramMatches {
  std::array<double, kMaxRewardOrder> matched{};
  std::array<double, kMaxRewardOrder> hyp_total{};
  std::array<double, kMaxRewardOrder> ref_total{};
};

NgramMatches match_ngrams(SentenceView hyp, const NgramProfile& ref, int max_order);

/// Clipped bigram recall; clipped unigram recall when the reference has a
/// single token.
double rouge2(SentenceView hyp, SentenceView ref);
/// min(precision, recall) over n-gram counts pooled across orders
/// 1..min(4, |hyp|, |ref|).
double gleu(SentenceView hyp, SentenceView ref);
/// Geometric mean of modified 1..4-gram precisions times the brevity penalty.
/// An order >= 2 with zero matches uses (0 + 1) / (total + 1), so exact
/// matches still score 1.
double sentence_bleu(SentenceView hyp, SentenceView ref);

double rouge2(SentenceView hyp, const NgramProfile& ref);
double gleu(SentenceView hyp, const NgramProfile& ref);
double sentence_bleu(SentenceView hyp, const NgramProfile& ref);

/// Sentence-level reward r(Y) in [0,1] bound to one reference. Metric rewards
/// cache the reference n-gram profile; custom rewards wrap an arbitrary
/// callable and are used for counterexamples and constant-reward checks.
/// Immutable and shareable across threads.
class RewardFn {
 public:
  static RewardFn metric(RewardKind kind, Sentence reference);
  /// `reference_based` declares that the callable satisfies the
  /// out-of-reference substitution property; estimators that rely on it
  /// trust the declaration.
  static RewardFn custom(std::string name, std::function<double(SentenceView)> fn, Sentence reference = {},
                         bool reference_based = false);

  double operator()(SentenceView hyp) const;

  const std::string& name() const { return name_; }
  std::optional<RewardKind> kind() const { return kind_; }
  bool is_reference_based() const { return reference_based_; }
  const Sentence& reference() const { return reference_; }

 private:
  RewardFn() = default;

  std::string name_;
  std::optional<RewardKind> kind_;
  bool reference_based_ = false;
  Sentence reference_;
  std::shared_ptr<const NgramProfile> profile_;
  std::function<double(SentenceView)> custom_;
};

/// Counts reward evaluations made through it.
class RewardCallCounter {
 public:
  explicit RewardCallCounter(const RewardFn& fn) : fn_(&fn) {}

  double operator()(SentenceView hyp) {
    ++count_;
    return (*fn_)(hyp);
  }
  std::uint64_t count() const { return count_; }
  const RewardFn& reward() const { return *fn_; }

 private:
  const RewardFn* fn_;
  std::uint64_t count_ = 0;
};

/// Randomized check of the reference-based property: replacing
/// out-of-reference tokens of a hypothesis by other out-of-reference tokens
/// must leave the reward bit-identical. Requires at least two vocabulary
/// tokens absent from the reference.
bool is_reference_based_check(const RewardFn& reward, const Vocabulary& vocab, int trials, Rng& rng);
bool is_reference_based_check(RewardKind kind, const Sentence& ref, const Vocabulary& vocab, int trials, Rng& rng);

}  // namespace seqnat
