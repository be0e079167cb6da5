#pragma once

#include <map>
#include <span>
#include <vector>

#include "seqnat/core.hpp"

namespace seqnat {

using Ngram = std::vector<TokenId>;

/// Real-valued counts keyed by n-gram. Keys iterate in lexicographic order of
/// token ids; zero counts are never stored.
class SparseNgramCounts {
 public:
  explicit SparseNgramCounts(int order);

  int order() const { return order_; }
  double get(const Ngram& g) const;
  void add(const Ngram& g, double count);
  std::size_t size() const { return entries_.size(); }
  double total() const;
  const std::map<Ngram, double>& entries() const { return entries_; }

 private:
  int order_;
  std::map<Ngram, double> entries_;
};

/// Highest n-gram order the BoN objective accepts.
inline constexpr int kMaxBonOrder = 4;

/// Occurrence counts of every n-gram in a sentence (sliding window).
SparseNgramCounts bon_count(SentenceView y, int n);

/// Expected count of `g` under the model: sum over window starts of the
/// product of per-position probabilities. Exact.
double bon_theta_entry(const ProbTable& p, std::span<const TokenId> g);

/// Expected bag-of-ngrams by enumerating every sentence in V^T. Test oracle;
/// refuses search spaces above 1e6.
SparseNgramCounts bon_theta_expected_oracle(const ProbTable& p, int n);

/// Expected token counts sum_t p_t(y).
struct BowVector {
  std::vector<double> w;
};
BowVector bow_vector(const ProbTable& p);

struct LossWithGrad {
  double value = 0.0;
  GradTable grad;
};

/// BoW distances to the reference unigram counts. L1 and L2 are divided by
/// 2T; Cos is 1 - cosine similarity.
struct BowLosses {
  LossWithGrad l1;
  LossWithGrad l2;
  LossWithGrad cos;
};
BowLosses bow_losses(const ProbTable& p, SentenceView ref);

enum class BowMetric { L1, L2, Cos };

struct BonLossReport {
  double loss = 0.0;         // (T - n + 1 - match_total) / (T - n + 1)
  double match_total = 0.0;  // sum_g min(BoN_theta(g), BoN_ref(g))
  GradTable grad;
};

/// Normalized BoN-L1 computed over reference n-grams only.
BonLossReport bon_l1_loss(const ProbTable& p, SentenceView ref, int n);

enum class MinBranch { First, Second };
/// Branch of min(a, b) the gradient flows through: the first argument when
/// a <= b.
MinBranch min_subgradient_policy(double a, double b);

}  // namespace seqnat
