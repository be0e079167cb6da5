#include "seqnat/bon_loss.hpp"

#include <cmath>
#include <string>

#include "enumerate.hpp"

namespace seqnat {

SparseNgramCounts::SparseNgramCounts(int order) : order_(order) {
  if (order < 1) throw InvalidInput("n-gram order must be >= 1");
}

double SparseNgramCounts::get(const Ngram& g) const {
  auto it = entries_.find(g);
  return it == entries_.end() ? 0.0 : it->second;
}

void SparseNgramCounts::add(const Ngram& g, double count) {
  if (static_cast<int>(g.size()) != order_) throw InvalidInput("n-gram of wrong order");
  if (count == 0.0) return;
  entries_[g] += count;
}

double SparseNgramCounts::total() const {
  double sum = 0.0;
  for (const auto& [g, c] : entries_) sum += c;
  return sum;
}

SparseNgramCounts bon_count(SentenceView y, int n) {
  if (n < 1 || y.size() < static_cast<std::size_t>(n)) {
    throw InvalidInput("bon_count: sentence of length " + std::to_string(y.size()) + " has no " +
                       std::to_string(n) + "-grams");
  }
  SparseNgramCounts counts(n);
  for (std::size_t t = 0; t + n <= y.size(); ++t) counts.add(Ngram(y.begin() + t, y.begin() + t + n), 1.0);
  return counts;
}

double bon_theta_entry(const ProbTable& p, std::span<const TokenId> g) {
  const std::size_t n = g.size();
  if (n < 1 || p.length() < n) throw InvalidInput("bon_theta_entry: T < n");
  for (TokenId id : g) {
    if (id < 0 || static_cast<std::size_t>(id) >= p.vocab_size()) throw IndexOutOfRange("n-gram token outside V");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t + n <= p.length(); ++t) {
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) prod *= p(t + i, static_cast<std::size_t>(g[i]));
    sum += prod;
  }
  return sum;
}

SparseNgramCounts bon_theta_expected_oracle(const ProbTable& p, int n) {
  const std::size_t T = p.length(), V = p.vocab_size();
  if (n < 1 || T < static_cast<std::size_t>(n)) throw InvalidInput("bon_theta_expected_oracle: T < n");
  detail::checked_space(V, T);
  SparseNgramCounts out(n);
  Sentence y(T, 0);
  do {
    double prob = 1.0;
    for (std::size_t t = 0; t < T; ++t) prob *= p(t, static_cast<std::size_t>(y[t]));
    if (prob == 0.0) continue;
    const SparseNgramCounts counts = bon_count(y, n);
    for (const auto& [g, c] : counts.entries()) out.add(g, prob * c);
  } while (detail::next_sentence(y, V, T));
  return out;
}

BowVector bow_vector(const ProbTable& p) {
  BowVector b{std::vector<double>(p.vocab_size(), 0.0)};
  for (std::size_t t = 0; t < p.length(); ++t) {
    auto r = p.row(t);
    for (std::size_t j = 0; j < r.size(); ++j) b.w[j] += r[j];
  }
  return b;
}

namespace {

/// Chains dL/db (same for every position) through every row's softmax.
GradTable chain_bow_gradient(const ProbTable& p, const std::vector<double>& dl_db) {
  GradTable g(p.length(), p.vocab_size());
  for (std::size_t t = 0; t < p.length(); ++t) add_softmax_backward(p, t, dl_db, g);
  return g;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

BowLosses bow_losses(const ProbTable& p, SentenceView ref) {
  const std::size_t T = p.length(), V = p.vocab_size();
  if (ref.size() != T) throw InvalidInput("bow_losses: reference length differs from T");
  check_sentence(ref, V, "bow_losses reference");

  const BowVector bow = bow_vector(p);
  std::vector<double> c(V, 0.0);
  for (TokenId id : ref) c[static_cast<std::size_t>(id)] += 1.0;
  const double scale = 1.0 / (2.0 * static_cast<double>(T));

  BowLosses out;
  std::vector<double> d(V);

  double l1 = 0.0, l2sq = 0.0, dot = 0.0, bb = 0.0, cc = 0.0;
  for (std::size_t j = 0; j < V; ++j) {
    const double diff = bow.w[j] - c[j];
    l1 += std::abs(diff);
    l2sq += diff * diff;
    dot += bow.w[j] * c[j];
    bb += bow.w[j] * bow.w[j];
    cc += c[j] * c[j];
  }

  out.l1.value = l1 * scale;
  for (std::size_t j = 0; j < V; ++j) d[j] = sign(bow.w[j] - c[j]) * scale;
  out.l1.grad = chain_bow_gradient(p, d);

  const double l2 = std::sqrt(l2sq);
  out.l2.value = l2 * scale;
  for (std::size_t j = 0; j < V; ++j) d[j] = l2 > 0.0 ? (bow.w[j] - c[j]) / l2 * scale : 0.0;
  out.l2.grad = chain_bow_gradient(p, d);

  // sum(bow) = T > 0 and sum(c) = T > 0, so neither norm vanishes.
  const double nb = std::sqrt(bb), nc = std::sqrt(cc);
  if (!(nb > 0.0 && nc > 0.0)) throw InvalidInput("bow_losses: zero-norm bag of words");
  out.cos.value = 1.0 - dot / (nb * nc);
  for (std::size_t j = 0; j < V; ++j) d[j] = -(c[j] / (nb * nc) - dot * bow.w[j] / (nb * nb * nb * nc));
  out.cos.grad = chain_bow_gradient(p, d);
  return out;
}

MinBranch min_subgradient_policy(double a, double b) { return a <= b ? MinBranch::First : MinBranch::Second; }

BonLossReport bon_l1_loss(const ProbTable& p, SentenceView ref, int n) {
  const std::size_t T = p.length(), V = p.vocab_size();
  if (ref.size() != T) throw InvalidInput("bon_l1_loss: reference length differs from T");
  if (n < 1 || n > kMaxBonOrder) throw InvalidInput("bon_l1_loss: n must lie in [1, 4]");
  if (T < static_cast<std::size_t>(n)) throw InvalidInput("bon_l1_loss: T < n");
  check_sentence(ref, V, "bon_l1_loss reference");

  const SparseNgramCounts ref_counts = bon_count(ref, n);
  const double windows = static_cast<double>(T - n + 1);
  Table dmatch_dp(T, V);

  BonLossReport rep;
  for (const auto& [g, ref_count] : ref_counts.entries()) {
    const double theta = bon_theta_entry(p, g);
    if (min_subgradient_policy(theta, ref_count) == MinBranch::Second) {
      rep.match_total += ref_count;
      continue;
    }
    rep.match_total += theta;
    // d theta / d p_{t+i}(g_i) = prod_{l != i} p_{t+l}(g_l)
    for (std::size_t t = 0; t + n <= T; ++t) {
      for (int i = 0; i < n; ++i) {
        double prod = 1.0;
        for (int l = 0; l < n; ++l) {
          if (l != i) prod *= p(t + l, static_cast<std::size_t>(g[l]));
        }
        dmatch_dp(t + i, static_cast<std::size_t>(g[i])) += prod;
      }
    }
  }
  rep.loss = (windows - rep.match_total) / windows;

  rep.grad = GradTable(T, V);
  std::vector<double> dl_dp(V);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < V; ++j) dl_dp[j] = -dmatch_dp(t, j) / windows;
    add_softmax_backward(p, t, dl_dp, rep.grad);
  }
  return rep;
}

}  // namespace seqnat
