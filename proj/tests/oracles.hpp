// Independent reference implementations used only by the tests. Nothing here
// calls into the n-gram or gradient code under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "seqnat/core.hpp"

namespace oracle {

using seqnat::Sentence;
using seqnat::TokenId;

inline std::map<std::vector<TokenId>, int> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<std::vector<TokenId>, int> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[std::vector<TokenId>(s.begin() + i, s.begin() + i + n)];
  return out;
}

inline int clipped_matches(const Sentence& hyp, const Sentence& ref, std::size_t n) {
  auto h = ngram_counts(hyp, n), r = ngram_counts(ref, n);
  int m = 0;
  for (const auto& [g, c] : h) {
    auto it = r.find(g);
    if (it != r.end()) m += std::min(c, it->second);
  }
  return m;
}

inline int grams(const Sentence& s, std::size_t n) { return s.size() >= n ? static_cast<int>(s.size() - n + 1) : 0; }

inline double rouge2(const Sentence& hyp, const Sentence& ref) {
  const std::size_t n = ref.size() == 1 ? 1 : 2;
  return static_cast<double>(clipped_matches(hyp, ref, n)) / grams(ref, n);
}

inline double gleu(const Sentence& hyp, const Sentence& ref) {
  const std::size_t top = std::min<std::size_t>({4, hyp.size(), ref.size()});
  double m = 0, h = 0, r = 0;
  for (std::size_t n = 1; n <= top; ++n) {
    m += clipped_matches(hyp, ref, n);
    h += grams(hyp, n);
    r += grams(ref, n);
  }
  return std::min(m / h, m / r);
}

inline double bleu(const Sentence& hyp, const Sentence& ref) {
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    double m = clipped_matches(hyp, ref, n);
    double t = grams(hyp, n);
    if (n == 1 && m == 0) return 0.0;
    if (m == 0) {
      m = 1;
      t += 1;
    }
    log_sum += std::log(m / t);
  }
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size())));
  return bp * std::exp(log_sum / 4.0);
}

/// Calls fn on every sentence of V^T in odometer order.
inline void for_each_sentence(std::size_t V, std::size_t T, const std::function<void(const Sentence&)>& fn) {
  Sentence y(T, 0);
  while (true) {
    fn(y);
    std::size_t t = T;
    while (t > 0) {
      --t;
      if (static_cast<std::size_t>(++y[t]) < V) break;
      y[t] = 0;
      if (t == 0) return;
    }
    if (T == 0) return;
  }
}

inline double sentence_prob(const seqnat::ProbTable& p, const Sentence& y) {
  double prob = 1.0;
  for (std::size_t t = 0; t < y.size(); ++t) prob *= p(t, static_cast<std::size_t>(y[t]));
  return prob;
}

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double h = 1e-6) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

/// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero components from
/// dominating through roundoff.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline seqnat::LogitTable to_logits(const std::vector<double>& x, std::size_t T, std::size_t V) {
  seqnat::LogitTable z(T, V);
  std::copy(x.begin(), x.end(), z.data().begin());
  return z;
}

inline seqnat::ProbTable random_probs(std::size_t T, std::size_t V, seqnat::Rng& rng, double scale = 2.0) {
  seqnat::LogitTable z(T, V);
  for (double& v : z.data()) v = rng.uniform(-scale, scale);
  return seqnat::softmax_rows(z);
}

inline Sentence random_sentence(std::size_t T, std::size_t V, seqnat::Rng& rng) {
  Sentence s(T);
  for (auto& tok : s) tok = static_cast<TokenId>(rng.index(V));
  return s;
}

}  // namespace oracle
