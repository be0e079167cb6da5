#include <cmath>
#include <string>

#include "seqnat/pipeline.hpp"

namespace seqnat {

EvalResult evaluate(const ModelParams& params, std::span<const Pair> split, const std::vector<RewardKind>& metrics) {
  if (split.empty()) throw InvalidInput("evaluate: empty split");
  EvalResult res;
  res.sentences = split.size();
  for (RewardKind k : metrics) res.metrics[k] = 0.0;
  std::size_t exact = 0;
  for (const Pair& pair : split) {
    const auto [logits, cache] = forward(params, pair.src, pair.src.size());
    const Sentence hyp = argmax_decode(cache.probs);
    if (hyp == pair.ref) ++exact;
    const NgramProfile ref(pair.ref);
    for (RewardKind k : metrics) {
      switch (k) {
        case RewardKind::Bleu: res.metrics[k] += sentence_bleu(hyp, ref); break;
        case RewardKind::Gleu: res.metrics[k] += gleu(hyp, ref); break;
        case RewardKind::Rouge2: res.metrics[k] += rouge2(hyp, ref); break;
      }
    }
  }
  const double n = static_cast<double>(split.size());
  for (auto& [k, v] : res.metrics) v /= n;
  res.exact_match = static_cast<double>(exact) / n;
  return res;
}

double pearson(std::span<const double> x, std::span<const double> y, std::string_view x_name,
               std::string_view y_name) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("pearson: need two equal columns of length >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidInput("pearson: column '" + std::string(x_name) + "' has zero variance");
  if (!(syy > 0.0)) throw InvalidInput("pearson: column '" + std::string(y_name) + "' has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

CorrelationResult correlate_losses(const ModelParams& params, std::span<const Pair> split, int n) {
  if (split.size() < 100) {
    throw InvalidInput("correlate_losses needs at least 100 sentences, got " + std::to_string(split.size()));
  }
  std::vector<double> neg_ce, neg_bon, quality;
  neg_ce.reserve(split.size());
  neg_bon.reserve(split.size());
  quality.reserve(split.size());
  for (const Pair& pair : split) {
    const auto [logits, cache] = forward(params, pair.src, pair.ref.size());
    neg_ce.push_back(-cross_entropy(cache.probs, pair.ref).loss_per_token);
    const int order = std::min<int>(n, static_cast<int>(pair.ref.size()));
    neg_bon.push_back(-bon_l1_loss(cache.probs, pair.ref, order).loss);
    quality.push_back(gleu(argmax_decode(cache.probs), pair.ref));
  }
  CorrelationResult res;
  res.sentences = split.size();
  res.pearson_ce = pearson(neg_ce, quality, "ce", "gleu");
  res.pearson_bon = pearson(neg_bon, quality, "bon", "gleu");
  return res;
}

}  // namespace seqnat
