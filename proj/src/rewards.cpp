#include "seqnat/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace seqnat {

int max_ngram_order(RewardKind kind) { return kind == RewardKind::Rouge2 ? 2 : 4; }

std::string_view to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::Bleu: return "bleu";
    case RewardKind::Gleu: return "gleu";
    case RewardKind::Rouge2: return "rouge2";
  }
  return "?";
}

RewardKind parse_reward_kind(std::string_view name) {
  if (name == "bleu") return RewardKind::Bleu;
  if (name == "gleu") return RewardKind::Gleu;
  if (name == "rouge2" || name == "rouge-2") return RewardKind::Rouge2;
  throw ConfigError("unknown reward '" + std::string(name) + "' (valid: bleu, gleu, rouge2)");
}

namespace {

inline std::uint64_t pack(SentenceView s, std::size_t start, int order) {
  std::uint64_t key = 0;
  for (int i = 0; i < order; ++i) key = (key << 16) | static_cast<std::uint16_t>(s[start + i]);
  return key;
}

}  // namespace

NgramProfile::NgramProfile(SentenceView s) : length_(s.size()) {
  std::vector<std::uint64_t> keys;
  for (int n = 1; n <= kMaxRewardOrder; ++n) {
    keys.clear();
    for (std::size_t i = 0; i + n <= s.size(); ++i) keys.push_back(pack(s, i, n));
    std::sort(keys.begin(), keys.end());
    auto& out = grams_[n - 1];
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      out.emplace_back(keys[i], static_cast<std::uint32_t>(j - i));
      i = j;
    }
  }
}

std::uint32_t NgramProfile::count(int order, std::uint64_t key) const {
  const auto& g = grams_[order - 1];
  auto it = std::lower_bound(g.begin(), g.end(), key, [](const auto& e, std::uint64_t k) { return e.first < k; });
  return (it != g.end() && it->first == key) ? it->second : 0;
}

NgramMatches match_ngrams(SentenceView hyp, const NgramProfile& ref, int max_order) {
  thread_local std::vector<std::uint64_t> keys;
  NgramMatches m;
  for (int n = 1; n <= max_order; ++n) {
    keys.clear();
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) keys.push_back(pack(hyp, i, n));
    std::sort(keys.begin(), keys.end());
    double matched = 0.0;
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      matched += std::min<std::uint32_t>(static_cast<std::uint32_t>(j - i), ref.count(n, keys[i]));
      i = j;
    }
    m.matched[n - 1] = matched;
    m.hyp_total[n - 1] = static_cast<double>(keys.size());
    m.ref_total[n - 1] = static_cast<double>(ref.total(n));
  }
  return m;
}

double rouge2(SentenceView hyp, const NgramProfile& ref) {
  if (hyp.empty() || ref.length() == 0) throw InvalidInput("rouge2: empty sentence");
  const int order = ref.length() >= 2 ? 2 : 1;
  const NgramMatches m = match_ngrams(hyp, ref, order);
  return m.matched[order - 1] / m.ref_total[order - 1];
}

double gleu(SentenceView hyp, const NgramProfile& ref) {
  if (hyp.empty() || ref.length() == 0) throw InvalidInput("gleu: empty sentence");
  const int max_order = static_cast<int>(std::min<std::size_t>({4, hyp.size(), ref.length()}));
  const NgramMatches m = match_ngrams(hyp, ref, max_order);
  double matched = 0.0, hyp_total = 0.0, ref_total = 0.0;
  for (int n = 0; n < max_order; ++n) {
    matched += m.matched[n];
    hyp_total += m.hyp_total[n];
    ref_total += m.ref_total[n];
  }
  return std::min(matched / hyp_total, matched / ref_total);
}

double sentence_bleu(SentenceView hyp, const NgramProfile& ref) {
  if (hyp.empty() || ref.length() == 0) throw InvalidInput("sentence_bleu: empty sentence");
  const NgramMatches m = match_ngrams(hyp, ref, 4);
  if (m.matched[0] == 0.0) return 0.0;
  double log_precision = 0.0;
  for (int n = 0; n < 4; ++n) {
    const double precision =
        (n > 0 && m.matched[n] == 0.0) ? 1.0 / (m.hyp_total[n] + 1.0) : m.matched[n] / m.hyp_total[n];
    log_precision += std::log(precision);
  }
  const double ratio = static_cast<double>(ref.length()) / static_cast<double>(hyp.size());
  const double brevity = std::min(1.0, std::exp(1.0 - ratio));
  return std::min(1.0, brevity * std::exp(log_precision / 4.0));
}

double rouge2(SentenceView hyp, SentenceView ref) { return rouge2(hyp, NgramProfile(ref)); }
double gleu(SentenceView hyp, SentenceView ref) { return gleu(hyp, NgramProfile(ref)); }
double sentence_bleu(SentenceView hyp, SentenceView ref) { return sentence_bleu(hyp, NgramProfile(ref)); }

// ------------------------------------------------------------------ RewardFn

RewardFn RewardFn::metric(RewardKind kind, Sentence reference) {
  if (reference.empty()) throw InvalidInput("reward reference is empty");
  RewardFn r;
  r.name_ = std::string(to_string(kind));
  r.kind_ = kind;
  r.reference_based_ = true;
  r.profile_ = std::make_shared<const NgramProfile>(reference);
  r.reference_ = std::move(reference);
  return r;
}

RewardFn RewardFn::custom(std::string name, std::function<double(SentenceView)> fn, Sentence reference,
                          bool reference_based) {
  if (!fn) throw InvalidInput("custom reward without a callable");
  if (reference_based && reference.empty()) throw InvalidInput("reference-based reward needs a reference");
  RewardFn r;
  r.name_ = std::move(name);
  r.reference_based_ = reference_based;
  r.reference_ = std::move(reference);
  r.custom_ = std::move(fn);
  return r;
}

double RewardFn::operator()(SentenceView hyp) const {
  if (!kind_) return custom_(hyp);
  switch (*kind_) {
    case RewardKind::Bleu: return sentence_bleu(hyp, *profile_);
    case RewardKind::Gleu: return gleu(hyp, *profile_);
    case RewardKind::Rouge2: return rouge2(hyp, *profile_);
  }
  return 0.0;
}

// ------------------------------------------------------ reference-based check

bool is_reference_based_check(const RewardFn& reward, const Vocabulary& vocab, int trials, Rng& rng) {
  const Sentence& ref = reward.reference();
  if (ref.empty()) throw InvalidInput("reference-based check needs a reward bound to a reference");
  check_sentence(ref, vocab.size(), "reference");

  std::vector<TokenId> in_ref(ref.begin(), ref.end());
  std::sort(in_ref.begin(), in_ref.end());
  in_ref.erase(std::unique(in_ref.begin(), in_ref.end()), in_ref.end());
  std::vector<TokenId> out_ref;
  for (std::size_t v = 0; v < vocab.size(); ++v) {
    if (!std::binary_search(in_ref.begin(), in_ref.end(), static_cast<TokenId>(v))) {
      out_ref.push_back(static_cast<TokenId>(v));
    }
  }
  if (out_ref.size() < 2) throw InvalidInput("reference-based check needs >= 2 out-of-reference tokens");

  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t len = 1 + rng.index(ref.size() + 3);
    Sentence hyp(len);
    for (auto& tok : hyp) {
      tok = rng.uniform() < 0.5 ? in_ref[rng.index(in_ref.size())] : out_ref[rng.index(out_ref.size())];
    }
    Sentence swapped = hyp;
    for (auto& tok : swapped) {
      auto it = std::lower_bound(out_ref.begin(), out_ref.end(), tok);
      if (it == out_ref.end() || *it != tok) continue;
      // Uniform over the other out-of-reference tokens.
      const auto pos = static_cast<std::size_t>(it - out_ref.begin());
      std::size_t k = rng.index(out_ref.size() - 1);
      if (k >= pos) ++k;
      tok = out_ref[k];
    }
    if (reward(hyp) != reward(swapped)) return false;
  }
  return true;
}

bool is_reference_based_check(RewardKind kind, const Sentence& ref, const Vocabulary& vocab, int trials, Rng& rng) {
  return is_reference_based_check(RewardFn::metric(kind, ref), vocab, trials, rng);
}

}  // namespace seqnat
