#include "doctest.h"
#include "oracles.hpp"
#include "seqnat/rewards.hpp"

#include <cmath>

using namespace seqnat;

TEST_CASE("metrics agree with brute-force n-gram counting") {
  Rng rng(101);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t V = 2 + rng.index(5);
    const Sentence hyp = oracle::random_sentence(1 + rng.index(9), V, rng);
    const Sentence ref = oracle::random_sentence(1 + rng.index(9), V, rng);
    CHECK(rouge2(hyp, ref) == doctest::Approx(oracle::rouge2(hyp, ref)).epsilon(1e-12));
    CHECK(gleu(hyp, ref) == doctest::Approx(oracle::gleu(hyp, ref)).epsilon(1e-12));
    CHECK(sentence_bleu(hyp, ref) == doctest::Approx(oracle::bleu(hyp, ref)).epsilon(1e-12));
  }
}

TEST_CASE("hand-computed metric values") {
  const Sentence ref = {0, 1, 2, 3};
  const Sentence hyp = {0, 1, 2, 4};
  // precisions 3/4, 2/3, 1/2, then the smoothed (0+1)/(1+1)
  CHECK(sentence_bleu(hyp, ref) == doctest::Approx(0.5946035575013605).epsilon(1e-12));
  CHECK(sentence_bleu(ref, ref) == 1.0);
  CHECK(sentence_bleu(Sentence{7, 8}, ref) == 0.0);
  // pooled: matches 3+2+1 over 4+3+2+1 grams on both sides
  CHECK(gleu(hyp, ref) == doctest::Approx(0.6));
  CHECK(rouge2(hyp, ref) == doctest::Approx(2.0 / 3.0));
  CHECK(rouge2(Sentence{5, 5}, Sentence{5}) == 1.0);
  CHECK(rouge2(Sentence{1, 1, 1}, Sentence{1, 1}) == 1.0);
  // brevity penalty for a short hypothesis
  CHECK(sentence_bleu(Sentence{0, 1}, ref) ==
        doctest::Approx(std::exp(1.0 - 2.0) * std::pow(1.0 * 1.0 * 1.0 * 1.0, 0.25)));
}

TEST_CASE("metrics reject empty sentences") {
  CHECK_THROWS_AS(rouge2(Sentence{}, Sentence{1}), InvalidInput);
  CHECK_THROWS_AS(gleu(Sentence{1}, Sentence{}), InvalidInput);
  CHECK_THROWS_AS(sentence_bleu(Sentence{}, Sentence{1}), InvalidInput);
  CHECK_THROWS_AS(RewardFn::metric(RewardKind::Bleu, {}), InvalidInput);
}

TEST_CASE("reward kind names") {
  CHECK(parse_reward_kind("gleu") == RewardKind::Gleu);
  CHECK(parse_reward_kind("rouge-2") == RewardKind::Rouge2);
  CHECK(to_string(RewardKind::Bleu) == "bleu");
  CHECK(max_ngram_order(RewardKind::Rouge2) == 2);
  try {
    parse_reward_kind("meteor");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("rouge2") != std::string::npos);
  }
}

TEST_CASE("metric rewards are reference-based") {
  Rng rng(5);
  const Vocabulary vocab = Vocabulary::synthetic(12);
  const Sentence ref = {0, 3, 3, 5, 1};
  for (RewardKind k : {RewardKind::Bleu, RewardKind::Gleu, RewardKind::Rouge2}) {
    CHECK(is_reference_based_check(k, ref, vocab, 300, rng));
  }
}

TEST_CASE("a reward that looks at out-of-reference ids fails the check") {
  Rng rng(6);
  const Vocabulary vocab = Vocabulary::synthetic(10);
  const Sentence ref = {0, 1};
  const RewardFn biased = RewardFn::custom(
      "count-9", [](SentenceView y) { return static_cast<double>(std::count(y.begin(), y.end(), 9)) / y.size(); },
      ref);
  CHECK_FALSE(is_reference_based_check(biased, vocab, 300, rng));
  CHECK_THROWS_AS(is_reference_based_check(RewardKind::Gleu, Sentence{0, 1}, Vocabulary::synthetic(3), 10, rng),
                  InvalidInput);
}

TEST_CASE("call counter counts") {
  const RewardFn r = RewardFn::metric(RewardKind::Rouge2, {1, 2, 3});
  RewardCallCounter c(r);
  CHECK(c(Sentence{1, 2, 3}) == 1.0);
  c(Sentence{3});
  CHECK(c.count() == 2);
}

TEST_CASE("profile counts") {
  const NgramProfile prof(Sentence{2, 2, 2});
  CHECK(prof.total(1) == 3);
  CHECK(prof.total(4) == 0);
  CHECK(prof.count(1, 2) == 3);
  CHECK(prof.count(1, 3) == 0);
}
