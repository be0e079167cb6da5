#include "doctest.h"
#include "oracles.hpp"
#include "seqnat/core.hpp"

#include <cmath>
#include <set>

using namespace seqnat;

TEST_CASE("vocabulary lookups and validation") {
  Vocabulary v({"a", "b", "c"});
  CHECK(v.size() == 3);
  CHECK(v.id("b") == 1);
  CHECK(v.token(2) == "c");
  CHECK(v.contains(0));
  CHECK_FALSE(v.contains(3));
  CHECK_THROWS_AS(v.token(5), IndexOutOfRange);
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), InvalidInput);
  CHECK_THROWS_AS(Vocabulary({"a"}), InvalidInput);
  CHECK(Vocabulary::synthetic(4).token(3) == "w3");
}

TEST_CASE("prob table rejects malformed rows") {
  CHECK_NOTHROW(ProbTable{{0.5, 0.5}, {1.0, 0.0}});
  CHECK_THROWS_AS((ProbTable{{0.6, 0.5}}), InvalidInput);
  CHECK_THROWS_AS((ProbTable{{1.2, -0.2}}), InvalidInput);
  CHECK_THROWS_AS((ProbTable{{1.0}}), InvalidInput);
  CHECK_THROWS_AS((ProbTable(Table(0, 3))), InvalidInput);
}

TEST_CASE("softmax rows are distributions and shift invariant") {
  Rng rng(3);
  LogitTable z(4, 6);
  for (double& v : z.data()) v = rng.uniform(-5, 5);
  const ProbTable p = softmax_rows(z);
  LogitTable shifted = z;
  for (std::size_t t = 0; t < 4; ++t)
    for (double& v : shifted.row(t)) v += 100.0 * static_cast<double>(t + 1);
  const ProbTable q = softmax_rows(shifted);
  for (std::size_t t = 0; t < 4; ++t) {
    double s = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      s += p(t, j);
      CHECK(p(t, j) == doctest::Approx(q(t, j)).epsilon(1e-12));
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  LogitTable huge{{1e300, -1e300}};
  CHECK(softmax_rows(huge)(0, 0) == 1.0);
  LogitTable bad{{std::nan(""), 0.0}};
  CHECK_THROWS_AS(softmax_rows(bad), InvalidInput);
}

TEST_CASE("dlogp_dz and dp_dz match finite differences") {
  Rng rng(11);
  const std::size_t T = 2, V = 5;
  std::vector<double> x(T * V);
  for (double& v : x) v = rng.uniform(-1, 1);
  const ProbTable p = softmax_rows(oracle::to_logits(x, T, V));
  for (std::size_t t = 0; t < T; ++t) {
    for (TokenId y = 0; y < static_cast<TokenId>(V); ++y) {
      const auto g = dlogp_dz(p, t, y);
      const auto h = dp_dz(p, t, y);
      for (std::size_t j = 0; j < V; ++j) {
        auto logp = [&](const std::vector<double>& xs) {
          return std::log(softmax_rows(oracle::to_logits(xs, T, V))(t, y));
        };
        auto prob = [&](const std::vector<double>& xs) { return softmax_rows(oracle::to_logits(xs, T, V))(t, y); };
        CHECK(oracle::relative_error(g[j], oracle::central_difference(logp, x, t * V + j)) < 1e-6);
        CHECK(oracle::relative_error(h[j], oracle::central_difference(prob, x, t * V + j)) < 1e-6);
      }
    }
  }
  CHECK_THROWS_AS(dlogp_dz(p, 2, 0), IndexOutOfRange);
  CHECK_THROWS_AS(dp_dz(p, 0, 5), IndexOutOfRange);
}

TEST_CASE("softmax backward matches the chain rule through a linear functional") {
  Rng rng(5);
  const std::size_t T = 3, V = 4;
  std::vector<double> x(T * V), c(T * V);
  for (double& v : x) v = rng.uniform(-2, 2);
  for (double& v : c) v = rng.uniform(-1, 1);
  auto f = [&](const std::vector<double>& xs) {
    const ProbTable p = softmax_rows(oracle::to_logits(xs, T, V));
    double s = 0;
    for (std::size_t i = 0; i < T * V; ++i) s += c[i] * p.table().data()[i];
    return s;
  };
  const ProbTable p = softmax_rows(oracle::to_logits(x, T, V));
  GradTable g(T, V);
  for (std::size_t t = 0; t < T; ++t) add_softmax_backward(p, t, std::span<const double>(c).subspan(t * V, V), g);
  for (std::size_t i = 0; i < T * V; ++i) {
    CHECK(oracle::relative_error(g.data()[i], oracle::central_difference(f, x, i)) < 1e-6);
  }
}

TEST_CASE("rng is deterministic and derived streams differ") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(42).next_u64() != c.next_u64());
  CHECK(Rng(42).derive(1).next_u64() != Rng(42).derive(2).next_u64());
  CHECK(Rng(42).derive(1).next_u64() == Rng(42).derive(1).next_u64());

  Rng r(7);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    seen.insert(r.index(5));
  }
  CHECK(seen.size() == 5);
  CHECK_THROWS_AS(r.index(0), InvalidInput);
}

TEST_CASE("categorical frequencies follow the row") {
  Rng rng(9);
  const std::vector<double> row = {0.1, 0.6, 0.3};
  std::vector<int> hits(3, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(rng.categorical(row))];
  for (std::size_t j = 0; j < 3; ++j) {
    const double se = std::sqrt(row[j] * (1 - row[j]) / n);
    CHECK(std::abs(hits[j] / double(n) - row[j]) < 5 * se);
  }
  const std::vector<double> spike = {0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) CHECK(rng.categorical(spike) == 1);
}

TEST_CASE("argmax decoding breaks ties toward the smaller id") {
  ProbTable p{{0.4, 0.4, 0.2}, {0.1, 0.2, 0.7}};
  CHECK(argmax_decode(p) == Sentence{0, 2});
}

TEST_CASE("check_sentence validates ids and length") {
  CHECK_NOTHROW(check_sentence(Sentence{0, 3}, 4, "s"));
  CHECK_THROWS_AS(check_sentence(Sentence{}, 4, "s"), InvalidInput);
  CHECK_THROWS_AS(check_sentence(Sentence{4}, 4, "s"), InvalidInput);
  CHECK_THROWS_AS(check_sentence(Sentence{-1}, 4, "s"), InvalidInput);
}
