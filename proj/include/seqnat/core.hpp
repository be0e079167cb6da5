#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqnat/error.hpp"

namespace seqnat {

using TokenId = std::int32_t;

/// A sentence is a sequence of token ids; the owning Vocabulary gives their
/// meaning. Length T >= 1 is checked by every operation that consumes one.
using Sentence = std::vector<TokenId>;
using SentenceView = std::span<const TokenId>;

/// Ids are packed 16 bits apiece into n-gram keys, which bounds V.
inline constexpr std::size_t kMaxVocabSize = 65535;

class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Synthetic vocabulary "<prefix>0" .. "<prefix>{size-1}".
  static Vocabulary synthetic(std::size_t size, const std::string& prefix = "w");

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenId id(const std::string& token) const;
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Dense row-major real matrix. Rows are positions t, columns are tokens.
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, double fill = 0.0);
  Table(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;

  Table& operator+=(const Table& other);
  Table& operator*=(double s);
  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Unconstrained per-position scores z (T x V).
class LogitTable : public Table {
 public:
  using Table::Table;
  explicit LogitTable(Table t) : Table(std::move(t)) {}
  std::size_t length() const { return rows(); }
  std::size_t vocab_size() const { return cols(); }
};

/// dL/dz over a LogitTable (T x V).
class GradTable : public Table {
 public:
  using Table::Table;
  explicit GradTable(Table t) : Table(std::move(t)) {}
  std::size_t length() const { return rows(); }
  std::size_t vocab_size() const { return cols(); }
};

/// Per-position categorical distributions p_t(.) (T x V). Read-only once
/// built; construction checks every row is a distribution.
class ProbTable {
 public:
  static constexpr double kRowTolerance = 1e-9;

  ProbTable() = default;
  explicit ProbTable(Table t);
  ProbTable(std::initializer_list<std::initializer_list<double>> rows) : ProbTable(Table(rows)) {}

  std::size_t length() const { return t_.rows(); }
  std::size_t vocab_size() const { return t_.cols(); }
  double operator()(std::size_t t, std::size_t y) const { return t_(t, y); }
  std::span<const double> row(std::size_t t) const { return t_.row(t); }
  const Table& table() const { return t_; }

 private:
  Table t_;
};

/// Counter-based generator: draw i of stream (seed, stream) is a pure
/// function of (seed, stream, i), so sequences are identical on every
/// platform. Distribution helpers are implemented here rather than taken from
/// <random>, whose distributions are implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  /// Inverse-CDF draw from an unnormalized-tolerant probability row.
  TokenId categorical(std::span<const double> probs);

  /// Independent child stream; used for per-item and per-stage seeds.
  Rng derive(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

ProbTable softmax_rows(const LogitTable& z);

/// d log p_t(y) / d z_t  =  e_y - p_t.
std::vector<double> dlogp_dz(const ProbTable& p, std::size_t t, TokenId y);
/// d p_t(y) / d z_t  =  p_t(y) (e_y - p_t).
std::vector<double> dp_dz(const ProbTable& p, std::size_t t, TokenId y);

/// grad.row(t) += scale * dlogp_dz(p, t, y), without allocating.
void add_dlogp_dz(const ProbTable& p, std::size_t t, TokenId y, double scale, GradTable& grad);
/// grad.row(t) += scale * dp_dz(p, t, y).
void add_dp_dz(const ProbTable& p, std::size_t t, TokenId y, double scale, GradTable& grad);

/// Chains a gradient with respect to probabilities through the row softmax:
/// grad.row(t)[j] += p_t(j) * (dl_dp[j] - <p_t, dl_dp>).
void add_softmax_backward(const ProbTable& p, std::size_t t, std::span<const double> dl_dp, GradTable& grad);

Sentence sample_sentence(const ProbTable& p, Rng& rng);
Sentence argmax_decode(const ProbTable& p);

/// Throws InvalidInput unless every id lies in [0, vocab_size) and the
/// sentence is non-empty.
void check_sentence(SentenceView s, std::size_t vocab_size, const char* what);

}  // namespace seqnat
