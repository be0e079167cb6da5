#include "seqnat/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace seqnat {

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2) throw InvalidInput("vocabulary needs at least 2 tokens");
  if (tokens_.size() > kMaxVocabSize) throw InvalidInput("vocabulary larger than 65535 tokens");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw InvalidInput("duplicate token '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::synthetic(std::size_t size, const std::string& prefix) {
  std::vector<std::string> tokens;
  tokens.reserve(size);
  for (std::size_t i = 0; i < size; ++i) tokens.push_back(prefix + std::to_string(i));
  return Vocabulary(std::move(tokens));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) throw IndexOutOfRange("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw InvalidInput("unknown token '" + token + "'");
  return it->second;
}

// --------------------------------------------------------------------- Table

Table::Table(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Table::Table(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidInput("ragged table rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool Table::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Table& Table::operator+=(const Table& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw InvalidInput("table shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Table& Table::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

ProbTable::ProbTable(Table t) : t_(std::move(t)) {
  if (t_.rows() == 0 || t_.cols() < 2) throw InvalidInput("probability table needs T >= 1 and V >= 2");
  for (std::size_t r = 0; r < t_.rows(); ++r) {
    double sum = 0.0;
    for (double v : t_.row(r)) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("probability outside [0,1] in row " + std::to_string(r));
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      throw InvalidInput("probability row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }
}

// ----------------------------------------------------------------------- Rng

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed + kGolden) ^ mix64(stream * kGolden + 0x632be59bd9b4e019ULL)) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidInput("Rng::index with n = 0");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

TokenId Rng::categorical(std::span<const double> probs) {
  double total = 0.0;
  for (double v : probs) total += v;
  const double u = uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] <= 0.0) continue;
    last_positive = j;
    cum += probs[j];
    if (u < cum) return static_cast<TokenId>(j);
  }
  return static_cast<TokenId>(last_positive);
}

Rng Rng::derive(std::uint64_t stream) const { return Rng(mix64(seed_ ^ mix64(stream_ + 1)), stream); }

// ------------------------------------------------------------------ softmax

ProbTable softmax_rows(const LogitTable& z) {
  if (!z.all_finite()) throw InvalidInput("non-finite logits");
  Table p(z.rows(), z.cols());
  for (std::size_t t = 0; t < z.rows(); ++t) {
    auto in = z.row(t);
    auto out = p.row(t);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (double& v : out) v /= sum;
  }
  return ProbTable(std::move(p));
}

namespace {

void check_index(const ProbTable& p, std::size_t t, TokenId y) {
  if (t >= p.length()) throw IndexOutOfRange("position " + std::to_string(t) + " >= T");
  if (y < 0 || static_cast<std::size_t>(y) >= p.vocab_size()) {
    throw IndexOutOfRange("token " + std::to_string(y) + " outside [0,V)");
  }
}

}  // namespace

std::vector<double> dlogp_dz(const ProbTable& p, std::size_t t, TokenId y) {
  check_index(p, t, y);
  std::vector<double> out(p.row(t).begin(), p.row(t).end());
  for (double& v : out) v = -v;
  out[static_cast<std::size_t>(y)] += 1.0;
  return out;
}

std::vector<double> dp_dz(const ProbTable& p, std::size_t t, TokenId y) {
  check_index(p, t, y);
  const double py = p(t, static_cast<std::size_t>(y));
  std::vector<double> out(p.vocab_size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = -py * p(t, j);
  out[static_cast<std::size_t>(y)] += py;
  return out;
}

void add_dlogp_dz(const ProbTable& p, std::size_t t, TokenId y, double scale, GradTable& grad) {
  auto pr = p.row(t);
  auto g = grad.row(t);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] -= scale * pr[j];
  g[static_cast<std::size_t>(y)] += scale;
}

void add_dp_dz(const ProbTable& p, std::size_t t, TokenId y, double scale, GradTable& grad) {
  auto pr = p.row(t);
  auto g = grad.row(t);
  const double w = scale * pr[static_cast<std::size_t>(y)];
  for (std::size_t j = 0; j < g.size(); ++j) g[j] -= w * pr[j];
  g[static_cast<std::size_t>(y)] += w;
}

void add_softmax_backward(const ProbTable& p, std::size_t t, std::span<const double> dl_dp, GradTable& grad) {
  auto pr = p.row(t);
  double inner = 0.0;
  for (std::size_t j = 0; j < pr.size(); ++j) inner += pr[j] * dl_dp[j];
  auto g = grad.row(t);
  for (std::size_t j = 0; j < pr.size(); ++j) g[j] += pr[j] * (dl_dp[j] - inner);
}

// ---------------------------------------------------------------- decoding

Sentence sample_sentence(const ProbTable& p, Rng& rng) {
  Sentence y(p.length());
  for (std::size_t t = 0; t < p.length(); ++t) y[t] = rng.categorical(p.row(t));
  return y;
}

Sentence argmax_decode(const ProbTable& p) {
  Sentence y(p.length());
  for (std::size_t t = 0; t < p.length(); ++t) {
    auto r = p.row(t);
    // max_element returns the first maximum: ties go to the smallest id.
    y[t] = static_cast<TokenId>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return y;
}

void check_sentence(SentenceView s, std::size_t vocab_size, const char* what) {
  if (s.empty()) throw InvalidInput(std::string(what) + ": empty sentence");
  for (TokenId id : s) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw InvalidInput(std::string(what) + ": token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

}  // namespace seqnat
