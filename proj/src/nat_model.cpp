#include "seqnat/nat_model.hpp"

#include <atomic>
#include <cmath>
#include <string>

namespace seqnat {

namespace {

std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace

std::string_view block_name(Block b) {
  switch (b) {
    case Block::SrcEmbed: return "src_embed";
    case Block::PosEmbedSrc: return "pos_embed_src";
    case Block::PosEmbedTgt: return "pos_embed_tgt";
    case Block::W1: return "w1";
    case Block::B1: return "b1";
    case Block::W2: return "w2";
    case Block::B2: return "b2";
  }
  return "?";
}

ParamTables::ParamTables(const ModelDims& dims) : dims_(dims) {
  if (dims.src_vocab < 1 || dims.tgt_vocab < 2 || dims.embed < 1 || dims.hidden < 1 || dims.max_len < 1) {
    throw InvalidInput("invalid model dimensions");
  }
  const std::size_t d = dims.embed, h = dims.hidden;
  blocks_[0] = Table(dims.src_vocab, d);
  blocks_[1] = Table(dims.max_len, d);
  blocks_[2] = Table(dims.max_len, d);
  blocks_[3] = Table(2 * d, h);
  blocks_[4] = Table(1, h);
  blocks_[5] = Table(h, dims.tgt_vocab);
  blocks_[6] = Table(1, dims.tgt_vocab);
}

std::size_t ParamTables::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.data().size();
  return n;
}

bool ParamTables::all_finite() const {
  for (const auto& b : blocks_) {
    if (!b.all_finite()) return false;
  }
  return true;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (!(dims_ == other.dims_)) throw InvalidInput("gradient shape mismatch");
  for (std::size_t i = 0; i < kNumBlocks; ++i) blocks_[i] += other.blocks_[i];
  return *this;
}

ParamGrads& ParamGrads::operator*=(double s) {
  for (auto& b : blocks_) b *= s;
  return *this;
}

ModelParams::ModelParams(const ModelDims& dims) : ParamTables(dims), generation_(next_generation()) {}

ModelParams ModelParams::initialize(const ModelDims& dims, Rng& rng) {
  ModelParams params(dims);
  for (Block b : {Block::SrcEmbed, Block::PosEmbedSrc, Block::PosEmbedTgt, Block::W1, Block::W2}) {
    for (double& v : params.mutable_block(b).data()) v = rng.uniform(-0.1, 0.1);
  }
  return params;
}

Table& ModelParams::mutable_block(Block b) {
  generation_ = next_generation();
  return blocks_[static_cast<std::size_t>(b)];
}

std::size_t uniform_copy_index(std::size_t t, std::size_t src_len, std::size_t tgt_len) {
  return t * src_len / tgt_len;
}

// ----------------------------------------------------------------- forward

std::pair<LogitTable, ForwardCache> forward(const ModelParams& params, SentenceView src, std::size_t length) {
  const ModelDims& dims = params.dims();
  if (src.empty()) throw InvalidInput("forward: empty source");
  if (length < 1) throw InvalidInput("forward: target length must be >= 1");
  if (src.size() > dims.max_len || length > dims.max_len) {
    throw InvalidInput("forward: length exceeds L_max=" + std::to_string(dims.max_len));
  }
  check_sentence(src, dims.src_vocab, "forward source");

  const std::size_t d = dims.embed, h = dims.hidden, V = dims.tgt_vocab;
  const Table& emb = params[Block::SrcEmbed];
  const Table& pos_src = params[Block::PosEmbedSrc];
  const Table& pos_tgt = params[Block::PosEmbedTgt];
  const Table& w1 = params[Block::W1];
  const Table& b1 = params[Block::B1];
  const Table& w2 = params[Block::W2];
  const Table& b2 = params[Block::B2];

  ForwardCache cache;
  cache.src.assign(src.begin(), src.end());
  cache.length = length;
  cache.generation = params.generation();
  cache.align.resize(length);
  cache.inputs = Table(length, 2 * d);
  cache.hidden = Table(length, h);

  std::vector<double> context(d, 0.0);
  for (TokenId s : src) {
    auto e = emb.row(static_cast<std::size_t>(s));
    for (std::size_t i = 0; i < d; ++i) context[i] += e[i];
  }
  for (double& v : context) v /= static_cast<double>(src.size());

  LogitTable logits(length, V);
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t j = uniform_copy_index(t, src.size(), length);
    cache.align[t] = j;
    auto x = cache.inputs.row(t);
    auto e = emb.row(static_cast<std::size_t>(src[j]));
    auto ps = pos_src.row(j);
    auto pt = pos_tgt.row(t);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = e[i] + ps[i] + pt[i];
      x[d + i] = context[i];
    }

    auto a = cache.hidden.row(t);
    for (std::size_t k = 0; k < h; ++k) a[k] = b1(0, k);
    for (std::size_t i = 0; i < 2 * d; ++i) {
      auto wr = w1.row(i);
      const double xi = x[i];
      for (std::size_t k = 0; k < h; ++k) a[k] += xi * wr[k];
    }
    for (double& v : a) v = std::tanh(v);

    auto z = logits.row(t);
    for (std::size_t v = 0; v < V; ++v) z[v] = b2(0, v);
    for (std::size_t k = 0; k < h; ++k) {
      auto wr = w2.row(k);
      const double ak = a[k];
      for (std::size_t v = 0; v < V; ++v) z[v] += ak * wr[v];
    }
  }
  cache.logits = logits;
  cache.probs = softmax_rows(logits);
  return {std::move(logits), std::move(cache)};
}

// ---------------------------------------------------------------- backward

void backward_into(const ModelParams& params, const ForwardCache& cache, const GradTable& dlogits, ParamGrads& out) {
  if (cache.generation != params.generation()) throw StaleCache("forward cache predates the current parameters");
  const ModelDims& dims = params.dims();
  if (!(out.dims() == dims)) throw InvalidInput("gradient accumulator has the wrong shape");
  const std::size_t d = dims.embed, h = dims.hidden, V = dims.tgt_vocab, T = cache.length;
  if (dlogits.rows() != T || dlogits.cols() != V) throw InvalidInput("dlogits shape mismatch");

  const Table& w1 = params[Block::W1];
  const Table& w2 = params[Block::W2];
  Table& g_emb = out[Block::SrcEmbed];
  Table& g_pos_src = out[Block::PosEmbedSrc];
  Table& g_pos_tgt = out[Block::PosEmbedTgt];
  Table& g_w1 = out[Block::W1];
  Table& g_b1 = out[Block::B1];
  Table& g_w2 = out[Block::W2];
  Table& g_b2 = out[Block::B2];

  std::vector<double> dh(h), dx(2 * d), dcontext(d, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    auto dz = dlogits.row(t);
    auto a = cache.hidden.row(t);
    auto x = cache.inputs.row(t);

    for (std::size_t v = 0; v < V; ++v) g_b2(0, v) += dz[v];
    for (std::size_t k = 0; k < h; ++k) {
      auto wr = w2.row(k);
      auto gr = g_w2.row(k);
      double da = 0.0;
      for (std::size_t v = 0; v < V; ++v) {
        gr[v] += a[k] * dz[v];
        da += wr[v] * dz[v];
      }
      dh[k] = da * (1.0 - a[k] * a[k]);
    }

    for (std::size_t k = 0; k < h; ++k) g_b1(0, k) += dh[k];
    for (std::size_t i = 0; i < 2 * d; ++i) {
      auto wr = w1.row(i);
      auto gr = g_w1.row(i);
      double acc = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        gr[k] += x[i] * dh[k];
        acc += wr[k] * dh[k];
      }
      dx[i] = acc;
    }

    const std::size_t j = cache.align[t];
    auto ge = g_emb.row(static_cast<std::size_t>(cache.src[j]));
    auto gps = g_pos_src.row(j);
    auto gpt = g_pos_tgt.row(t);
    for (std::size_t i = 0; i < d; ++i) {
      ge[i] += dx[i];
      gps[i] += dx[i];
      gpt[i] += dx[i];
      dcontext[i] += dx[d + i];
    }
  }

  const double inv = 1.0 / static_cast<double>(cache.src.size());
  for (TokenId s : cache.src) {
    auto ge = g_emb.row(static_cast<std::size_t>(s));
    for (std::size_t i = 0; i < d; ++i) ge[i] += dcontext[i] * inv;
  }
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const GradTable& dlogits) {
  ParamGrads grads(params.dims());
  backward_into(params, cache, dlogits, grads);
  return grads;
}

// ----------------------------------------------------------- cross entropy

CrossEntropy cross_entropy(const ProbTable& p, SentenceView ref) {
  if (ref.size() != p.length()) throw InvalidInput("cross_entropy: reference length differs from T");
  check_sentence(ref, p.vocab_size(), "cross_entropy reference");
  constexpr double kFloor = 1e-300;
  CrossEntropy ce;
  ce.dlogits = GradTable(p.length(), p.vocab_size());
  for (std::size_t t = 0; t < p.length(); ++t) {
    const auto y = static_cast<std::size_t>(ref[t]);
    double py = p(t, y);
    if (py < kFloor) {
      py = kFloor;
      ++ce.clamped;
    }
    ce.loss -= std::log(py);
    auto g = ce.dlogits.row(t);
    auto pr = p.row(t);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = pr[j];
    g[y] -= 1.0;
  }
  ce.loss_per_token = ce.loss / static_cast<double>(p.length());
  return ce;
}

}  // namespace seqnat
