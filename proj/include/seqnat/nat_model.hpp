#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "seqnat/core.hpp"

namespace seqnat {

struct ModelDims {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed = 32;    // d
  std::size_t hidden = 64;   // h
  std::size_t max_len = 64;  // L_max

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Parameter blocks in their declared (and serialized) order.
enum class Block : std::size_t { SrcEmbed, PosEmbedSrc, PosEmbedTgt, W1, B1, W2, B2 };
inline constexpr std::size_t kNumBlocks = 7;
std::string_view block_name(Block b);

/// Parameter-shaped tables: src_embed V_src x d, pos_embed_src L x d,
/// pos_embed_tgt L x d, W1 2d x h, b1 1 x h, W2 h x V_tgt, b2 1 x V_tgt.
class ParamTables {
 public:
  ParamTables() = default;
  explicit ParamTables(const ModelDims& dims);

  const ModelDims& dims() const { return dims_; }
  const Table& operator[](Block b) const { return blocks_[static_cast<std::size_t>(b)]; }
  const std::array<Table, kNumBlocks>& blocks() const { return blocks_; }
  std::size_t parameter_count() const;
  bool all_finite() const;

 protected:
  ModelDims dims_;
  std::array<Table, kNumBlocks> blocks_;
};

/// Gradient accumulator with the same shapes as ModelParams.
class ParamGrads : public ParamTables {
 public:
  using ParamTables::ParamTables;
  Table& operator[](Block b) { return blocks_[static_cast<std::size_t>(b)]; }
  using ParamTables::operator[];
  ParamGrads& operator+=(const ParamGrads& other);
  ParamGrads& operator*=(double s);
};

/// Weights of the feedforward NAT surrogate. Every mutable access bumps a
/// generation stamp so that stale forward caches are detected.
class ModelParams : public ParamTables {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelDims& dims);

  /// Uniform [-0.1, 0.1] weights and embeddings, zero biases.
  static ModelParams initialize(const ModelDims& dims, Rng& rng);

  Table& mutable_block(Block b);
  std::uint64_t generation() const { return generation_; }

 private:
  std::uint64_t generation_ = 0;
};

/// Activations of one forward pass.
struct ForwardCache {
  Sentence src;
  std::size_t length = 0;          // T
  std::vector<std::size_t> align;  // j(t) = floor(t |src| / T)
  Table inputs;                    // T x 2d: [copied + positions, mean context]
  Table hidden;                    // T x h, after tanh
  LogitTable logits;
  ProbTable probs;
  std::uint64_t generation = 0;
};

/// Source index copied to target position t.
std::size_t uniform_copy_index(std::size_t t, std::size_t src_len, std::size_t tgt_len);

/// Logits for T target positions. Input at t is
/// [src_embed[src[j]] + pos_embed_src[j] + pos_embed_tgt[t], mean_i src_embed[src[i]]]
/// followed by tanh(x W1 + b1) W2 + b2.
std::pair<LogitTable, ForwardCache> forward(const ModelParams& params, SentenceView src, std::size_t length);

/// Reverse-mode pass; linear in dlogits. Throws StaleCache when the params
/// changed since the cache was produced.
ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const GradTable& dlogits);
void backward_into(const ModelParams& params, const ForwardCache& cache, const GradTable& dlogits, ParamGrads& out);

struct CrossEntropy {
  double loss = 0.0;            // -sum_t log p_t(ref_t)
  double loss_per_token = 0.0;  // loss / T
  GradTable dlogits;            // p_t - onehot(ref_t)
  int clamped = 0;              // positions where p_t(ref_t) < 1e-300
};
CrossEntropy cross_entropy(const ProbTable& p, SentenceView ref);

// ---------------------------------------------------------------- checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);
/// FNV-1a over the serialized payload; equal hashes mean bit-identical params.
std::uint64_t params_hash(const ModelParams& params);

}  // namespace seqnat
