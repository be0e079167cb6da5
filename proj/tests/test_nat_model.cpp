#include "doctest.h"
#include "oracles.hpp"
#include "seqnat/nat_model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace seqnat;
namespace fs = std::filesystem;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.src_vocab = 4;
  d.tgt_vocab = 5;
  d.embed = 3;
  d.hidden = 4;
  d.max_len = 6;
  return d;
}

ModelParams random_params(const ModelDims& dims, Rng& rng) {
  ModelParams p(dims);
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    for (double& v : p.mutable_block(static_cast<Block>(b)).data()) v = rng.uniform(-0.8, 0.8);
  }
  return p;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("seqnat_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("uniform copy alignment") {
  CHECK(uniform_copy_index(0, 3, 6) == 0);
  CHECK(uniform_copy_index(5, 3, 6) == 2);
  CHECK(uniform_copy_index(2, 4, 4) == 2);
  CHECK(uniform_copy_index(1, 5, 2) == 2);
}

TEST_CASE("forward output shapes and validation") {
  Rng rng(3);
  const ModelParams params = ModelParams::initialize(small_dims(), rng);
  const auto [z, cache] = forward(params, Sentence{0, 3, 1}, 5);
  CHECK(z.length() == 5);
  CHECK(z.vocab_size() == 5);
  CHECK(cache.probs.length() == 5);
  CHECK(params[Block::B1].data()[0] == 0.0);
  CHECK_THROWS_AS(forward(params, Sentence{}, 2), InvalidInput);
  CHECK_THROWS_AS(forward(params, Sentence{4}, 2), InvalidInput);
  CHECK_THROWS_AS(forward(params, Sentence{0}, 7), InvalidInput);
}

TEST_CASE("cross entropy value and clamping") {
  const ProbTable p{{0.25, 0.75}, {1.0, 0.0}};
  const CrossEntropy ce = cross_entropy(p, Sentence{1, 0});
  CHECK(ce.loss == doctest::Approx(-std::log(0.75)));
  CHECK(ce.loss_per_token == doctest::Approx(-std::log(0.75) / 2));
  CHECK(ce.dlogits(0, 1) == doctest::Approx(-0.25));
  const CrossEntropy zero = cross_entropy(p, Sentence{0, 1});
  CHECK(zero.clamped == 1);
  CHECK(std::isfinite(zero.loss));
}

TEST_CASE("cross entropy gradient matches finite differences in logit space") {
  Rng rng(7);
  const std::size_t T = 3, V = 4;
  std::vector<double> x(T * V);
  for (double& v : x) v = rng.uniform(-2, 2);
  const Sentence ref = {1, 0, 3};
  const CrossEntropy ce = cross_entropy(softmax_rows(oracle::to_logits(x, T, V)), ref);
  auto f = [&](const std::vector<double>& xs) { return cross_entropy(softmax_rows(oracle::to_logits(xs, T, V)), ref).loss; };
  for (std::size_t i = 0; i < T * V; ++i) {
    CHECK(oracle::relative_error(ce.dlogits.data()[i], oracle::central_difference(f, x, i)) < 1e-6);
  }
}

TEST_CASE("parameter gradients match finite differences") {
  Rng rng(11);
  const ModelDims dims = small_dims();
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams params = random_params(dims, rng);
    const Sentence src = oracle::random_sentence(1 + rng.index(5), dims.src_vocab, rng);
    const std::size_t T = 1 + rng.index(dims.max_len);
    const Sentence ref = oracle::random_sentence(T, dims.tgt_vocab, rng);
    const auto [z, cache] = forward(params, src, T);
    const ParamGrads g = backward(params, cache, cross_entropy(cache.probs, ref).dlogits);
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
      const Block blk = static_cast<Block>(b);
      for (std::size_t i = 0; i < params[blk].data().size(); ++i) {
        const double h = 1e-6, x0 = params[blk].data()[i];
        params.mutable_block(blk).data()[i] = x0 + h;
        const double fp = cross_entropy(forward(params, src, T).second.probs, ref).loss;
        params.mutable_block(blk).data()[i] = x0 - h;
        const double fm = cross_entropy(forward(params, src, T).second.probs, ref).loss;
        params.mutable_block(blk).data()[i] = x0;
        const double numeric = (fp - fm) / (2 * h);
        INFO(block_name(blk) << "[" << i << "]");
        CHECK(oracle::relative_error(g[blk].data()[i], numeric) < 1e-4);
      }
    }
  }
}

TEST_CASE("stale caches are rejected") {
  Rng rng(13);
  ModelParams params = ModelParams::initialize(small_dims(), rng);
  const auto [z, cache] = forward(params, Sentence{1, 2}, 2);
  const GradTable dz(2, 5);
  CHECK_NOTHROW(backward(params, cache, dz));
  params.mutable_block(Block::W2)(0, 0) += 0.1;
  CHECK_THROWS_AS(backward(params, cache, dz), StaleCache);
}

TEST_CASE("checkpoint round trip and corruption detection") {
  Rng rng(17);
  const ModelParams params = random_params(small_dims(), rng);
  const fs::path dir = temp_dir("ckpt");
  const fs::path path = dir / "m.ckpt";
  save_checkpoint(path, params);
  const ModelParams back = load_checkpoint(path);
  CHECK(back.dims() == params.dims());
  CHECK(params_hash(back) == params_hash(params));
  for (std::size_t b = 0; b < kNumBlocks; ++b) CHECK(back.blocks()[b] == params.blocks()[b]);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& s) { std::ofstream(path, std::ios::binary | std::ios::trunc) << s; };

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  write(flipped);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  write(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write(bad_magic);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  std::string bad_version = bytes;
  bad_version[8] = 9;
  write(bad_version);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  write(bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("params hash changes with any weight") {
  Rng rng(19);
  ModelParams params = random_params(small_dims(), rng);
  const auto h = params_hash(params);
  params.mutable_block(Block::B2)(0, 4) += 1e-12;
  CHECK(params_hash(params) != h);
}
