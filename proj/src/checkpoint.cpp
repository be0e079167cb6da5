#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "seqnat/nat_model.hpp"

// Layout (little-endian):
//   "SEQNATCK"  u32 version
//   payload:    u64 src_vocab tgt_vocab embed hidden max_len
//               per block in declared order: u64 rows, u64 cols, f64[rows*cols]
//   u64 FNV-1a of payload

namespace seqnat {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'N', 'A', 'T', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::string bytes;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  double f64() { return get<double>(); }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw FormatError("checkpoint truncated");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string payload(const ModelParams& params) {
  Writer w;
  const ModelDims& d = params.dims();
  for (std::uint64_t v : {d.src_vocab, d.tgt_vocab, d.embed, d.hidden, d.max_len}) w.u64(v);
  for (const Table& b : params.blocks()) {
    w.u64(b.rows());
    w.u64(b.cols());
    for (double v : b.data()) w.f64(v);
  }
  return std::move(w.bytes);
}

}  // namespace

std::uint64_t params_hash(const ModelParams& params) { return fnv1a(payload(params)); }

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  const std::string body = payload(params);
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  const std::uint32_t version = kCheckpointVersion;
  w.raw(&version, sizeof version);
  w.raw(body.data(), body.size());
  w.u64(fnv1a(body));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path.string());
  out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw FormatError("short write to checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof kMagic + 4 + 8 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a checkpoint file: " + path.string());
  }
  Reader r(std::string_view(data).substr(sizeof kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t body_start = sizeof kMagic + 4;
  const std::string_view body(data.data() + body_start, data.size() - body_start - 8);

  Reader br(body);
  ModelDims dims;
  dims.src_vocab = br.u64();
  dims.tgt_vocab = br.u64();
  dims.embed = br.u64();
  dims.hidden = br.u64();
  dims.max_len = br.u64();
  ModelParams params(dims);
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    Table& block = params.mutable_block(static_cast<Block>(i));
    const std::uint64_t rows = br.u64(), cols = br.u64();
    if (rows != block.rows() || cols != block.cols()) throw FormatError("checkpoint block shape mismatch");
    for (double& v : block.data()) v = br.f64();
  }
  if (!br.done()) throw FormatError("trailing bytes in checkpoint payload");

  Reader tail(std::string_view(data).substr(data.size() - 8));
  if (tail.u64() != fnv1a(body)) throw FormatError("checkpoint checksum mismatch");
  return params;
}

}  // namespace seqnat
