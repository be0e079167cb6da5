#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "seqnat/pipeline.hpp"

namespace seqnat {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Copy: return "copy";
    case TaskKind::Reverse: return "reverse";
    case TaskKind::Synonym: return "synonym";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "copy") return TaskKind::Copy;
  if (name == "reverse") return TaskKind::Reverse;
  if (name == "synonym") return TaskKind::Synonym;
  throw ConfigError("unknown task '" + std::string(name) + "' (valid: copy, reverse, synonym)");
}

void TaskSpec::validate() const {
  if (src_vocab < 2 || tgt_vocab < 2) throw ConfigError("task vocabularies need at least 2 tokens");
  if (src_vocab > kMaxVocabSize || tgt_vocab > kMaxVocabSize) throw ConfigError("task vocabulary too large");
  if (tgt_vocab < src_vocab) {
    throw ConfigError("inconsistent vocab sizes: tgt_vocab " + std::to_string(tgt_vocab) + " < src_vocab " +
                      std::to_string(src_vocab));
  }
  if (min_len < 1 || max_len < min_len) throw ConfigError("task length range must satisfy 1 <= min_len <= max_len");
  if (!(valid_fraction > 0.0 && test_fraction > 0.0 && valid_fraction + test_fraction < 1.0)) {
    throw ConfigError("split fractions must be positive and sum below 1");
  }
}

TokenId synonym_of(TokenId s, int mode, const TaskSpec& spec) {
  if (mode == 0) return s;
  return static_cast<TokenId>((static_cast<std::size_t>(s) + spec.src_vocab) % spec.tgt_vocab);
}

Corpus generate_corpus(const TaskSpec& spec) {
  spec.validate();
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(spec.pairs) * spec.valid_fraction));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(spec.pairs) * spec.test_fraction));
  if (n_valid == 0 || n_test == 0 || n_valid + n_test >= spec.pairs) {
    throw ConfigError("corpus of " + std::to_string(spec.pairs) + " pairs leaves an empty split");
  }

  Rng rng(spec.seed);
  std::vector<Pair> pairs(spec.pairs);
  for (Pair& pair : pairs) {
    const std::size_t len = spec.min_len + rng.index(spec.max_len - spec.min_len + 1);
    pair.src.resize(len);
    for (TokenId& tok : pair.src) tok = static_cast<TokenId>(rng.index(spec.src_vocab));
    switch (spec.kind) {
      case TaskKind::Copy: pair.ref = pair.src; break;
      case TaskKind::Reverse: pair.ref.assign(pair.src.rbegin(), pair.src.rend()); break;
      case TaskKind::Synonym: {
        const int mode = static_cast<int>(rng.index(2));
        pair.ref.resize(len);
        for (std::size_t i = 0; i < len; ++i) pair.ref[i] = synonym_of(pair.src[i], mode, spec);
        break;
      }
    }
  }

  Corpus corpus;
  corpus.spec = spec;
  const std::size_t n_train = spec.pairs - n_valid - n_test;
  corpus.train.assign(pairs.begin(), pairs.begin() + n_train);
  corpus.valid.assign(pairs.begin() + n_train, pairs.begin() + n_train + n_valid);
  corpus.test.assign(pairs.begin() + n_train + n_valid, pairs.end());
  return corpus;
}

// ---------------------------------------------------------------------- I/O

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_ids(std::ostream& out, const Sentence& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << ' ';
    out << s[i];
  }
}

Sentence parse_ids(std::string_view text, std::size_t vocab, const std::string& where) {
  Sentence s;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    long long v = 0;
    auto res = std::from_chars(text.data() + pos, text.data() + text.size(), v);
    if (res.ec != std::errc() || (res.ptr != text.data() + text.size() && *res.ptr != ' ')) {
      throw FormatError(where + ": malformed token id");
    }
    if (v < 0 || static_cast<std::size_t>(v) >= vocab) throw FormatError(where + ": token id out of vocabulary");
    s.push_back(static_cast<TokenId>(v));
    pos = static_cast<std::size_t>(res.ptr - text.data());
  }
  if (s.empty()) throw FormatError(where + ": empty sentence");
  return s;
}

void write_split(const std::filesystem::path& path, const std::vector<Pair>& pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const Pair& p : pairs) {
    write_ids(out, p.src);
    out << '\t';
    write_ids(out, p.ref);
    out << '\n';
  }
}

std::vector<Pair> read_split(const std::filesystem::path& path, const TaskSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::vector<Pair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(where + ": missing TAB separator");
    Pair p;
    p.src = parse_ids(std::string_view(line).substr(0, tab), spec.src_vocab, where);
    p.ref = parse_ids(std::string_view(line).substr(tab + 1), spec.tgt_vocab, where);
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw FormatError(path.string() + ": empty split");
  return pairs;
}

}  // namespace

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  write_split(dir / "train.tsv", corpus.train);
  write_split(dir / "valid.tsv", corpus.valid);
  write_split(dir / "test.tsv", corpus.test);
  std::ofstream out(dir / "corpus.header", std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write corpus header");
  const TaskSpec& s = corpus.spec;
  out << "format = seqnat-corpus-1\n"
      << "task = " << to_string(s.kind) << '\n'
      << "src_vocab = " << s.src_vocab << '\n'
      << "tgt_vocab = " << s.tgt_vocab << '\n'
      << "min_len = " << s.min_len << '\n'
      << "max_len = " << s.max_len << '\n'
      << "pairs = " << s.pairs << '\n'
      << "seed = " << s.seed << '\n'
      << "valid_fraction = " << format_double(s.valid_fraction) << '\n'
      << "test_fraction = " << format_double(s.test_fraction) << '\n'
      << "train = " << corpus.train.size() << '\n'
      << "valid = " << corpus.valid.size() << '\n'
      << "test = " << corpus.test.size() << '\n';
}

Corpus read_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "corpus.header");
  if (!in) throw FormatError("missing corpus header in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (kv["format"] != "seqnat-corpus-1") throw FormatError("unsupported corpus format '" + kv["format"] + "'");
  auto num = [&](const char* key) -> std::uint64_t {
    if (!kv.count(key)) throw FormatError(std::string("corpus header lacks '") + key + "'");
    return std::stoull(kv[key]);
  };
  Corpus c;
  c.spec.kind = parse_task_kind(kv["task"]);
  c.spec.src_vocab = num("src_vocab");
  c.spec.tgt_vocab = num("tgt_vocab");
  c.spec.min_len = num("min_len");
  c.spec.max_len = num("max_len");
  c.spec.pairs = num("pairs");
  c.spec.seed = num("seed");
  c.spec.valid_fraction = std::stod(kv["valid_fraction"]);
  c.spec.test_fraction = std::stod(kv["test_fraction"]);
  c.train = read_split(dir / "train.tsv", c.spec);
  c.valid = read_split(dir / "valid.tsv", c.spec);
  c.test = read_split(dir / "test.tsv", c.spec);
  return c;
}

}  // namespace seqnat
