#include "seqnat/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace seqnat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = v.find(',', pos);
    out.push_back(trim(v.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("bad value '" + std::string(v) + "' for key '" + std::string(key) + "'");
  }
  return out;
}

template <class T>
std::vector<T> parse_number_list(std::string_view key, std::string_view v) {
  std::vector<T> out;
  for (auto item : split_list(v)) out.push_back(parse_number<T>(key, item));
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value, const std::filesystem::path&)>;

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view v) {
  std::filesystem::path p{std::string(v)};
  if (p.is_relative()) p = base / p;
  return std::filesystem::absolute(p).lexically_normal();
}

template <class T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v, const auto&) { c.*field = parse_number<T>(k, v); };
}

template <class T>
Setter task_number(T TaskSpec::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
    c.task.*field = parse_number<T>(k, v);
  };
}

Setter path(std::filesystem::path RunConfig::*field) {
  return [field](RunConfig& c, std::string_view, std::string_view v, const std::filesystem::path& base) {
    c.*field = resolve(base, v);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"output_dir", path(&RunConfig::output_dir)},
      {"seed", number(&RunConfig::seed)},
      {"threads", number(&RunConfig::threads)},

      {"task.kind", [](RunConfig& c, auto, std::string_view v, const auto&) { c.task.kind = parse_task_kind(v); }},
      {"task.src_vocab", task_number(&TaskSpec::src_vocab)},
      {"task.tgt_vocab", task_number(&TaskSpec::tgt_vocab)},
      {"task.min_len", task_number(&TaskSpec::min_len)},
      {"task.max_len", task_number(&TaskSpec::max_len)},
      {"task.pairs", task_number(&TaskSpec::pairs)},
      {"task.valid_fraction", task_number(&TaskSpec::valid_fraction)},
      {"task.test_fraction", task_number(&TaskSpec::test_fraction)},
      {"data.dir", path(&RunConfig::data_dir)},

      {"model.embed", number(&RunConfig::model_embed)},
      {"model.hidden", number(&RunConfig::model_hidden)},
      {"model.max_len", number(&RunConfig::model_max_len)},

      {"train.strategy", [](RunConfig& c, auto, std::string_view v, const auto&) { c.train_strategy = std::string(v); }},
      {"train.steps", [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
         c.train_steps = parse_number_list<int>(k, v);
       }},
      {"train.batch_size", [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
         c.train_batch_size = parse_number_list<int>(k, v);
       }},
      {"train.lr", [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
         c.train_lr = parse_number_list<double>(k, v);
       }},
      {"train.eval_interval", number(&RunConfig::train_eval_interval)},
      {"train.eval_pairs", number(&RunConfig::train_eval_pairs)},
      {"train.resume_from", path(&RunConfig::train_resume_from)},
      {"train.resume_stage", number(&RunConfig::train_resume_stage)},

      {"rl.reward", [](RunConfig& c, auto, std::string_view v, const auto&) { c.rl.reward = parse_reward_kind(v); }},
      {"rl.k", [](RunConfig& c, std::string_view k, std::string_view v, const auto&) { c.rl.k = parse_number<int>(k, v); }},
      {"rl.n_samples", [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
         c.rl.n_samples = parse_number<int>(k, v);
       }},

      {"eval.checkpoint", path(&RunConfig::eval_checkpoint)},
      {"eval.split", [](RunConfig& c, auto, std::string_view v, const auto&) { c.eval_split = std::string(v); }},
      {"eval.metrics", [](RunConfig& c, auto, std::string_view v, const auto&) {
         c.eval_metrics.clear();
         for (auto m : split_list(v)) c.eval_metrics.push_back(parse_reward_kind(m));
       }},

      {"bench.instance", [](RunConfig& c, auto, std::string_view v, const auto&) {
         if (v != "canonical" && v != "random") {
           throw ConfigError("bad bench.instance '" + std::string(v) + "' (valid: canonical, random)");
         }
         c.bench_instance = std::string(v);
       }},
      {"bench.vocab", number(&RunConfig::bench_vocab)},
      {"bench.length", number(&RunConfig::bench_length)},
      {"bench.runs", number(&RunConfig::bench_runs)},
      {"bench.methods", [](RunConfig& c, auto, std::string_view v, const auto&) {
         c.bench_methods.clear();
         for (auto m : split_list(v)) c.bench_methods.push_back(parse_estimator_method(m));
       }},
      {"bench.k", number(&RunConfig::bench_k)},
      {"bench.n_samples", number(&RunConfig::bench_n_samples)},
      {"bench.reward", [](RunConfig& c, auto, std::string_view v, const auto&) { c.bench_reward = parse_reward_kind(v); }},

      {"complexity.lengths", [](RunConfig& c, std::string_view k, std::string_view v, const auto&) {
         c.complexity_lengths = parse_number_list<std::size_t>(k, v);
       }},
      {"complexity.vocab", number(&RunConfig::complexity_vocab)},
      {"complexity.k", number(&RunConfig::complexity_k)},
      {"complexity.n_samples", number(&RunConfig::complexity_n_samples)},
      {"complexity.reward", [](RunConfig& c, auto, std::string_view v, const auto&) {
         c.complexity_reward = parse_reward_kind(v);
       }},

      {"correlate.checkpoint", path(&RunConfig::correlate_checkpoint)},
      {"correlate.split", [](RunConfig& c, auto, std::string_view v, const auto&) { c.correlate_split = std::string(v); }},
      {"correlate.order", number(&RunConfig::correlate_order)},
      {"correlate.max_sentences", number(&RunConfig::correlate_max_sentences)},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.text = std::string(text);
  cfg.output_dir = resolve(base_dir, "run");
  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string_view key = trim(l.substr(0, eq));
    const std::string_view value = trim(l.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) throw ConfigError("duplicate config key '" + std::string(key) + "'");
    if (value.empty()) throw ConfigError("empty value for config key '" + std::string(key) + "'");
    it->second(cfg, key, value, base_dir);
  }
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  cfg.rl.validate(cfg.task.tgt_vocab);
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto abs = std::filesystem::absolute(path);
  RunConfig cfg = parse(ss.str(), abs.parent_path());
  cfg.source = abs;
  return cfg;
}

std::filesystem::path RunConfig::command_dir(std::string_view command) const { return output_dir / std::string(command); }

std::filesystem::path RunConfig::effective_data_dir() const {
  return data_dir.empty() ? command_dir("gen-data") : data_dir;
}

std::filesystem::path RunConfig::effective_checkpoint(const std::filesystem::path& configured) const {
  if (!configured.empty()) return configured;
  const std::size_t n = schedule().stages.size();
  return command_dir("train") / ("stage_" + std::to_string(n - 1) + ".ckpt");
}

StageSchedule RunConfig::schedule() const {
  return parse_schedule(train_strategy, train_steps, train_batch_size, train_lr, rl);
}

}  // namespace seqnat
