#include "seqnat/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace seqnat {

namespace {

namespace fs = std::filesystem;

struct Effective {
  std::uint64_t seed;
  int threads;
};

Effective effective(const RunConfig& cfg, const CommandOptions& opts) {
  Effective e{opts.seed.value_or(cfg.seed), opts.threads.value_or(cfg.threads)};
  if (e.threads < 1) throw ConfigError("threads must be >= 1");
  return e;
}

/// Creates the command directory, refusing to clobber earlier outputs
/// unless forced, and writes config.txt and manifest.json.
fs::path prepare_run_dir(const RunConfig& cfg, const CommandOptions& opts, std::string_view command,
                         const std::vector<std::string>& outputs) {
  const fs::path dir = cfg.command_dir(command);
  std::vector<std::string> all = {"config.txt", "manifest.json"};
  all.insert(all.end(), outputs.begin(), outputs.end());
  if (!opts.force) {
    for (const auto& name : all) {
      if (fs::exists(dir / name)) {
        throw ConfigError("refusing to overwrite " + (dir / name).string() + " (pass --force)");
      }
    }
  }
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.txt", std::ios::binary | std::ios::trunc);
    out << cfg.text;
  }
  const Effective e = effective(cfg, opts);
  nlohmann::ordered_json manifest = {
      {"tool", "seqnat"},
      {"version", std::string(kVersion)},
      {"command", std::string(command)},
      {"seed", e.seed},
      {"threads", e.threads},
      {"config_source", cfg.source.string()},
      {"outputs", outputs},
  };
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  return dir;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

const std::vector<Pair>& pick_split(const Corpus& c, const std::string& name) {
  if (name == "train") return c.train;
  if (name == "valid") return c.valid;
  if (name == "test") return c.test;
  throw ConfigError("unknown split '" + name + "' (valid: train, valid, test)");
}

/// Rows peaked on a random reference, for bench instances beyond the
/// canonical one.
BenchInstance random_bench_instance(std::size_t vocab, std::size_t length, Rng& rng) {
  if (vocab < 2 || length < 1) throw ConfigError("bench instance needs vocab >= 2 and length >= 1");
  Sentence ref(length);
  for (auto& tok : ref) tok = static_cast<TokenId>(rng.index(vocab));
  LogitTable z(length, vocab);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t j = 0; j < vocab; ++j) z(t, j) = rng.uniform(-1.0, 1.0);
    z(t, static_cast<std::size_t>(ref[t])) += 2.5;
  }
  return {softmax_rows(z), ref};
}

EstimatorConfig method_config(EstimatorMethod m, int k, int n, RewardKind reward, std::uint64_t seed) {
  EstimatorConfig c;
  c.method = m;
  c.k = k;
  c.n_samples = n;
  c.reward = reward;
  c.seed = seed;
  return c;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, const CommandOptions& opts) {
  TaskSpec spec = cfg.task;
  spec.seed = effective(cfg, opts).seed;
  const Corpus corpus = generate_corpus(spec);
  const fs::path dir = prepare_run_dir(cfg, opts, "gen-data", {std::begin(kCorpusFiles), std::end(kCorpusFiles)});
  write_corpus(dir, corpus);
}

void cmd_train(const RunConfig& cfg, const CommandOptions& opts) {
  const Effective e = effective(cfg, opts);
  const StageSchedule schedule = cfg.schedule();
  const Corpus corpus = read_corpus(cfg.effective_data_dir());

  ModelDims dims;
  dims.src_vocab = corpus.spec.src_vocab;
  dims.tgt_vocab = corpus.spec.tgt_vocab;
  dims.embed = cfg.model_embed;
  dims.hidden = cfg.model_hidden;
  dims.max_len = cfg.model_max_len;
  if (dims.max_len < corpus.spec.max_len) throw ConfigError("model.max_len is below the corpus max length");
  for (const Stage& s : schedule.stages) {
    if (s.objective.kind == ObjectiveKind::RL) s.objective.rl.validate(dims.tgt_vocab);
  }

  TrainOptions to;
  to.seed = e.seed;
  to.threads = e.threads;
  to.eval_interval = cfg.train_eval_interval;
  to.eval_pairs = cfg.train_eval_pairs;
  ModelParams params;
  if (!cfg.train_resume_from.empty()) {
    params = load_checkpoint(cfg.train_resume_from);
    if (!(params.dims() == dims)) throw ConfigError("resume checkpoint dimensions differ from the config");
    to.first_stage = cfg.train_resume_stage;
    if (to.first_stage >= schedule.stages.size()) throw ConfigError("train.resume_stage beyond the schedule");
  } else {
    Rng init(e.seed, 0x1a17);
    params = ModelParams::initialize(dims, init);
  }

  std::vector<std::string> outputs = {"training_log.csv"};
  for (std::size_t s = to.first_stage; s < schedule.stages.size(); ++s) {
    outputs.push_back("stage_" + std::to_string(s) + ".ckpt");
  }
  const fs::path dir = prepare_run_dir(cfg, opts, "train", outputs);
  to.on_stage_end = [&dir](std::size_t stage, const ModelParams& p) {
    save_checkpoint(dir / ("stage_" + std::to_string(stage) + ".ckpt"), p);
  };
  TrainingLog log;
  train(corpus, std::move(params), schedule, to, log);
  std::ofstream out(dir / "training_log.csv", std::ios::binary | std::ios::trunc);
  log.write_csv(out);
}

void cmd_eval(const RunConfig& cfg, const CommandOptions& opts) {
  const Corpus corpus = read_corpus(cfg.effective_data_dir());
  const fs::path ckpt = cfg.effective_checkpoint(cfg.eval_checkpoint);
  const ModelParams params = load_checkpoint(ckpt);
  const EvalResult res = evaluate(params, pick_split(corpus, cfg.eval_split), cfg.eval_metrics);
  const fs::path dir = prepare_run_dir(cfg, opts, "eval", {"eval.json"});
  nlohmann::ordered_json j = {
      {"checkpoint", ckpt.string()},
      {"split", cfg.eval_split},
      {"sentences", res.sentences},
      {"exact_match", res.exact_match},
  };
  for (const auto& [k, v] : res.metrics) j["metrics"][std::string(to_string(k))] = v;
  std::ofstream(dir / "eval.json", std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
}

void cmd_estimator_bench(const RunConfig& cfg, const CommandOptions& opts) {
  const Effective e = effective(cfg, opts);
  Rng rng(e.seed, 0xbe7c);
  const BenchInstance inst = cfg.bench_instance == "canonical"
                                 ? canonical_bench_instance()
                                 : random_bench_instance(cfg.bench_vocab, cfg.bench_length, rng);
  const RewardFn reward = RewardFn::metric(cfg.bench_reward, inst.reference);
  std::vector<EstimatorConfig> cfgs;
  for (EstimatorMethod m : cfg.bench_methods) {
    cfgs.push_back(method_config(m, cfg.bench_k, cfg.bench_n_samples, cfg.bench_reward, e.seed));
  }
  const auto results = estimator_variance_bench(inst.p, reward, cfgs, cfg.bench_runs, rng);

  const fs::path dir = prepare_run_dir(cfg, opts, "estimator-bench", {"estimator_bench.csv"});
  std::ofstream out(dir / "estimator_bench.csv", std::ios::binary | std::ios::trunc);
  out << "method,k,n_samples,runs,total_variance,mse_vs_oracle,reward_calls,wall_time_s,ordering_violation\n";
  // Expected ordering Base >= Step >= Topk >= TraverseRef in total variance;
  // a row is flagged when its variance exceeds that of a method earlier in
  // that order.
  for (const auto& r : results) {
    bool violation = false;
    for (const auto& other : results) {
      if (other.config.method < r.config.method && r.total_variance > other.total_variance) violation = true;
    }
    out << to_string(r.config.method) << ',' << r.config.k << ',' << r.config.n_samples << ',' << cfg.bench_runs
        << ',' << fmt(r.total_variance) << ',' << (r.mse_vs_oracle ? fmt(*r.mse_vs_oracle) : "unavailable") << ','
        << r.reward_calls << ',' << fmt(r.wall_time) << ',' << (violation ? 1 : 0) << '\n';
  }
}

void cmd_complexity_bench(const RunConfig& cfg, const CommandOptions& opts) {
  const Effective e = effective(cfg, opts);
  Rng rng(e.seed, 0xc0de);
  std::ostringstream csv;
  csv << "method,T,V,n_samples,k,distinct_ref,reward_calls,closed_form,match\n";
  for (std::size_t T : cfg.complexity_lengths) {
    const BenchInstance inst = random_bench_instance(cfg.complexity_vocab, T, rng);
    const RewardFn reward = RewardFn::metric(cfg.complexity_reward, inst.reference);
    Sentence distinct = inst.reference;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (EstimatorMethod m : {EstimatorMethod::Base, EstimatorMethod::Step, EstimatorMethod::Topk,
                              EstimatorMethod::TraverseRef}) {
      const EstimatorConfig ec =
          method_config(m, cfg.complexity_k, cfg.complexity_n_samples, cfg.complexity_reward, e.seed);
      const EstimatorReport rep = run_estimator(inst.p, reward, ec, rng);
      const std::uint64_t closed = closed_form_reward_calls(inst.p, reward, ec);
      csv << to_string(m) << ',' << T << ',' << cfg.complexity_vocab << ',' << ec.n_samples << ',' << ec.k << ','
          << distinct.size() << ',' << rep.reward_calls << ',' << closed << ',' << (rep.reward_calls == closed ? 1 : 0)
          << '\n';
    }
  }
  const fs::path dir = prepare_run_dir(cfg, opts, "complexity-bench", {"complexity.csv"});
  std::ofstream(dir / "complexity.csv", std::ios::binary | std::ios::trunc) << csv.str();
}

void cmd_correlate(const RunConfig& cfg, const CommandOptions& opts) {
  const Corpus corpus = read_corpus(cfg.effective_data_dir());
  const ModelParams params = load_checkpoint(cfg.effective_checkpoint(cfg.correlate_checkpoint));
  std::span<const Pair> split(pick_split(corpus, cfg.correlate_split));
  if (cfg.correlate_max_sentences > 0 && split.size() > cfg.correlate_max_sentences) {
    split = split.first(cfg.correlate_max_sentences);
  }
  const CorrelationResult res = correlate_losses(params, split, cfg.correlate_order);
  const fs::path dir = prepare_run_dir(cfg, opts, "correlate", {"correlate.json"});
  nlohmann::ordered_json j = {
      {"pearson_ce", res.pearson_ce},
      {"pearson_bon", res.pearson_bon},
      {"n_sentences", res.sentences},
  };
  std::ofstream(dir / "correlate.json", std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
}

void run_command(std::string_view name, const RunConfig& cfg, const CommandOptions& opts) {
  if (name == "gen-data") return cmd_gen_data(cfg, opts);
  if (name == "train") return cmd_train(cfg, opts);
  if (name == "eval") return cmd_eval(cfg, opts);
  if (name == "estimator-bench") return cmd_estimator_bench(cfg, opts);
  if (name == "complexity-bench") return cmd_complexity_bench(cfg, opts);
  if (name == "correlate") return cmd_correlate(cfg, opts);
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

std::string describe_error(const std::exception& e) {
  std::string kind = "internal";
  if (dynamic_cast<const ConfigError*>(&e)) kind = "config";
  else if (dynamic_cast<const InvalidInput*>(&e)) kind = "invalid-input";
  else if (dynamic_cast<const IndexOutOfRange*>(&e)) kind = "index-out-of-range";
  else if (dynamic_cast<const BoundExceeded*>(&e)) kind = "bound-exceeded";
  else if (dynamic_cast<const FormatError*>(&e)) kind = "format";
  else if (dynamic_cast<const Divergence*>(&e)) kind = "divergence";
  else if (dynamic_cast<const StaleCache*>(&e)) kind = "stale-cache";
  else if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) kind = "io";
  std::string msg = e.what();
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  return "error: " + kind + ": " + msg;
}

}  // namespace seqnat
