#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

#include "seqnat/optimizer.hpp"
#include "seqnat/pipeline.hpp"

namespace seqnat {

// ----------------------------------------------------------------- schedule

std::string Objective::name() const {
  switch (kind) {
    case ObjectiveKind::CrossEntropy: return "ce";
    case ObjectiveKind::BoN: return "bon:" + std::to_string(bon_order);
    case ObjectiveKind::BoW:
      return std::string("bow:") + (bow_metric == BowMetric::L1 ? "l1" : bow_metric == BowMetric::L2 ? "l2" : "cos");
    case ObjectiveKind::RL: return "rl:" + std::string(to_string(rl.method));
  }
  return "?";
}

Objective parse_objective(std::string_view token, const EstimatorConfig& rl_defaults) {
  const auto colon = token.find(':');
  const std::string_view head = token.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view() : token.substr(colon + 1);
  Objective obj;
  if (head == "ce" && arg.empty()) {
    obj.kind = ObjectiveKind::CrossEntropy;
  } else if (head == "bon") {
    obj.kind = ObjectiveKind::BoN;
    if (!arg.empty()) {
      if (arg.size() != 1 || arg[0] < '1' || arg[0] > '4') {
        throw ConfigError("bad BoN order '" + std::string(arg) + "' (valid: 1..4)");
      }
      obj.bon_order = arg[0] - '0';
    }
  } else if (head == "bow") {
    obj.kind = ObjectiveKind::BoW;
    if (arg.empty() || arg == "l1") {
      obj.bow_metric = BowMetric::L1;
    } else if (arg == "l2") {
      obj.bow_metric = BowMetric::L2;
    } else if (arg == "cos") {
      obj.bow_metric = BowMetric::Cos;
    } else {
      throw ConfigError("unknown BoW metric '" + std::string(arg) + "' (valid: l1, l2, cos)");
    }
  } else if (head == "rl") {
    obj.kind = ObjectiveKind::RL;
    obj.rl = rl_defaults;
    obj.rl.method = arg.empty() ? EstimatorMethod::TraverseRef : parse_estimator_method(arg);
  } else {
    throw ConfigError("unknown objective '" + std::string(token) +
                      "' (valid: ce, bon:N, bow:l1|l2|cos, rl:base|step|topk|traverse_ref)");
  }
  return obj;
}

void StageSchedule::validate() const {
  if (stages.empty()) throw ConfigError("schedule needs at least one stage");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Stage& s = stages[i];
    if (s.steps <= 0) throw ConfigError("stage " + std::to_string(i) + " has no steps");
    if (s.batch_size <= 0) throw ConfigError("stage " + std::to_string(i) + " has batch_size <= 0");
    if (!(s.learning_rate > 0.0)) throw ConfigError("stage " + std::to_string(i) + " has learning_rate <= 0");
  }
}

std::uint64_t StageSchedule::total_steps() const {
  std::uint64_t n = 0;
  for (const Stage& s : stages) n += static_cast<std::uint64_t>(s.steps);
  return n;
}

StageSchedule parse_schedule(std::string_view strategy, const std::vector<int>& steps,
                             const std::vector<int>& batch_sizes, const std::vector<double>& learning_rates,
                             const EstimatorConfig& rl_defaults) {
  StageSchedule sched;
  std::size_t pos = 0;
  while (pos <= strategy.size()) {
    const auto comma = strategy.find(',', pos);
    std::string_view token = strategy.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (token.empty()) throw ConfigError("empty stage in strategy '" + std::string(strategy) + "'");
    sched.stages.push_back(Stage{parse_objective(token, rl_defaults)});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  const std::size_t n = sched.stages.size();
  auto pick = [n](const auto& list, std::size_t i, const char* what) {
    if (list.size() == 1) return list[0];
    if (list.size() != n) {
      throw ConfigError(std::string(what) + " lists " + std::to_string(list.size()) + " values for " +
                        std::to_string(n) + " stages");
    }
    return list[i];
  };
  for (std::size_t i = 0; i < n; ++i) {
    sched.stages[i].steps = pick(steps, i, "train.steps");
    sched.stages[i].batch_size = pick(batch_sizes, i, "train.batch_size");
    sched.stages[i].learning_rate = pick(learning_rates, i, "train.lr");
  }
  sched.validate();
  return sched;
}

void TrainingLog::write_csv(std::ostream& out) const {
  out << "step,stage,objective,loss,val_gleu,val_bleu,reward_calls_cum\n";
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    std::ostringstream s;
    s.precision(10);
    s << *v;
    return s.str();
  };
  for (const LogRow& r : rows) {
    std::ostringstream loss;
    loss.precision(10);
    loss << r.loss;
    out << r.step << ',' << r.stage << ',' << r.objective << ',' << loss.str() << ',' << opt(r.val_gleu) << ','
        << opt(r.val_bleu) << ',' << r.reward_calls_cum << '\n';
  }
}

// ----------------------------------------------------------------- training

namespace {

struct ItemResult {
  double loss = 0.0;
  std::uint64_t reward_calls = 0;
};

ItemResult process_item(const ModelParams& params, const Pair& pair, const Objective& obj, double scale, Rng rng,
                        ParamGrads& acc) {
  const std::size_t T = pair.ref.size();
  auto [logits, cache] = forward(params, pair.src, T);
  const ProbTable& p = cache.probs;
  ItemResult res;
  GradTable grad;
  switch (obj.kind) {
    case ObjectiveKind::CrossEntropy: {
      CrossEntropy ce = cross_entropy(p, pair.ref);
      res.loss = ce.loss_per_token;
      grad = std::move(ce.dlogits);
      grad *= 1.0 / static_cast<double>(T);
      break;
    }
    case ObjectiveKind::BoN: {
      // Sentences shorter than the order fall back to their full length.
      const int order = std::min<int>(obj.bon_order, static_cast<int>(T));
      BonLossReport rep = bon_l1_loss(p, pair.ref, order);
      res.loss = rep.loss;
      grad = std::move(rep.grad);
      break;
    }
    case ObjectiveKind::BoW: {
      BowLosses all = bow_losses(p, pair.ref);
      LossWithGrad& chosen = obj.bow_metric == BowMetric::L1 ? all.l1 : obj.bow_metric == BowMetric::L2 ? all.l2 : all.cos;
      res.loss = chosen.value;
      grad = std::move(chosen.grad);
      break;
    }
    case ObjectiveKind::RL: {
      const RewardFn reward = RewardFn::metric(obj.rl.reward, pair.ref);
      EstimatorReport rep = run_estimator(p, reward, obj.rl, rng);
      res.reward_calls = rep.reward_calls;
      // Logged, not counted: reward of the greedy output.
      res.loss = -reward(argmax_decode(p));
      grad = std::move(rep.grad);
      break;
    }
  }
  if (!std::isfinite(res.loss) || !grad.all_finite()) {
    throw Divergence("non-finite loss or gradient under objective " + obj.name());
  }
  grad *= scale;
  backward_into(params, cache, grad, acc);
  return res;
}

std::span<const Pair> eval_slice(const Corpus& corpus, std::size_t limit) {
  std::span<const Pair> valid(corpus.valid);
  return limit == 0 || limit >= valid.size() ? valid : valid.first(limit);
}

}  // namespace

ModelParams train(const Corpus& corpus, ModelParams params, const StageSchedule& schedule,
                  const TrainOptions& options, TrainingLog& log) {
  schedule.validate();
  if (corpus.train.empty()) throw InvalidInput("training split is empty");
  if (options.first_stage >= schedule.stages.size()) throw ConfigError("resume stage beyond the schedule");
  const ModelDims dims = params.dims();
  const std::size_t threads = static_cast<std::size_t>(std::max(1, options.threads));

  std::uint64_t global_step = 0;
  for (std::size_t s = 0; s < options.first_stage; ++s) global_step += schedule.stages[s].steps;
  std::uint64_t reward_calls = 0;

  for (std::size_t s = options.first_stage; s < schedule.stages.size(); ++s) {
    const Stage& stage = schedule.stages[s];
    const std::size_t batch = static_cast<std::size_t>(stage.batch_size);
    const Rng stage_root = Rng(options.seed).derive(0x57a6e000ULL + s);
    Rng batch_rng = stage_root.derive(0);
    Adam adam(dims);
    std::vector<std::size_t> indices(batch);
    std::vector<ItemResult> results(batch);
    const std::string objective = stage.objective.name();

    for (int step = 1; step <= stage.steps; ++step) {
      for (auto& i : indices) i = batch_rng.index(corpus.train.size());
      const double scale = 1.0 / static_cast<double>(batch);
      const std::uint64_t item_base = 1 + static_cast<std::uint64_t>(step - 1) * batch;

      ParamGrads grads(dims);
      if (threads == 1) {
        for (std::size_t b = 0; b < batch; ++b) {
          results[b] = process_item(params, corpus.train[indices[b]], stage.objective, scale,
                                    stage_root.derive(item_base + b), grads);
        }
      } else {
        // Contiguous chunks per worker, reduced in worker order.
        const std::size_t workers = std::min(threads, batch);
        std::vector<ParamGrads> partial(workers, ParamGrads(dims));
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back([&, w] {
            try {
              for (std::size_t b = w * batch / workers; b < (w + 1) * batch / workers; ++b) {
                results[b] = process_item(params, corpus.train[indices[b]], stage.objective, scale,
                                          stage_root.derive(item_base + b), partial[w]);
              }
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
        for (const auto& pg : partial) grads += pg;
      }

      double loss = 0.0;
      for (const auto& r : results) {
        loss += r.loss;
        reward_calls += r.reward_calls;
      }
      loss /= static_cast<double>(batch);
      if (!std::isfinite(loss) || !grads.all_finite()) throw Divergence("non-finite loss at step " + std::to_string(step));

      adam.step(params, grads, scheduled_learning_rate(static_cast<std::uint64_t>(step), stage.steps, stage.learning_rate));
      ++global_step;

      LogRow row{global_step, s, objective, loss, std::nullopt, std::nullopt, reward_calls};
      if ((options.eval_interval > 0 && step % options.eval_interval == 0) || step == stage.steps) {
        const EvalResult ev = evaluate(params, eval_slice(corpus, options.eval_pairs), {RewardKind::Gleu, RewardKind::Bleu});
        row.val_gleu = ev.metrics.at(RewardKind::Gleu);
        row.val_bleu = ev.metrics.at(RewardKind::Bleu);
      }
      log.rows.push_back(std::move(row));
    }
    if (options.on_stage_end) options.on_stage_end(s, params);
  }
  return params;
}

}  // namespace seqnat
