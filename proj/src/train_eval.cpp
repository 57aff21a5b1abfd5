/*
 * Copyright 2026 The VISION Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "vision/train_eval.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "vision/error.hpp"
#include "vision/random.hpp"

namespace vision {

using nd::ParamStore;
using nd::Value;

namespace {

// Stream ids for make_rng so that the separate random consumers of one seed
// never share a sequence.
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kValStream = 3;

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

}  // namespace

NetConfig apply_ablation(NetConfig cfg, const Ablation& a) {
  if (a.no_local) cfg.use_local = false;
  if (a.no_global) cfg.use_global = false;
  if (a.no_task_context) cfg.use_task_context = false;
  return cfg;
}

void TrainConfig::validate() const {
  if (loss.contrastive_weight < 0.0) throw ConfigError("contrastive weight must be >= 0");
  if (loss.label_smoothing < 0.0 || loss.label_smoothing >= 1.0) {
    throw ConfigError("label smoothing must be in [0, 1)");
  }
  if (loss.contrastive_temperature <= 0.0) throw ConfigError("contrastive temperature must be > 0");
  if (lr <= 0.0 || weight_decay < 0.0) throw ConfigError("bad lr or weight decay");
  if (tasks.n_way < 1 || tasks.k_shot < 1 || tasks.m_query < 1) {
    throw ConfigError("pseudo-tasks need n_way, k_shot, m_query >= 1");
  }
}

std::vector<std::size_t> predict(const Matrix& logits) {
  std::vector<std::size_t> out(logits.rows, 0);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    for (std::size_t j = 1; j < logits.cols; ++j) {
      if (logits(i, j) > logits(i, out[i])) out[i] = j;
    }
  }
  return out;
}

double evaluate_episodes(const GraphStore& g, const Matrix& source,
                         const std::vector<Episode>& episodes, const ParamStore& params,
                         const NetConfig& net, std::uint64_t seed) {
  if (episodes.empty()) throw ContractError("evaluate_episodes: no episodes");
  const std::uint64_t before = params.hash();
  std::vector<std::size_t> correct(episodes.size(), 0);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::ptrdiff_t>(episodes.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t e = 0; e < count; ++e) {
    try {
      nd::NoGradGuard no_grad;
      const auto& ep = episodes[static_cast<std::size_t>(e)];
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(e));
      ForwardResult fwd = forward_episode(ep, g, source, params, net, Mode::kEval, rng);
      const auto pred = predict(fwd.logits.data());
      std::size_t c = 0;
      for (std::size_t q = 0; q < pred.size(); ++q) c += pred[q] == ep.query_truth[q];
      correct[static_cast<std::size_t>(e)] = c;
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  if (params.hash() != before || params.any_grad()) {
    throw TrainingError("parameters changed during evaluation");
  }
  std::size_t total = 0, hits = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    total += episodes[e].query.size();
    hits += correct[e];
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

TrainResult train(const GraphStore& g, const AdaptiveFeatures& af, const ClassSplit* split,
                  ParamStore params, const NetConfig& net, const TrainConfig& cfg,
                  const ProgressFn& progress) {
  cfg.validate();
  net.validate();
  nd::AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  opt_cfg.horizon = std::max<std::size_t>(cfg.episodes_total, 1);
  nd::OptimizerState opt(opt_cfg);

  const bool validate = split != nullptr && !split->val_classes.empty() && cfg.eval_every > 0 &&
                        cfg.val_episodes > 0;
  std::vector<Episode> val_set;
  const Matrix& val_source = cfg.val_raw_features ? g.features() : af.x_task;
  if (validate) {
    Rng vr = make_rng(cfg.seed, kValStream);
    const ClassIndex index = build_class_index(g);
    for (std::size_t i = 0; i < cfg.val_episodes; ++i) {
      val_set.push_back(gen_eval_episode(index, *split, Phase::kVal, cfg.tasks.n_way,
                                         cfg.tasks.k_shot, cfg.val_m_query, vr));
    }
  }

  TrainResult result;
  auto run_validation = [&](std::size_t step) {
    const double acc = evaluate_episodes(g, val_source, val_set, params, net, cfg.seed ^ step);
    result.val.push_back({step, acc});
    if (acc > result.best_val) {
      result.best_val = acc;
      result.best_step = step;
      result.best = params.clone();
    }
    if (progress) progress("step " + std::to_string(step) + " val_acc " + fmt("%.4f", acc));
  };

  Rng rng = make_rng(cfg.seed, kTrainStream);
  for (std::size_t step = 1; step <= cfg.episodes_total; ++step) {
    Episode ep = gen_pseudo_task_retry(af, cfg.tasks, rng);
    const std::uint64_t sampling_seed = rng();
    EpisodeBatch batch = build_batch(ep, g, af.x_task, net, sampling_seed, Mode::kTrain, &rng);
    ForwardResult fwd = forward_batch(batch, params, net);
    LossParts loss = episode_loss(fwd, batch, ep.query_truth, cfg.loss);
    TrainLogEntry entry{step, nd::cosine_lr(opt_cfg, opt.step), loss.total.item(), loss.ce.item(),
                        loss.contrastive.item()};
    if (!std::isfinite(entry.loss_total)) {
      std::ofstream dump(cfg.dump_path);
      dump << episode_to_json(ep) << "\n";
      throw TrainingError("non-finite loss at step " + std::to_string(step) +
                          "; episode written to " + cfg.dump_path.string());
    }
    loss.total.backward();
    nd::adamw_step(params, opt);
    result.log.push_back(entry);
    if (progress && (step % 50 == 0 || step == 1)) {
      progress("step " + std::to_string(step) + " loss " + fmt("%.5f", entry.loss_total) +
               " ce " + fmt("%.5f", entry.loss_ce) + " con " + fmt("%.5f", entry.loss_contrastive));
    }
    if (validate && (step % cfg.eval_every == 0 || step == cfg.episodes_total)) {
      run_validation(step);
    }
  }
  if (!validate) {
    result.best = std::move(params);
    result.best_step = cfg.episodes_total;
  }
  return result;
}

void mean_std(const std::vector<double>& xs, double& mean, double& std) {
  mean = 0.0;
  std = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  for (double x : xs) std += (x - mean) * (x - mean);
  std = std::sqrt(std / static_cast<double>(xs.size()));
}

std::string EvalReport::summary() const {
  return fmt("%.2f", 100.0 * mean) + " ± " + fmt("%.2f", 100.0 * std);
}

EvalReport meta_test(const GraphStore& g, const AdaptiveFeatures* af, const ClassSplit& split,
                     const ParamStore& params, const NetConfig& net, const EvalConfig& cfg,
                     const std::string& dataset) {
  if (cfg.runs == 0 || cfg.episodes == 0) throw ConfigError("runs and episodes must be positive");
  if (!cfg.raw_features && af == nullptr) {
    throw ContractError("meta_test: adaptive features requested but not supplied");
  }
  const Matrix& source = cfg.raw_features ? g.features() : af->x_task;
  const ClassIndex index = build_class_index(g);
  EvalReport r;
  r.dataset = dataset;
  r.n_way = cfg.n_way;
  r.k_shot = cfg.k_shot;
  r.m_query = cfg.m_query;
  r.episodes = cfg.episodes;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    Rng rng = make_rng(cfg.seed, 100 + run);
    std::vector<Episode> eps;
    for (std::size_t e = 0; e < cfg.episodes; ++e) {
      eps.push_back(gen_eval_episode(index, split, cfg.phase, cfg.n_way, cfg.k_shot, cfg.m_query, rng));
    }
    r.run_accuracies.push_back(evaluate_episodes(g, source, eps, params, net, rng()));
  }
  mean_std(r.run_accuracies, r.mean, r.std);
  return r;
}

std::string report_to_json(const EvalReport& r, const KeyValues& config_echo) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["setting"] = std::to_string(r.n_way) + "-way " + std::to_string(r.k_shot) + "-shot";
  j["n_way"] = r.n_way;
  j["k_shot"] = r.k_shot;
  j["m_query"] = r.m_query;
  j["episodes_per_run"] = r.episodes;
  j["runs"] = r.run_accuracies.size();
  j["run_accuracies"] = r.run_accuracies;
  j["mean"] = r.mean;
  j["std"] = r.std;
  j["summary"] = r.summary();
  j["config"] = config_echo;
  return j.dump(2);
}

std::string report_table_row(const EvalReport& r) {
  return (r.dataset.empty() ? std::string("-") : r.dataset) + " | " + std::to_string(r.n_way) +
         "-way " + std::to_string(r.k_shot) + "-shot | " + r.summary();
}

}  // namespace vision
