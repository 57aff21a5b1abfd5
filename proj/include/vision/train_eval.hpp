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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vision/adaptive_features.hpp"
#include "vision/context_net.hpp"
#include "vision/graph_store.hpp"
#include "vision/losses.hpp"
#include "vision/ndmath/optim.hpp"
#include "vision/task_forge.hpp"

namespace vision {

struct Ablation {
  bool no_local = false;
  bool no_global = false;
  bool no_task_context = false;
};

/// Turns the network paths named by `a` off.
NetConfig apply_ablation(NetConfig cfg, const Ablation& a);

struct TrainConfig {
  std::size_t episodes_total = 5000;
  double lr = 2e-4;
  double weight_decay = 1e-4;
  LossWeights loss;
  TaskGenConfig tasks;
  std::size_t eval_every = 200;
  std::size_t val_episodes = 100;
  std::size_t val_m_query = 10;
  /// Validation belongs to meta-training and reads adaptive features unless
  /// this is set.
  bool val_raw_features = false;
  std::uint64_t seed = 0;
  /// Where the offending episode is written when the loss turns non-finite.
  std::filesystem::path dump_path = "nonfinite_episode.jsonl";

  void validate() const;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_contrastive = 0.0;
};

struct ValRecord {
  std::size_t step = 0;
  double accuracy = 0.0;
};

struct TrainResult {
  /// Parameters with the best validation accuracy, or the final ones when no
  /// validation ran.
  nd::ParamStore best;
  std::size_t best_step = 0;
  double best_val = -1.0;
  std::vector<TrainLogEntry> log;
  std::vector<ValRecord> val;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Unsupervised meta-training on pseudo-tasks. `split` supplies labeled
/// validation classes for checkpoint selection; pass nullptr to skip it.
/// Throws TrainingError on a non-finite loss.
TrainResult train(const GraphStore& g, const AdaptiveFeatures& af, const ClassSplit* split,
                  nd::ParamStore params, const NetConfig& net, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

struct EvalConfig {
  std::size_t n_way = 2;
  std::size_t k_shot = 5;
  std::size_t m_query = 10;
  std::size_t runs = 5;
  std::size_t episodes = 100;
  Phase phase = Phase::kTest;
  bool raw_features = true;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::string dataset;
  std::size_t n_way = 0;
  std::size_t k_shot = 0;
  std::size_t m_query = 0;
  std::size_t episodes = 0;
  std::vector<double> run_accuracies;
  double mean = 0.0;
  /// Population standard deviation over run accuracies.
  double std = 0.0;

  /// "86.02 ± 1.63" in percent.
  std::string summary() const;
};

/// Index of the largest entry per row; ties go to the lower index.
std::vector<std::size_t> predict(const Matrix& logits);

/// Accuracy of `params` on labeled episodes from `phase`. Runs without
/// gradients and fails with TrainingError if the parameters change.
double evaluate_episodes(const GraphStore& g, const Matrix& source,
                         const std::vector<Episode>& episodes, const nd::ParamStore& params,
                         const NetConfig& net, std::uint64_t seed);

/// Fine-tuning-free evaluation: runs × episodes labeled episodes, one forward
/// pass each, parallel over episodes. `af` may be null when raw_features.
EvalReport meta_test(const GraphStore& g, const AdaptiveFeatures* af, const ClassSplit& split,
                     const nd::ParamStore& params, const NetConfig& net, const EvalConfig& cfg,
                     const std::string& dataset = "");

void mean_std(const std::vector<double>& xs, double& mean, double& std);

/// JSON record: config echo, per-run accuracies, mean, std, summary line.
std::string report_to_json(const EvalReport& r, const KeyValues& config_echo);
/// "dataset | N-way K-shot | mean ± std" row.
std::string report_table_row(const EvalReport& r);

}  // namespace vision
