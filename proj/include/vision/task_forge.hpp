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
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vision/adaptive_features.hpp"
#include "vision/graph_store.hpp"
#include "vision/random.hpp"

namespace vision {

using RelLabel = std::uint32_t;

/// One N-way K-shot task. Relative labels are local to the episode.
struct Episode {
  std::size_t n_way = 0;
  std::size_t k_shot = 0;
  std::size_t m_query = 0;
  std::vector<std::pair<NodeId, RelLabel>> support;
  std::vector<NodeId> query;
  /// Scoring only; never read by the network.
  std::vector<RelLabel> query_truth;

  /// Throws ContractError unless sizes, per-class counts, label range and
  /// node uniqueness all hold.
  void validate(std::size_t num_nodes) const;

  bool operator==(const Episode&) const = default;
};

struct TaskGenConfig {
  std::size_t pool_size = 4096;
  std::size_t n_way = 2;
  std::size_t k_shot = 5;
  std::size_t m_query = 5;
  /// Fresh anchors and pool are drawn this many times before giving up.
  std::size_t max_attempts = 10;
};

/// Sequential-exclusion selection for fixed anchors and pool: anchor j takes
/// the k_shot + m_query unclaimed pool nodes most cosine-similar to it in
/// `x_task` (ties by ascending id); the first k_shot are support.
/// Throws GenerationError when an anchor cannot fill its group.
Episode select_pseudo_task(const Matrix& x_task, std::span<const NodeId> anchors,
                           std::span<const NodeId> pool, std::size_t k_shot,
                           std::size_t m_query);

/// One attempt: N uniform anchors, one shared uniform pool from the
/// remaining nodes, then select_pseudo_task().
Episode gen_pseudo_task(const AdaptiveFeatures& af, const TaskGenConfig& cfg, Rng& rng);

/// gen_pseudo_task() retried up to cfg.max_attempts times.
Episode gen_pseudo_task_retry(const AdaptiveFeatures& af, const TaskGenConfig& cfg, Rng& rng);

/// Labeled node ids per class, ascending.
using ClassIndex = std::map<ClassId, std::vector<NodeId>>;
ClassIndex build_class_index(const GraphStore& g);

/// Labeled episode from the classes of one split phase. Throws ConfigError
/// when the phase has too few classes or a class too few labeled nodes.
Episode gen_eval_episode(const ClassIndex& index, const ClassSplit& split, Phase phase,
                         std::size_t n_way, std::size_t k_shot, std::size_t m_query, Rng& rng);
Episode gen_eval_episode(const GraphStore& g, const ClassSplit& split, Phase phase,
                         std::size_t n_way, std::size_t k_shot, std::size_t m_query, Rng& rng);

/// Probability that n anchors drawn from c equally likely classes are all
/// distinct: ∏_{i<n} (c - i) / c. Zero when n > c.
double anchor_distinct_probability(std::size_t c_total, std::size_t n);

struct DiversityStats {
  double mean_distinct = 0.0;
  std::size_t trials = 0;
  /// Unlabeled nodes left out of the draws.
  std::size_t excluded_unlabeled = 0;
};

/// Mean number of distinct true classes among n distinct labeled nodes drawn
/// uniformly, over `trials` draws.
DiversityStats anchor_diversity_monte_carlo(const GraphStore& g, std::size_t n,
                                            std::size_t trials, Rng& rng);

/// One JSON object per line.
std::string episode_to_json(const Episode& ep);
Episode episode_from_json(const std::string& line);

}  // namespace vision
