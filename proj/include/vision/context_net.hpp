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
#include <limits>
#include <string>
#include <vector>

#include "vision/config.hpp"
#include "vision/graph_store.hpp"
#include "vision/ndmath/param_store.hpp"
#include "vision/random.hpp"
#include "vision/task_forge.hpp"

namespace vision {

struct NetConfig {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 256;
  std::size_t attn_heads = 4;
  std::size_t num_layers = 2;
  std::size_t ffn_dim = 512;
  std::size_t readout_heads = 3;
  std::size_t readout_dim = 64;
  std::size_t k_neigh = 30;
  /// Size of the role-embedding table.
  std::size_t max_n_way = 10;
  double tau_init = 10.0;
  double tau_min = 0.01;
  double tau_max = 100.0;
  double init_std = 0.02;
  /// Gaussian noise added to task and neighbor features in training mode.
  double noise_std = 0.02;
  bool use_local = true;
  bool use_global = true;
  bool use_task_context = true;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
  KeyValues to_kv() const;
  static NetConfig from_kv(const KeyValues& kv);
  std::uint64_t hash() const;
};

enum class Mode { kTrain, kEval };

inline constexpr std::uint32_t kMaskRole = std::numeric_limits<std::uint32_t>::max();

/// Everything the network reads for one episode. Task rows are the support
/// nodes followed by the query nodes.
struct EpisodeBatch {
  std::size_t n_way = 0;
  std::size_t num_support = 0;
  std::size_t num_query = 0;
  /// Task-centered features, one row per task node.
  Matrix task_features;
  /// Relative label for support rows, kMaskRole for query rows.
  std::vector<std::uint32_t> roles;
  /// Task-centered features of sampled neighbors, concatenated.
  Matrix neighbor_features;
  /// Per task node, rows of neighbor_features. Empty for an isolated node.
  std::vector<std::vector<std::size_t>> neighbors;

  std::size_t num_tasks() const { return num_support + num_query; }
  std::vector<std::size_t> support_rows() const;
  std::vector<std::size_t> query_rows() const;
  /// Support rows grouped by relative label.
  std::vector<std::vector<std::size_t>> class_groups() const;
};

/// Subtracts the mean of `task` rows from both matrices.
void task_normalize(Matrix& task, Matrix& neighbors);

/// Up to k_neigh neighbors of v, uniformly without replacement when the
/// degree exceeds k_neigh. Depends only on (seed, v).
std::vector<NodeId> sample_neighbors(const GraphStore& g, NodeId v, std::size_t k_neigh,
                                     std::uint64_t seed);

/// Gathers features from `source` (node-aligned with g), samples neighbors
/// with `sampling_seed`, adds noise from `noise_rng` in training mode and
/// centers everything by the task mean.
EpisodeBatch build_batch(const Episode& ep, const GraphStore& g, const Matrix& source,
                         const NetConfig& cfg, std::uint64_t sampling_seed, Mode mode,
                         Rng* noise_rng);

nd::ParamStore init_params(const NetConfig& cfg, Rng& rng);

struct Tokens {
  nd::Value task;       ///< num_tasks × d
  nd::Value neighbors;  ///< num_neighbors × d (0 rows allowed)
};

/// Projects features, adds role embeddings and applies the embedding norm.
/// Neighbor tokens carry no role.
Tokens init_tokens(const EpisodeBatch& batch, const nd::ParamStore& p, const NetConfig& cfg);

struct LayerTrace {
  nd::Value z_struct;  ///< empty when the local path is disabled
  nd::Value z_task;    ///< empty when the global path is disabled
  nd::Value gate;      ///< num_tasks × 1; empty unless both paths run
  nd::Value fused;     ///< sublayer output added to the residual stream
};

nd::Value dual_context_layer(const nd::Value& h, const nd::Value& neighbor_tokens,
                             const EpisodeBatch& batch, const nd::ParamStore& p,
                             const NetConfig& cfg, std::size_t layer, LayerTrace* trace = nullptr);

struct ReadoutResult {
  nd::Value logits;  ///< num_query × n_way
  /// One num_tasks × readout_dim projection per head.
  std::vector<nd::Value> head_embeddings;
};

ReadoutResult readout(const nd::Value& z, const EpisodeBatch& batch, const nd::ParamStore& p,
                      const NetConfig& cfg);

struct ForwardResult {
  nd::Value logits;
  std::vector<nd::Value> head_embeddings;
  std::vector<LayerTrace> layers;
};

ForwardResult forward_batch(const EpisodeBatch& batch, const nd::ParamStore& p,
                            const NetConfig& cfg);

/// build_batch() then forward_batch(). The sampling seed is drawn from rng.
ForwardResult forward_episode(const Episode& ep, const GraphStore& g, const Matrix& source,
                              const nd::ParamStore& p, const NetConfig& cfg, Mode mode, Rng& rng);

}  // namespace vision
