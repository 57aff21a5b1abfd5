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

#include "vision/synthetic.hpp"

#include <cmath>
#include <random>

#include "vision/error.hpp"
#include "vision/random.hpp"

namespace vision {

ClusterGraph make_cluster_graph(const ClusterGraphConfig& cfg) {
  if (cfg.clusters < 1 || cfg.clusters > cfg.dim) {
    throw ConfigError("cluster graph needs 1 <= clusters <= dim");
  }
  if (cfg.nodes < 2 * cfg.clusters) throw ConfigError("cluster graph needs two nodes per cluster");
  Rng rng = make_rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.sigma);
  const double offset = cfg.separation * cfg.sigma / std::sqrt(2.0);

  Matrix x(cfg.nodes, cfg.dim);
  std::vector<ClassId> labels(cfg.nodes);
  std::vector<std::vector<NodeId>> members(cfg.clusters);
  for (std::size_t v = 0; v < cfg.nodes; ++v) {
    const std::size_t c = v % cfg.clusters;
    labels[v] = static_cast<ClassId>(c);
    members[c].push_back(static_cast<NodeId>(v));
    for (std::size_t j = 0; j < cfg.dim; ++j) x(v, j) = noise(rng) + (j == c ? offset : 0.0);
  }

  std::vector<std::pair<NodeId, NodeId>> edges;
  std::uniform_int_distribution<std::size_t> any(0, cfg.nodes - 1);
  for (std::size_t v = 0; v < cfg.nodes; ++v) {
    const auto& own = members[v % cfg.clusters];
    std::uniform_int_distribution<std::size_t> pick(0, own.size() - 1);
    for (std::size_t e = 0; e < cfg.intra_degree; ++e) {
      edges.emplace_back(static_cast<NodeId>(v), own[pick(rng)]);
    }
    if (cfg.clusters > 1) {
      for (std::size_t e = 0; e < cfg.inter_degree;) {
        const std::size_t u = any(rng);
        if (u % cfg.clusters == v % cfg.clusters) continue;
        edges.emplace_back(static_cast<NodeId>(v), static_cast<NodeId>(u));
        ++e;
      }
    }
  }

  ClusterGraph out{GraphStore::make(std::move(x), edges, std::move(labels)), {}};
  for (std::size_t c = 0; c < cfg.clusters; ++c) out.split.val_classes.push_back(static_cast<ClassId>(c));
  return out;
}

}  // namespace vision
