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

#include "vision/graph_store.hpp"

namespace vision {

/// Planted-cluster graph: Gaussian features around orthogonal class means and
/// edges mostly inside clusters.
struct ClusterGraphConfig {
  std::size_t nodes = 200;
  std::size_t clusters = 2;
  std::size_t dim = 16;
  /// Distance between any two class means, in units of sigma.
  double separation = 4.0;
  double sigma = 1.0;
  /// Random same-cluster edges started from each node.
  std::size_t intra_degree = 4;
  /// Random cross-cluster edges started from each node.
  std::size_t inter_degree = 0;
  std::uint64_t seed = 0;
};

struct ClusterGraph {
  GraphStore graph;
  /// Every class is a validation class; train and test are empty.
  ClassSplit split;
};

/// Node v belongs to cluster v % clusters.
ClusterGraph make_cluster_graph(const ClusterGraphConfig& cfg);

}  // namespace vision
