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
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "vision/matrix.hpp"

namespace vision {

using NodeId = std::uint32_t;
using ClassId = std::int32_t;

/// Sentinel stored in GraphStore::labels for unlabeled nodes.
inline constexpr ClassId kUnlabeled = -1;

/// Symmetric adjacency in compressed-row form, rows sorted ascending, no
/// self-loops and no duplicates.
struct Csr {
  std::vector<std::size_t> offsets;  // size num_nodes + 1
  std::vector<NodeId> indices;

  std::size_t num_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t degree(NodeId v) const { return offsets[v + 1] - offsets[v]; }
  std::span<const NodeId> row(NodeId v) const {
    return {indices.data() + offsets[v], degree(v)};
  }
};

/// Builds a symmetric, deduplicated, loop-free Csr from an undirected edge list.
Csr build_csr(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges);

/// Immutable attributed graph. Construct through load_graph() or make().
class GraphStore {
 public:
  /// Validates and takes ownership. Edges are symmetrized and self-loops
  /// dropped. labels may be empty (fully unlabeled graph) or one entry per
  /// node with kUnlabeled for missing labels.
  static GraphStore make(Matrix features,
                         std::span<const std::pair<NodeId, NodeId>> edges,
                         std::vector<ClassId> labels);

  std::size_t num_nodes() const { return features_.rows; }
  std::size_t num_features() const { return features_.cols; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_edges() const { return adjacency_.indices.size() / 2; }

  const Matrix& features() const { return features_; }
  const Csr& adjacency() const { return adjacency_; }
  const std::vector<ClassId>& labels() const { return labels_; }

  /// Class of v, or nullopt when unlabeled.
  std::optional<ClassId> label(NodeId v) const;

  /// Neighbors of v in ascending id order. Throws ContractError when v is
  /// out of range.
  std::span<const NodeId> neighbors(NodeId v) const;

  /// 64-bit FNV-1a digest over features, adjacency and labels.
  std::uint64_t content_hash() const;

 private:
  Matrix features_;
  Csr adjacency_;
  std::vector<ClassId> labels_;
  std::size_t num_classes_ = 0;
};

/// Disjoint class groups for meta-training, validation and testing.
struct ClassSplit {
  std::vector<ClassId> train_classes;
  std::vector<ClassId> val_classes;
  std::vector<ClassId> test_classes;
};

enum class Phase { kTrain, kVal, kTest };

const std::vector<ClassId>& classes_for(const ClassSplit& split, Phase phase);

/// Loads the three text files described in the README. Throws ParseError on
/// malformed lines and ValidationError on invariant violations.
GraphStore load_graph(const std::filesystem::path& features_path,
                      const std::filesystem::path& edges_path,
                      const std::filesystem::path& labels_path);

/// Writes the graph in the same text formats (dense features, each
/// undirected edge once, labeled nodes only).
void write_graph(const GraphStore& g, const std::filesystem::path& features_path,
                 const std::filesystem::path& edges_path,
                 const std::filesystem::path& labels_path);

ClassSplit load_split(const std::filesystem::path& path, const GraphStore& g);

/// Checks disjointness and range; throws ValidationError.
void validate_split(const ClassSplit& split, std::size_t num_classes);

}  // namespace vision
