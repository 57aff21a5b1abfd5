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
#include <vector>

#include "vision/graph_store.hpp"
#include "vision/matrix.hpp"

namespace vision {

/// Structure-adaptive node features: each row is a gated blend of the raw
/// features and their one-hop normalized smoothing.
struct AdaptiveFeatures {
  Matrix x_task;
  /// Per-node blend weight in [0, 1]; 1 means fully smoothed.
  std::vector<double> gate;
  /// Empty when loaded from a cache file.
  Matrix x_smooth;
};

/// D̃^{-1/2} (A + I) D̃^{-1/2} X over the sparse adjacency.
Matrix smooth(const GraphStore& g);

/// g_i = (clamp(cos(raw_i, smooth_i), -1, 1) + 1) / 2, with cos = 0 for a
/// zero-norm row.
std::vector<double> gate(const Matrix& x_raw, const Matrix& x_smooth);

/// x_task = (1 - g) ⊙ x_raw + g ⊙ x_smooth, row-broadcast.
AdaptiveFeatures fuse(const GraphStore& g);

// Cache layout (little-endian): "VSNADPT1" | u64 graph_hash | u64 rows |
// u64 cols | rows × f64 gate | rows·cols × f64 x_task
void save_adaptive_cache(const std::filesystem::path& path, std::uint64_t graph_hash,
                         const AdaptiveFeatures& af);
/// nullopt when the file is missing or was built for a different graph.
std::optional<AdaptiveFeatures> load_adaptive_cache(const std::filesystem::path& path,
                                                    std::uint64_t graph_hash);

/// Reads the cache when it matches g, otherwise computes and (re)writes it.
AdaptiveFeatures load_or_fuse(const GraphStore& g, const std::filesystem::path& cache_path);

}  // namespace vision
