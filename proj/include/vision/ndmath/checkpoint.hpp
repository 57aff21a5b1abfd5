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
#include <string>

#include "vision/ndmath/param_store.hpp"

namespace vision::nd {

/// Provenance stored next to the tensors.
struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  /// Free-form `key = value` lines describing the network configuration.
  std::string config_text;
};

struct Checkpoint {
  ParamStore params;
  CheckpointMeta meta;
};

// Layout (all integers little-endian):
//   "VSNCKPT1" | u64 config_hash | u64 seed | u32 len | config_text
//   u32 count | count × { u32 len | name | u32 rows | u32 cols | rows·cols f64 }
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace vision::nd
