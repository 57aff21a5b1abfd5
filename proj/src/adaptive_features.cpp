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

#include "vision/adaptive_features.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include "vision/error.hpp"
#include "vision/kernels.hpp"

namespace vision {
namespace {

constexpr char kMagic[8] = {'V', 'S', 'N', 'A', 'D', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

bool get_u64(std::istream& in, std::uint64_t& v) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

}  // namespace

Matrix smooth(const GraphStore& g) { return kernels::smooth_normalized(g.adjacency(), g.features()); }

std::vector<double> gate(const Matrix& x_raw, const Matrix& x_smooth) {
  auto cos = kernels::row_cosine(x_raw, x_smooth);
  for (double& s : cos) s = (std::clamp(s, -1.0, 1.0) + 1.0) / 2.0;
  return cos;
}

AdaptiveFeatures fuse(const GraphStore& g) {
  AdaptiveFeatures af;
  af.x_smooth = smooth(g);
  af.gate = gate(g.features(), af.x_smooth);
  const Matrix& raw = g.features();
  af.x_task = Matrix(raw.rows, raw.cols);
  const auto rows = static_cast<std::ptrdiff_t>(raw.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const double gi = af.gate[r];
    auto dst = af.x_task.row(r);
    auto xr = raw.row(r);
    auto xs = af.x_smooth.row(r);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (1.0 - gi) * xr[j] + gi * xs[j];
  }
  return af;
}

void save_adaptive_cache(const std::filesystem::path& path, std::uint64_t graph_hash,
                         const AdaptiveFeatures& af) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, graph_hash);
  put_u64(out, af.x_task.rows);
  put_u64(out, af.x_task.cols);
  for (double v : af.gate) put_u64(out, std::bit_cast<std::uint64_t>(v));
  for (double v : af.x_task.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::optional<AdaptiveFeatures> load_adaptive_cache(const std::filesystem::path& path,
                                                    std::uint64_t graph_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic)) {
    throw ValidationError(path.string() + ": not an adaptive-feature cache");
  }
  std::uint64_t h = 0, rows = 0, cols = 0;
  if (!get_u64(in, h) || !get_u64(in, rows) || !get_u64(in, cols)) {
    throw ValidationError(path.string() + ": truncated header");
  }
  if (h != graph_hash) return std::nullopt;
  AdaptiveFeatures af;
  af.gate.resize(rows);
  af.x_task = Matrix(rows, cols);
  std::uint64_t bits = 0;
  for (double& v : af.gate) {
    if (!get_u64(in, bits)) throw ValidationError(path.string() + ": truncated gate");
    v = std::bit_cast<double>(bits);
  }
  for (double& v : af.x_task.data) {
    if (!get_u64(in, bits)) throw ValidationError(path.string() + ": truncated features");
    v = std::bit_cast<double>(bits);
  }
  return af;
}

AdaptiveFeatures load_or_fuse(const GraphStore& g, const std::filesystem::path& cache_path) {
  const std::uint64_t h = g.content_hash();
  if (auto cached = load_adaptive_cache(cache_path, h)) return std::move(*cached);
  AdaptiveFeatures af = fuse(g);
  save_adaptive_cache(cache_path, h, af);
  return af;
}

}  // namespace vision
