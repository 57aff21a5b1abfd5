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

#include "vision/ndmath/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "vision/error.hpp"
#include "vision/hash.hpp"

namespace vision::nd {
namespace {

constexpr char kMagic[8] = {'V', 'S', 'N', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf.insert(buf.end(), b, b + n);
  }
  std::vector<char> buf;

 private:
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw ValidationError("checkpoint truncated");
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const CheckpointMeta& meta) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u64(meta.config_hash);
  w.u64(meta.seed);
  w.u32(static_cast<std::uint32_t>(meta.config_text.size()));
  w.bytes(meta.config_text.data(), meta.config_text.size());
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, v] : params.entries()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(v.rows()));
    w.u32(static_cast<std::uint32_t>(v.cols()));
    for (double x : v.data().data) w.f64(x);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(read_all(path));
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw ValidationError(path.string() + ": not a checkpoint");
  }
  Checkpoint ck;
  ck.meta.config_hash = r.u64();
  ck.meta.seed = r.u64();
  ck.meta.config_text = r.str(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u32());
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix m(rows, cols);
    for (double& x : m.data) x = r.f64();
    ck.params.add(name, std::move(m));
  }
  if (!r.done()) throw ValidationError(path.string() + ": trailing bytes");
  return ck;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  Fnv1a h;
  h.update(bytes.data(), bytes.size());
  return h.digest();
}

}  // namespace vision::nd
