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

#include "vision/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "vision/error.hpp"
#include "vision/hash.hpp"

namespace vision {
namespace {

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write " + p.string());
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits on runs of spaces/tabs.
std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_num(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct FeatureLine {
  NodeId id;
  bool sparse;
  std::vector<std::pair<std::size_t, double>> entries;  // sparse
  std::vector<double> dense;
};

}  // namespace

Csr build_csr(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges) {
  std::vector<std::vector<NodeId>> rows(num_nodes);
  for (auto [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw ValidationError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") references a node outside [0, " + std::to_string(num_nodes) + ")");
    }
    if (u == v) continue;
    rows[u].push_back(v);
    rows[v].push_back(u);
  }
  Csr csr;
  csr.offsets.reserve(num_nodes + 1);
  csr.offsets.push_back(0);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    csr.indices.insert(csr.indices.end(), r.begin(), r.end());
    csr.offsets.push_back(csr.indices.size());
  }
  return csr;
}

GraphStore GraphStore::make(Matrix features, std::span<const std::pair<NodeId, NodeId>> edges,
                            std::vector<ClassId> labels) {
  for (std::size_t i = 0; i < features.data.size(); ++i) {
    if (!std::isfinite(features.data[i])) {
      throw ValidationError("non-finite feature at node " + std::to_string(i / features.cols) +
                            ", column " + std::to_string(i % features.cols));
    }
  }
  if (labels.empty()) labels.assign(features.rows, kUnlabeled);
  if (labels.size() != features.rows) {
    throw ValidationError("label vector has " + std::to_string(labels.size()) +
                          " entries for " + std::to_string(features.rows) + " nodes");
  }
  ClassId max_label = -1;
  for (ClassId c : labels) {
    if (c < kUnlabeled) throw ValidationError("negative class id " + std::to_string(c));
    max_label = std::max(max_label, c);
  }
  GraphStore g;
  g.adjacency_ = build_csr(features.rows, edges);
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.num_classes_ = static_cast<std::size_t>(max_label + 1);
  return g;
}

std::optional<ClassId> GraphStore::label(NodeId v) const {
  if (v >= num_nodes()) throw ContractError("node " + std::to_string(v) + " out of range");
  if (labels_[v] == kUnlabeled) return std::nullopt;
  return labels_[v];
}

std::span<const NodeId> GraphStore::neighbors(NodeId v) const {
  if (v >= num_nodes()) {
    throw ContractError("node " + std::to_string(v) + " out of range [0, " +
                        std::to_string(num_nodes()) + ")");
  }
  return adjacency_.row(v);
}

std::uint64_t GraphStore::content_hash() const {
  Fnv1a h;
  auto mix = [&h](const void* p, std::size_t n) { h.update(p, n); };
  const std::uint64_t dims[2] = {features_.rows, features_.cols};
  mix(dims, sizeof dims);
  mix(features_.data.data(), features_.data.size() * sizeof(double));
  for (std::size_t o : adjacency_.offsets) {
    const std::uint64_t v = o;
    mix(&v, sizeof v);
  }
  mix(adjacency_.indices.data(), adjacency_.indices.size() * sizeof(NodeId));
  mix(labels_.data(), labels_.size() * sizeof(ClassId));
  return h.digest();
}

const std::vector<ClassId>& classes_for(const ClassSplit& split, Phase phase) {
  switch (phase) {
    case Phase::kTrain: return split.train_classes;
    case Phase::kVal: return split.val_classes;
    case Phase::kTest: return split.test_classes;
  }
  throw ContractError("unknown phase");
}

GraphStore load_graph(const std::filesystem::path& features_path,
                      const std::filesystem::path& edges_path,
                      const std::filesystem::path& labels_path) {
  const std::string fname = features_path.string();
  std::vector<FeatureLine> lines;
  std::size_t num_features = 0;
  bool have_dense_width = false;
  NodeId max_id = 0;
  {
    auto in = open_in(features_path);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string_view line = trim(raw);
      if (line.empty()) continue;
      auto tab = line.find('\t');
      std::string_view id_part = tab == std::string_view::npos ? line : line.substr(0, tab);
      std::string_view rest = tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1);
      FeatureLine fl{};
      if (!parse_num(trim(id_part), fl.id)) throw ParseError(fname, lineno, "bad node id");
      auto toks = tokens(rest);
      fl.sparse = !toks.empty() && toks.front().find(':') != std::string_view::npos;
      for (auto t : toks) {
        auto colon = t.find(':');
        if (fl.sparse != (colon != std::string_view::npos)) {
          throw ParseError(fname, lineno, "mixed dense and sparse entries");
        }
        if (fl.sparse) {
          std::size_t idx;
          double val;
          if (!parse_num(t.substr(0, colon), idx) || !parse_num(t.substr(colon + 1), val)) {
            throw ParseError(fname, lineno, "bad sparse entry '" + std::string(t) + "'");
          }
          fl.entries.emplace_back(idx, val);
          num_features = std::max(num_features, idx + 1);
        } else {
          double val;
          if (!parse_num(t, val)) throw ParseError(fname, lineno, "bad value '" + std::string(t) + "'");
          fl.dense.push_back(val);
        }
      }
      if (!fl.sparse && !toks.empty()) {
        if (have_dense_width && fl.dense.size() != num_features) {
          throw ParseError(fname, lineno, "expected " + std::to_string(num_features) +
                                              " features, got " + std::to_string(fl.dense.size()));
        }
        if (!have_dense_width && fl.dense.size() < num_features) {
          throw ParseError(fname, lineno, "dense row narrower than sparse indices seen so far");
        }
        num_features = fl.dense.size();
        have_dense_width = true;
      }
      max_id = std::max(max_id, fl.id);
      lines.push_back(std::move(fl));
    }
  }
  if (lines.empty()) throw ValidationError(fname + ": no nodes");
  const std::size_t n = static_cast<std::size_t>(max_id) + 1;
  Matrix x(n, num_features);
  std::vector<char> seen(n, 0);
  for (const auto& fl : lines) {
    if (seen[fl.id]) throw ValidationError(fname + ": node " + std::to_string(fl.id) + " listed twice");
    seen[fl.id] = 1;
    if (fl.sparse) {
      for (auto [idx, val] : fl.entries) {
        if (have_dense_width && idx >= num_features) {
          throw ValidationError(fname + ": sparse index " + std::to_string(idx) + " beyond width");
        }
        x(fl.id, idx) = val;
      }
    } else {
      std::copy(fl.dense.begin(), fl.dense.end(), x.row(fl.id).begin());
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!seen[v]) throw ValidationError(fname + ": node " + std::to_string(v) + " has no feature line");
  }

  std::vector<std::pair<NodeId, NodeId>> edges;
  {
    auto in = open_in(edges_path);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      auto toks = tokens(trim(raw));
      if (toks.empty()) continue;
      NodeId u, v;
      if (toks.size() != 2 || !parse_num(toks[0], u) || !parse_num(toks[1], v)) {
        throw ParseError(edges_path.string(), lineno, "expected 'u v'");
      }
      edges.emplace_back(u, v);
    }
  }

  std::vector<ClassId> labels(n, kUnlabeled);
  {
    auto in = open_in(labels_path);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      auto toks = tokens(trim(raw));
      if (toks.empty()) continue;
      NodeId v;
      ClassId c;
      if (toks.size() != 2 || !parse_num(toks[0], v) || !parse_num(toks[1], c) || c < 0) {
        throw ParseError(labels_path.string(), lineno, "expected 'node_id class_id'");
      }
      if (v >= n) {
        throw ValidationError(labels_path.string() + ": node " + std::to_string(v) +
                              " out of range [0, " + std::to_string(n) + ")");
      }
      if (labels[v] != kUnlabeled && labels[v] != c) {
        throw ValidationError(labels_path.string() + ": node " + std::to_string(v) +
                              " has conflicting labels");
      }
      labels[v] = c;
    }
  }
  return GraphStore::make(std::move(x), edges, std::move(labels));
}

void write_graph(const GraphStore& g, const std::filesystem::path& features_path,
                 const std::filesystem::path& edges_path,
                 const std::filesystem::path& labels_path) {
  {
    auto out = open_out(features_path);
    out << std::setprecision(17);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      out << v << '\t';
      auto r = g.features().row(v);
      for (std::size_t j = 0; j < r.size(); ++j) out << (j ? " " : "") << r[j];
      out << '\n';
    }
  }
  {
    auto out = open_out(edges_path);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      for (NodeId v : g.neighbors(u)) {
        if (u < v) out << u << ' ' << v << '\n';
      }
    }
  }
  {
    auto out = open_out(labels_path);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (g.labels()[v] != kUnlabeled) out << v << ' ' << g.labels()[v] << '\n';
    }
  }
}

void validate_split(const ClassSplit& split, std::size_t num_classes) {
  std::map<ClassId, std::string> owner;
  auto check = [&](const std::vector<ClassId>& group, const char* name) {
    for (ClassId c : group) {
      if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
        throw ValidationError(std::string("split group '") + name + "' names unknown class " +
                              std::to_string(c) + " (graph has " + std::to_string(num_classes) +
                              " classes)");
      }
      auto [it, inserted] = owner.emplace(c, name);
      if (!inserted) {
        throw ValidationError("class " + std::to_string(c) + " appears in both '" + it->second +
                              "' and '" + name + "'");
      }
    }
  };
  check(split.train_classes, "train");
  check(split.val_classes, "val");
  check(split.test_classes, "test");
}

ClassSplit load_split(const std::filesystem::path& path, const GraphStore& g) {
  auto in = open_in(path);
  ClassSplit split;
  std::set<std::string> found;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError(path.string(), lineno, "expected 'group: ids'");
    std::string key(trim(line.substr(0, colon)));
    std::vector<ClassId>* group = nullptr;
    if (key == "train") group = &split.train_classes;
    else if (key == "val") group = &split.val_classes;
    else if (key == "test") group = &split.test_classes;
    else throw ParseError(path.string(), lineno, "unknown group '" + key + "'");
    if (!found.insert(key).second) throw ParseError(path.string(), lineno, "group '" + key + "' repeated");
    std::string_view ids = trim(line.substr(colon + 1));
    while (!ids.empty()) {
      auto comma = ids.find(',');
      std::string_view tok = trim(ids.substr(0, comma));
      ClassId c;
      if (!parse_num(tok, c)) throw ParseError(path.string(), lineno, "bad class id '" + std::string(tok) + "'");
      group->push_back(c);
      if (comma == std::string_view::npos) break;
      ids = ids.substr(comma + 1);
    }
  }
  if (found.size() != 3) throw ValidationError(path.string() + ": expected train, val and test lines");
  validate_split(split, g.num_classes());
  return split;
}

}  // namespace vision
