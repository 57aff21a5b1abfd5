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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "support.hpp"
#include "vision/error.hpp"
#include "vision/graph_store.hpp"

namespace fs = std::filesystem;
using namespace vision;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("vision_gs_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name) << content;
    return path_ / name;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<NodeId> nbrs(const GraphStore& g, NodeId v) {
  auto s = g.neighbors(v);
  return {s.begin(), s.end()};
}

}  // namespace

TEST(GraphStore, TwoNodeEdgeIsSymmetrized) {
  TempDir d;
  GraphStore g = load_graph(d.file("f", "0\t1 0\n1\t0 1\n"), d.file("e", "0 1\n"),
                            d.file("l", "0 0\n1 1\n"));
  EXPECT_EQ(nbrs(g, 0), std::vector<NodeId>{1});
  EXPECT_EQ(nbrs(g, 1), std::vector<NodeId>{0});
  EXPECT_EQ(g.num_classes(), 2u);
}

TEST(GraphStore, NeighborOrderAndIsolatedNodes) {
  Matrix x(4, 1);
  std::vector<std::pair<NodeId, NodeId>> path = {{1, 0}, {2, 1}};
  GraphStore g = GraphStore::make(x, path, {});
  EXPECT_EQ(nbrs(g, 1), (std::vector<NodeId>{0, 2}));
  EXPECT_TRUE(nbrs(g, 3).empty());
  std::vector<std::pair<NodeId, NodeId>> tri = {{0, 2}, {1, 0}, {2, 1}};
  GraphStore t = GraphStore::make(Matrix(3, 1), tri, {});
  EXPECT_EQ(nbrs(t, 0), (std::vector<NodeId>{1, 2}));
  EXPECT_THROW(g.neighbors(4), ContractError);
}

TEST(GraphStore, SelfLoopsAndDuplicatesDropped) {
  std::vector<std::pair<NodeId, NodeId>> e = {{0, 0}, {0, 1}, {1, 0}, {0, 1}};
  GraphStore g = GraphStore::make(Matrix(2, 1), e, {});
  EXPECT_EQ(nbrs(g, 0), std::vector<NodeId>{1});
  EXPECT_EQ(g.num_edges(), 1u);
}

TEST(GraphStore, SparseFeatureLinesAreDensified) {
  TempDir d;
  GraphStore g = load_graph(d.file("f", "0\t0:1.5 2:-1\n1\t1:2\n"), d.file("e", ""),
                            d.file("l", "0 0\n"));
  EXPECT_EQ(g.num_features(), 3u);
  EXPECT_DOUBLE_EQ(g.features()(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(g.features()(0, 2), -1.0);
  EXPECT_DOUBLE_EQ(g.features()(1, 1), 2.0);
  EXPECT_FALSE(g.label(1).has_value());
}

TEST(GraphStore, MalformedLineReportsLineNumber) {
  TempDir d;
  auto f = d.file("f", "0\t1 0\n1\t0 1\n");
  auto l = d.file("l", "0 0\n");
  try {
    load_graph(f, d.file("e", "0 1\nbanana\n"), l);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(GraphStore, OutOfRangeNodeAndNonFiniteFeatureRejected) {
  TempDir d;
  auto f = d.file("f", "0\t1 0\n1\t0 1\n");
  auto l = d.file("l", "0 0\n");
  EXPECT_THROW(load_graph(f, d.file("e", "0 5\n"), l), ValidationError);
  EXPECT_THROW(load_graph(d.file("g", "0\tnan 0\n1\t0 1\n"), d.file("e2", ""), l),
               ValidationError);
  EXPECT_THROW(load_graph(f, d.file("e3", ""), d.file("l2", "7 0\n")), ValidationError);
}

TEST(GraphStore, RoundTripThroughFiles) {
  TempDir d;
  GraphStore g = fixtures::random_graph(60, 0.1, 5, 4, 1);
  write_graph(g, d.path() / "f", d.path() / "e", d.path() / "l");
  GraphStore h = load_graph(d.path() / "f", d.path() / "e", d.path() / "l");
  EXPECT_EQ(g.features(), h.features());
  EXPECT_EQ(g.adjacency().offsets, h.adjacency().offsets);
  EXPECT_EQ(g.adjacency().indices, h.adjacency().indices);
  EXPECT_EQ(g.labels(), h.labels());
  EXPECT_EQ(g.content_hash(), h.content_hash());
}

TEST(GraphStore, SymmetryHoldsExhaustively) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GraphStore g = fixtures::random_graph(300, 0.02, 2, 3, seed);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      auto row = g.neighbors(v);
      EXPECT_TRUE(std::is_sorted(row.begin(), row.end()));
      EXPECT_EQ(std::adjacent_find(row.begin(), row.end()), row.end());
      for (NodeId u : row) {
        auto back = g.neighbors(u);
        EXPECT_TRUE(std::binary_search(back.begin(), back.end(), v));
      }
    }
  }
}

TEST(ClassSplitTest, ShippedSplitsHaveExpectedSizes) {
  auto sizes = [](const std::string& name, std::size_t classes) {
    std::vector<ClassId> labels(classes);
    for (std::size_t c = 0; c < classes; ++c) labels[c] = static_cast<ClassId>(c);
    GraphStore g = GraphStore::make(Matrix(classes, 1), {}, labels);
    ClassSplit s = load_split(fs::path(VISION_SOURCE_DIR) / "data" / "splits" / (name + ".txt"), g);
    return std::vector<std::size_t>{s.train_classes.size(), s.val_classes.size(),
                                    s.test_classes.size()};
  };
  EXPECT_EQ(sizes("corafull", 70), (std::vector<std::size_t>{40, 15, 15}));
  EXPECT_EQ(sizes("cora", 7), (std::vector<std::size_t>{3, 2, 2}));
  EXPECT_EQ(sizes("citeseer", 6), (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_EQ(sizes("cora_ml", 7), (std::vector<std::size_t>{3, 2, 2}));
}

TEST(ClassSplitTest, UnknownOrOverlappingClassesRejected) {
  TempDir d;
  std::vector<ClassId> labels = {0, 1, 2, 3, 4, 5, 6};
  GraphStore g = GraphStore::make(Matrix(7, 1), {}, labels);
  EXPECT_THROW(load_split(d.file("s1", "train: 0,1\nval: 2\ntest: 99\n"), g), ValidationError);
  EXPECT_THROW(load_split(d.file("s2", "train: 0,1\nval: 1\ntest: 3\n"), g), ValidationError);
  EXPECT_THROW(load_split(d.file("s3", "train: 0,1\nval: 2\n"), g), Error);
}
