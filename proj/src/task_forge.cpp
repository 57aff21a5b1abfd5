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

#include "vision/task_forge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "vision/error.hpp"

namespace vision {
namespace {

// Moves a uniform random sample of size k to the front of v.
template <typename T>
void partial_shuffle(std::vector<T>& v, std::size_t k, Rng& rng) {
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
    std::swap(v[i], v[pick(rng)]);
  }
}

double row_norm(std::span<const double> r) {
  double s = 0.0;
  for (double x : r) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void Episode::validate(std::size_t num_nodes) const {
  if (n_way == 0 || k_shot == 0) throw ContractError("episode: n_way and k_shot must be positive");
  if (support.size() != n_way * k_shot) {
    throw ContractError("episode: support has " + std::to_string(support.size()) + " nodes, expected " +
                        std::to_string(n_way * k_shot));
  }
  if (query.size() != n_way * m_query || query_truth.size() != query.size()) {
    throw ContractError("episode: query size mismatch");
  }
  std::vector<std::size_t> per_class(n_way, 0);
  for (auto [v, y] : support) {
    if (y >= n_way) throw ContractError("episode: support label " + std::to_string(y) + " >= n_way");
    ++per_class[y];
  }
  for (std::size_t c = 0; c < n_way; ++c) {
    if (per_class[c] != k_shot) {
      throw ContractError("episode: class " + std::to_string(c) + " has " +
                          std::to_string(per_class[c]) + " support nodes");
    }
  }
  for (RelLabel y : query_truth) {
    if (y >= n_way) throw ContractError("episode: query label out of range");
  }
  std::set<NodeId> seen;
  auto note = [&](NodeId v) {
    if (v >= num_nodes) throw ContractError("episode: node " + std::to_string(v) + " out of range");
    if (!seen.insert(v).second) throw ContractError("episode: node " + std::to_string(v) + " repeated");
  };
  for (auto [v, _] : support) note(v);
  for (NodeId v : query) note(v);
}

Episode select_pseudo_task(const Matrix& x_task, std::span<const NodeId> anchors,
                           std::span<const NodeId> pool, std::size_t k_shot,
                           std::size_t m_query) {
  const std::size_t group = k_shot + m_query;
  std::vector<double> pool_norm(pool.size());
  for (std::size_t p = 0; p < pool.size(); ++p) pool_norm[p] = row_norm(x_task.row(pool[p]));

  Episode ep;
  ep.n_way = anchors.size();
  ep.k_shot = k_shot;
  ep.m_query = m_query;
  std::vector<char> claimed(pool.size(), 0);
  std::vector<std::pair<double, std::size_t>> ranked;  // (-similarity, pool slot)
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    auto a = x_task.row(anchors[j]);
    const double an = row_norm(a);
    ranked.clear();
    for (std::size_t p = 0; p < pool.size(); ++p) {
      if (claimed[p]) continue;
      double sim = 0.0;
      if (an > 0.0 && pool_norm[p] > 0.0) {
        auto x = x_task.row(pool[p]);
        double dot = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * x[c];
        sim = dot / (an * pool_norm[p]);
      }
      ranked.emplace_back(-sim, p);
    }
    if (ranked.size() < group) {
      throw GenerationError("pool exhausted: anchor " + std::to_string(j) + " needs " +
                            std::to_string(group) + " nodes, " + std::to_string(ranked.size()) +
                            " unclaimed");
    }
    auto by_sim_then_id = [&](const auto& l, const auto& r) {
      if (l.first != r.first) return l.first < r.first;
      return pool[l.second] < pool[r.second];
    };
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(group),
                      ranked.end(), by_sim_then_id);
    for (std::size_t s = 0; s < group; ++s) {
      const std::size_t p = ranked[s].second;
      claimed[p] = 1;
      if (s < k_shot) {
        ep.support.emplace_back(pool[p], static_cast<RelLabel>(j));
      } else {
        ep.query.push_back(pool[p]);
        ep.query_truth.push_back(static_cast<RelLabel>(j));
      }
    }
  }
  return ep;
}

Episode gen_pseudo_task(const AdaptiveFeatures& af, const TaskGenConfig& cfg, Rng& rng) {
  const std::size_t n = af.x_task.rows;
  if (cfg.n_way == 0 || cfg.k_shot == 0) throw ConfigError("pseudo-task needs n_way, k_shot >= 1");
  if (cfg.n_way > n) {
    throw GenerationError("graph has " + std::to_string(n) + " nodes, fewer than " +
                          std::to_string(cfg.n_way) + " anchors");
  }
  std::vector<NodeId> nodes(n);
  std::iota(nodes.begin(), nodes.end(), NodeId{0});
  const std::size_t pool = std::min(cfg.pool_size, n - cfg.n_way);
  partial_shuffle(nodes, cfg.n_way + pool, rng);
  std::span<const NodeId> all(nodes);
  return select_pseudo_task(af.x_task, all.subspan(0, cfg.n_way), all.subspan(cfg.n_way, pool),
                            cfg.k_shot, cfg.m_query);
}

Episode gen_pseudo_task_retry(const AdaptiveFeatures& af, const TaskGenConfig& cfg, Rng& rng) {
  const std::size_t attempts = std::max<std::size_t>(cfg.max_attempts, 1);
  for (std::size_t i = 0;; ++i) {
    try {
      return gen_pseudo_task(af, cfg, rng);
    } catch (const GenerationError& e) {
      if (i + 1 >= attempts) {
        throw GenerationError(std::string(e.what()) + " (after " + std::to_string(attempts) +
                              " attempts)");
      }
    }
  }
}

ClassIndex build_class_index(const GraphStore& g) {
  ClassIndex idx;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.labels()[v] != kUnlabeled) idx[g.labels()[v]].push_back(v);
  }
  return idx;
}

Episode gen_eval_episode(const ClassIndex& index, const ClassSplit& split, Phase phase,
                         std::size_t n_way, std::size_t k_shot, std::size_t m_query, Rng& rng) {
  static const char* kNames[] = {"train", "val", "test"};
  const char* name = kNames[static_cast<int>(phase)];
  std::vector<ClassId> classes = classes_for(split, phase);
  if (n_way == 0 || k_shot == 0) throw ConfigError("episode needs n_way, k_shot >= 1");
  if (classes.size() < n_way) {
    throw ConfigError(std::string(name) + " split has " + std::to_string(classes.size()) +
                      " classes; " + std::to_string(n_way) + "-way episodes need " +
                      std::to_string(n_way - classes.size()) + " more");
  }
  for (ClassId c : classes) {
    auto it = index.find(c);
    const std::size_t have = it == index.end() ? 0 : it->second.size();
    if (have < k_shot + m_query) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(have) +
                        " labeled nodes; need " + std::to_string(k_shot + m_query));
    }
  }
  partial_shuffle(classes, n_way, rng);
  Episode ep;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  ep.m_query = m_query;
  for (std::size_t j = 0; j < n_way; ++j) {
    std::vector<NodeId> members = index.at(classes[j]);
    partial_shuffle(members, k_shot + m_query, rng);
    for (std::size_t s = 0; s < k_shot + m_query; ++s) {
      if (s < k_shot) {
        ep.support.emplace_back(members[s], static_cast<RelLabel>(j));
      } else {
        ep.query.push_back(members[s]);
        ep.query_truth.push_back(static_cast<RelLabel>(j));
      }
    }
  }
  return ep;
}

Episode gen_eval_episode(const GraphStore& g, const ClassSplit& split, Phase phase,
                         std::size_t n_way, std::size_t k_shot, std::size_t m_query, Rng& rng) {
  return gen_eval_episode(build_class_index(g), split, phase, n_way, k_shot, m_query, rng);
}

double anchor_distinct_probability(std::size_t c_total, std::size_t n) {
  if (n > c_total) return 0.0;
  double p = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    p *= static_cast<double>(c_total - i) / static_cast<double>(c_total);
  }
  return p;
}

DiversityStats anchor_diversity_monte_carlo(const GraphStore& g, std::size_t n,
                                            std::size_t trials, Rng& rng) {
  std::vector<ClassId> labeled;
  DiversityStats st;
  for (ClassId c : g.labels()) {
    if (c == kUnlabeled) {
      ++st.excluded_unlabeled;
    } else {
      labeled.push_back(c);
    }
  }
  if (n == 0 || labeled.size() < n) {
    throw ConfigError("need at least " + std::to_string(n) + " labeled nodes, have " +
                      std::to_string(labeled.size()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, labeled.size() - 1);
  std::vector<std::size_t> drawn;
  std::vector<ClassId> classes;
  std::size_t total = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    drawn.clear();
    while (drawn.size() < n) {
      const std::size_t i = pick(rng);
      if (std::find(drawn.begin(), drawn.end(), i) == drawn.end()) drawn.push_back(i);
    }
    classes.clear();
    for (std::size_t i : drawn) classes.push_back(labeled[i]);
    std::sort(classes.begin(), classes.end());
    total += static_cast<std::size_t>(std::unique(classes.begin(), classes.end()) - classes.begin());
  }
  st.trials = trials;
  st.mean_distinct = trials ? static_cast<double>(total) / static_cast<double>(trials) : 0.0;
  return st;
}

std::string episode_to_json(const Episode& ep) {
  nlohmann::json j;
  j["n_way"] = ep.n_way;
  j["k_shot"] = ep.k_shot;
  j["m_query"] = ep.m_query;
  j["support"] = nlohmann::json::array();
  for (auto [v, y] : ep.support) j["support"].push_back({v, y});
  j["query"] = ep.query;
  j["truth"] = ep.query_truth;
  return j.dump();
}

Episode episode_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Episode ep;
    ep.n_way = j.at("n_way").get<std::size_t>();
    ep.k_shot = j.at("k_shot").get<std::size_t>();
    ep.m_query = j.at("m_query").get<std::size_t>();
    for (const auto& s : j.at("support")) {
      ep.support.emplace_back(s.at(0).get<NodeId>(), s.at(1).get<RelLabel>());
    }
    ep.query = j.at("query").get<std::vector<NodeId>>();
    ep.query_truth = j.at("truth").get<std::vector<RelLabel>>();
    return ep;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("episode", 1, e.what());
  }
}

}  // namespace vision
