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

#include "vision/context_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vision/error.hpp"
#include "vision/hash.hpp"

namespace vision {

using nd::ParamStore;
using nd::Value;

namespace {

std::string layer_key(std::size_t l, const std::string& name) {
  return "layer" + std::to_string(l) + "." + name;
}

Matrix gaussian(std::size_t r, std::size_t c, double std, Rng& rng) {
  Matrix m(r, c);
  std::normal_distribution<double> dist(0.0, std);
  for (double& x : m.data) x = dist(rng);
  return m;
}

void add_norm(ParamStore& p, const std::string& prefix, std::size_t d) {
  p.add(prefix + ".gamma", Matrix(1, d, 1.0));
  p.add(prefix + ".beta", Matrix(1, d, 0.0));
}

Value norm(const Value& x, const ParamStore& p, const std::string& prefix) {
  return nd::add(nd::mul(nd::layer_norm(x), p.at(prefix + ".gamma")), p.at(prefix + ".beta"));
}

void add_noise(Matrix& m, double std, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std);
  for (double& x : m.data) x += dist(rng);
}

}  // namespace

void NetConfig::validate() const {
  if (in_dim == 0) throw ConfigError("in_dim must be positive");
  if (hidden_dim == 0 || attn_heads == 0 || hidden_dim % attn_heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by " +
                      std::to_string(attn_heads) + " heads");
  }
  if (ffn_dim == 0 || readout_heads == 0 || readout_dim == 0 || max_n_way == 0) {
    throw ConfigError("network dimensions must be positive");
  }
  if (k_neigh == 0) throw ConfigError("k_neigh must be positive");
  if (!(tau_min > 0.0 && tau_min <= tau_init && tau_init <= tau_max)) {
    throw ConfigError("temperature bounds must satisfy 0 < tau_min <= tau_init <= tau_max");
  }
  if (init_std <= 0.0 || noise_std < 0.0) throw ConfigError("bad init_std or noise_std");
}

KeyValues NetConfig::to_kv() const {
  auto num = [](double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  return {
      {"in_dim", std::to_string(in_dim)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"attn_heads", std::to_string(attn_heads)},
      {"num_layers", std::to_string(num_layers)},
      {"ffn_dim", std::to_string(ffn_dim)},
      {"readout_heads", std::to_string(readout_heads)},
      {"readout_dim", std::to_string(readout_dim)},
      {"k_neigh", std::to_string(k_neigh)},
      {"max_n_way", std::to_string(max_n_way)},
      {"tau_init", num(tau_init)},
      {"tau_min", num(tau_min)},
      {"tau_max", num(tau_max)},
      {"init_std", num(init_std)},
      {"noise_std", num(noise_std)},
      {"use_local", flag(use_local)},
      {"use_global", flag(use_global)},
      {"use_task_context", flag(use_task_context)},
  };
}

NetConfig NetConfig::from_kv(const KeyValues& kv) {
  NetConfig c;
  read_value(kv, "in_dim", c.in_dim);
  read_value(kv, "hidden_dim", c.hidden_dim);
  read_value(kv, "attn_heads", c.attn_heads);
  read_value(kv, "num_layers", c.num_layers);
  read_value(kv, "ffn_dim", c.ffn_dim);
  read_value(kv, "readout_heads", c.readout_heads);
  read_value(kv, "readout_dim", c.readout_dim);
  read_value(kv, "k_neigh", c.k_neigh);
  read_value(kv, "max_n_way", c.max_n_way);
  read_value(kv, "tau_init", c.tau_init);
  read_value(kv, "tau_min", c.tau_min);
  read_value(kv, "tau_max", c.tau_max);
  read_value(kv, "init_std", c.init_std);
  read_value(kv, "noise_std", c.noise_std);
  read_value(kv, "use_local", c.use_local);
  read_value(kv, "use_global", c.use_global);
  read_value(kv, "use_task_context", c.use_task_context);
  return c;
}

std::uint64_t NetConfig::hash() const {
  const std::string text = format_key_values(to_kv());
  Fnv1a h;
  h.update(text.data(), text.size());
  return h.digest();
}

std::vector<std::size_t> EpisodeBatch::support_rows() const {
  std::vector<std::size_t> r(num_support);
  for (std::size_t i = 0; i < num_support; ++i) r[i] = i;
  return r;
}

std::vector<std::size_t> EpisodeBatch::query_rows() const {
  std::vector<std::size_t> r(num_query);
  for (std::size_t i = 0; i < num_query; ++i) r[i] = num_support + i;
  return r;
}

std::vector<std::vector<std::size_t>> EpisodeBatch::class_groups() const {
  std::vector<std::vector<std::size_t>> groups(n_way);
  for (std::size_t i = 0; i < num_support; ++i) {
    if (roles[i] >= n_way) throw ContractError("support role out of range");
    groups[roles[i]].push_back(i);
  }
  return groups;
}

void task_normalize(Matrix& task, Matrix& neighbors) {
  if (task.rows == 0) throw ContractError("task_normalize: empty task");
  std::vector<double> mu(task.cols, 0.0);
  for (std::size_t i = 0; i < task.rows; ++i) {
    auto r = task.row(i);
    for (std::size_t j = 0; j < task.cols; ++j) mu[j] += r[j];
  }
  for (double& m : mu) m /= static_cast<double>(task.rows);
  auto center = [&](Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
      auto r = m.row(i);
      for (std::size_t j = 0; j < m.cols; ++j) r[j] -= mu[j];
    }
  };
  center(task);
  center(neighbors);
}

std::vector<NodeId> sample_neighbors(const GraphStore& g, NodeId v, std::size_t k_neigh,
                                     std::uint64_t seed) {
  auto nbrs = g.neighbors(v);
  std::vector<NodeId> out(nbrs.begin(), nbrs.end());
  if (out.size() <= k_neigh) return out;
  Rng rng = make_rng(seed, v);
  for (std::size_t i = 0; i < k_neigh; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, out.size() - 1);
    std::swap(out[i], out[pick(rng)]);
  }
  out.resize(k_neigh);
  std::sort(out.begin(), out.end());
  return out;
}

EpisodeBatch build_batch(const Episode& ep, const GraphStore& g, const Matrix& source,
                         const NetConfig& cfg, std::uint64_t sampling_seed, Mode mode,
                         Rng* noise_rng) {
  if (source.rows != g.num_nodes()) {
    throw ContractError("feature source has " + std::to_string(source.rows) + " rows, graph has " +
                        std::to_string(g.num_nodes()) + " nodes");
  }
  if (source.cols != cfg.in_dim) {
    throw ContractError("feature width " + std::to_string(source.cols) + " != in_dim " +
                        std::to_string(cfg.in_dim));
  }
  ep.validate(g.num_nodes());
  if (ep.n_way > cfg.max_n_way) {
    throw ContractError(std::to_string(ep.n_way) + "-way episode exceeds max_n_way " +
                        std::to_string(cfg.max_n_way));
  }

  EpisodeBatch b;
  b.n_way = ep.n_way;
  b.num_support = ep.support.size();
  b.num_query = ep.query.size();
  std::vector<NodeId> nodes;
  for (auto [v, y] : ep.support) {
    nodes.push_back(v);
    b.roles.push_back(y);
  }
  for (NodeId v : ep.query) {
    nodes.push_back(v);
    b.roles.push_back(kMaskRole);
  }

  b.task_features = Matrix(nodes.size(), source.cols);
  std::vector<NodeId> nbr_nodes;
  b.neighbors.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto src = source.row(nodes[i]);
    std::copy(src.begin(), src.end(), b.task_features.row(i).begin());
    for (NodeId u : sample_neighbors(g, nodes[i], cfg.k_neigh, sampling_seed)) {
      b.neighbors[i].push_back(nbr_nodes.size());
      nbr_nodes.push_back(u);
    }
  }
  b.neighbor_features = Matrix(nbr_nodes.size(), source.cols);
  for (std::size_t r = 0; r < nbr_nodes.size(); ++r) {
    auto src = source.row(nbr_nodes[r]);
    std::copy(src.begin(), src.end(), b.neighbor_features.row(r).begin());
  }

  if (mode == Mode::kTrain && noise_rng != nullptr && cfg.noise_std > 0.0) {
    add_noise(b.task_features, cfg.noise_std, *noise_rng);
    add_noise(b.neighbor_features, cfg.noise_std, *noise_rng);
  }
  task_normalize(b.task_features, b.neighbor_features);
  return b;
}

ParamStore init_params(const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.hidden_dim;
  const double s = cfg.init_std;
  ParamStore p;
  p.add("embed.W_f", gaussian(cfg.in_dim, d, s, rng));
  p.add("embed.role", gaussian(cfg.max_n_way, d, s, rng));
  p.add("embed.mask", gaussian(1, d, s, rng));
  add_norm(p, "embed.norm", d);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    for (const char* path : {"local", "global"}) {
      for (const char* w : {"W_q", "W_k", "W_v"}) {
        p.add(layer_key(l, std::string(path) + "." + w), gaussian(d, d, s, rng));
      }
    }
    p.add(layer_key(l, "gate.W_g"), gaussian(2 * d, 1, s, rng));
    p.add(layer_key(l, "gate.b_g"), Matrix(1, 1, 0.0));
    add_norm(p, layer_key(l, "norm1"), d);
    add_norm(p, layer_key(l, "norm2"), d);
    p.add(layer_key(l, "ffn.W_1"), gaussian(d, cfg.ffn_dim, s, rng));
    p.add(layer_key(l, "ffn.b_1"), Matrix(1, cfg.ffn_dim, 0.0));
    p.add(layer_key(l, "ffn.W_2"), gaussian(cfg.ffn_dim, d, s, rng));
    p.add(layer_key(l, "ffn.b_2"), Matrix(1, d, 0.0));
  }
  add_norm(p, "final_norm", d);
  for (std::size_t h = 0; h < cfg.readout_heads; ++h) {
    p.add("readout.head" + std::to_string(h) + ".W", gaussian(d, cfg.readout_dim, s, rng));
  }
  p.add("readout.tau", Matrix(cfg.readout_heads, 1, cfg.tau_init));
  return p;
}

Tokens init_tokens(const EpisodeBatch& batch, const ParamStore& p, const NetConfig& cfg) {
  const Value& wf = p.at("embed.W_f");
  Value role_table = nd::concat_rows({p.at("embed.role"), p.at("embed.mask")});
  const std::size_t mask_row = role_table.rows() - 1;
  std::vector<std::size_t> role_idx(batch.roles.size());
  for (std::size_t i = 0; i < batch.roles.size(); ++i) {
    const std::uint32_t r = batch.roles[i];
    if (r == kMaskRole || !cfg.use_task_context) {
      role_idx[i] = mask_row;
    } else if (r >= mask_row) {
      throw ContractError("role " + std::to_string(r) + " exceeds role table of " +
                          std::to_string(mask_row));
    } else {
      role_idx[i] = r;
    }
  }
  Tokens t;
  Value x = Value::constant(batch.task_features);
  t.task = norm(nd::add(nd::matmul(x, wf), nd::gather_rows(role_table, role_idx)), p, "embed.norm");
  if (batch.neighbor_features.rows > 0) {
    t.neighbors = norm(nd::matmul(Value::constant(batch.neighbor_features), wf), p, "embed.norm");
  }
  return t;
}

Value dual_context_layer(const Value& h, const Value& neighbor_tokens, const EpisodeBatch& batch,
                         const ParamStore& p, const NetConfig& cfg, std::size_t layer,
                         LayerTrace* trace) {
  const std::string n1 = layer_key(layer, "norm1");
  Value u = norm(h, p, n1);
  Value z_struct, z_task, gate, fused;

  if (cfg.use_local) {
    Value src = u;
    std::size_t offset = 0;
    if (neighbor_tokens) {
      src = nd::concat_rows({norm(neighbor_tokens, p, n1), u});
      offset = neighbor_tokens.rows();
    }
    std::vector<std::vector<std::size_t>> seg(batch.num_tasks());
    for (std::size_t i = 0; i < seg.size(); ++i) {
      seg[i] = batch.neighbors[i].empty() ? std::vector<std::size_t>{offset + i} : batch.neighbors[i];
    }
    z_struct = nd::segment_attention(nd::matmul(u, p.at(layer_key(layer, "local.W_q"))),
                                     nd::matmul(src, p.at(layer_key(layer, "local.W_k"))),
                                     nd::matmul(src, p.at(layer_key(layer, "local.W_v"))), seg,
                                     cfg.attn_heads);
  }
  if (cfg.use_global) {
    Value us = nd::gather_rows(u, batch.support_rows());
    std::vector<std::vector<std::size_t>> seg(batch.num_tasks(), batch.support_rows());
    z_task = nd::segment_attention(nd::matmul(u, p.at(layer_key(layer, "global.W_q"))),
                                   nd::matmul(us, p.at(layer_key(layer, "global.W_k"))),
                                   nd::matmul(us, p.at(layer_key(layer, "global.W_v"))), seg,
                                   cfg.attn_heads);
  }

  Value out = h;
  if (z_struct && z_task) {
    gate = nd::sigmoid(nd::add(nd::matmul(nd::concat_cols(z_struct, z_task),
                                          p.at(layer_key(layer, "gate.W_g"))),
                               p.at(layer_key(layer, "gate.b_g"))));
    fused = nd::add(nd::mul(z_struct, nd::affine(gate, -1.0, 1.0)), nd::mul(z_task, gate));
  } else if (z_struct) {
    fused = z_struct;
  } else if (z_task) {
    fused = z_task;
  }
  if (fused) out = nd::add(out, fused);

  Value f = nd::gelu(nd::add(nd::matmul(norm(out, p, layer_key(layer, "norm2")),
                                        p.at(layer_key(layer, "ffn.W_1"))),
                             p.at(layer_key(layer, "ffn.b_1"))));
  out = nd::add(out, nd::add(nd::matmul(f, p.at(layer_key(layer, "ffn.W_2"))),
                             p.at(layer_key(layer, "ffn.b_2"))));
  if (trace != nullptr) *trace = {z_struct, z_task, gate, fused};
  return out;
}

ReadoutResult readout(const Value& z, const EpisodeBatch& batch, const ParamStore& p,
                      const NetConfig& cfg) {
  const auto groups = batch.class_groups();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) {
      throw ContractError("class " + std::to_string(c) + " has no support nodes");
    }
  }
  const auto qrows = batch.query_rows();
  Value tau = nd::clamp(p.at("readout.tau"), cfg.tau_min, cfg.tau_max);
  ReadoutResult r;
  Value total;
  for (std::size_t h = 0; h < cfg.readout_heads; ++h) {
    Value proj = nd::matmul(z, p.at("readout.head" + std::to_string(h) + ".W"));
    r.head_embeddings.push_back(proj);
    Value cos = nd::cosine_rows(nd::gather_rows(proj, qrows), nd::group_mean_rows(proj, groups));
    Value scored = nd::mul(cos, nd::gather_rows(tau, {h}));
    total = total ? nd::add(total, scored) : scored;
  }
  r.logits = nd::affine(total, 1.0 / static_cast<double>(cfg.readout_heads));
  return r;
}

ForwardResult forward_batch(const EpisodeBatch& batch, const ParamStore& p, const NetConfig& cfg) {
  Tokens t = init_tokens(batch, p, cfg);
  ForwardResult res;
  Value h = t.task;
  res.layers.resize(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    h = dual_context_layer(h, t.neighbors, batch, p, cfg, l, &res.layers[l]);
  }
  ReadoutResult r = readout(norm(h, p, "final_norm"), batch, p, cfg);
  res.logits = r.logits;
  res.head_embeddings = std::move(r.head_embeddings);
  return res;
}

ForwardResult forward_episode(const Episode& ep, const GraphStore& g, const Matrix& source,
                              const ParamStore& p, const NetConfig& cfg, Mode mode, Rng& rng) {
  const std::uint64_t sampling_seed = rng();
  EpisodeBatch b = build_batch(ep, g, source, cfg, sampling_seed, mode, &rng);
  return forward_batch(b, p, cfg);
}

}  // namespace vision
