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

// Acceptance gate: one PASS/FAIL/SKIP line per criterion.
//   vision_acceptance [--criterion N]
// Exit status with --criterion: 0 pass, 1 fail, 77 skip.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "support.hpp"
#include "vision/adaptive_features.hpp"
#include "vision/cli.hpp"
#include "vision/error.hpp"
#include "vision/kernels.hpp"
#include "vision/losses.hpp"
#include "vision/ndmath/checkpoint.hpp"
#include "vision/synthetic.hpp"
#include "vision/task_forge.hpp"
#include "vision/train_eval.hpp"

namespace fs = std::filesystem;
using namespace vision;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

fs::path data_root() {
  const char* env = std::getenv("VISION_DATA_DIR");
  return env ? fs::path(env) : fs::path();
}

bool has_dataset(const std::string& name) {
  const fs::path root = data_root();
  return !root.empty() && fs::exists(root / name / "features.txt") &&
         fs::exists(root / name / "edges.txt") && fs::exists(root / name / "labels.txt");
}

GraphStore load_dataset(const std::string& name) {
  const fs::path d = data_root() / name;
  return load_graph(d / "features.txt", d / "edges.txt", d / "labels.txt");
}

fs::path split_file(const std::string& name) {
  return fs::path(VISION_SOURCE_DIR) / "data" / "splits" / (name + ".txt");
}

// ---- 1 ---------------------------------------------------------------------

Outcome anchor_closed_form() {
  struct Case {
    std::size_t c, n;
    double expected;
  };
  const Case cases[] = {{7, 2, 0.8571}, {40, 5, 0.7711}, {70, 5, 0.8641}};
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  for (const Case& k : cases) {
    std::ostringstream out, err;
    const int rc = run_cli({"verify-anchors", "--classes", std::to_string(k.c), "--ways",
                            std::to_string(k.n)},
                           out, err);
    const double p = std::stod(out.str());
    const bool hit = rc == 0 && std::fabs(std::round(p * 1e4) / 1e4 - k.expected) < 1e-9;
    ok = ok && hit;
    detail += "C=" + std::to_string(k.c) + ",N=" + std::to_string(k.n) + " -> " +
              num("%.4f", p) + " ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 1.0;
  return {ok ? Verdict::kPass : Verdict::kFail, detail + "in " + num("%.3f", secs) + " s"};
}

// ---- 2 ---------------------------------------------------------------------

GraphStore labels_only_graph(const std::vector<std::size_t>& histogram) {
  std::vector<ClassId> labels;
  for (std::size_t c = 0; c < histogram.size(); ++c) labels.insert(labels.end(), histogram[c], static_cast<ClassId>(c));
  Matrix x(labels.size(), 1, 1.0);
  return GraphStore::make(std::move(x), {}, std::move(labels));
}

Outcome anchor_diversity() {
  struct Target {
    std::string name;
    std::size_t ways;
    double table;
    std::vector<std::size_t> published_counts;
  };
  const std::vector<Target> targets = {
      {"cora", 2, 1.63, {351, 217, 418, 818, 426, 298, 180}},
      {"citeseer", 2, 1.50, {264, 590, 668, 701, 596, 508}},
      {"cora_ml", 2, 1.66, {}},
      {"corafull", 5, 4.64, {}},
  };
  std::string detail;
  bool any_real = false, ok = true;
  for (const Target& t : targets) {
    const bool real = has_dataset(t.name);
    if (!real && t.published_counts.empty()) {
      detail += t.name + ": no data; ";
      continue;
    }
    const GraphStore g = real ? load_dataset(t.name) : labels_only_graph(t.published_counts);
    Rng rng = make_rng(2024);
    const auto t0 = Clock::now();
    const DiversityStats st = anchor_diversity_monte_carlo(g, t.ways, 10000, rng);
    const double secs = seconds_since(t0);
    const bool hit = std::fabs(st.mean_distinct - t.table) <= 0.05 && secs < 10.0;
    if (real) {
      any_real = true;
      ok = ok && hit;
    }
    detail += t.name + (real ? "" : " (published class counts)") + ": " +
              num("%.4f", st.mean_distinct) + " vs " + num("%.2f", t.table) +
              (hit ? " within" : " outside") + " 0.05; ";
  }
  if (!any_real) {
    return {Verdict::kSkip, "no label files under VISION_DATA_DIR; " + detail};
  }
  return {ok ? Verdict::kPass : Verdict::kFail, detail};
}

// ---- 3 ---------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  GraphStore g = fixtures::random_graph(16, 0.25, 8, 2, 3);
  Episode ep = fixtures::labeled_episode(g, 2, 2, 2, 3);
  NetConfig net = fixtures::tiny_net(8);
  Rng init = make_rng(3, 1);
  nd::ParamStore params = init_params(net, init);
  const EpisodeBatch batch = build_batch(ep, g, g.features(), net, 11, Mode::kEval, nullptr);
  LossWeights w;
  std::string worst_name;
  const double worst = fixtures::worst_gradient_error(
      params,
      [&] { return episode_loss(forward_batch(batch, params, net), batch, ep.query_truth, w).total; },
      1e-4, &worst_name);
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-4 && secs < 30.0;
  return {ok ? Verdict::kPass : Verdict::kFail,
          std::to_string(params.size()) + " tensors, worst rel err " + num("%.2e", worst) + " (" +
              worst_name + ") in " + num("%.2f", secs) + " s"};
}

// ---- 4 ---------------------------------------------------------------------

Outcome permutation_invariance() {
  GraphStore g = fixtures::random_graph(150, 0.04, 16, 5, 4);
  NetConfig net;
  net.in_dim = 16;
  Rng init = make_rng(4, 1);
  nd::ParamStore params = init_params(net, init);
  ClassSplit split;
  for (ClassId c = 0; c < 5; ++c) split.test_classes.push_back(c);
  const ClassIndex index = build_class_index(g);
  Rng rng = make_rng(4, 2);
  nd::NoGradGuard ng;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<std::size_t> nw(2, 5), ks(1, 5), ms(1, 4);
    Episode ep = gen_eval_episode(index, split, Phase::kTest, nw(rng), ks(rng), ms(rng), rng);
    Episode perm = ep;
    std::shuffle(perm.support.begin(), perm.support.end(), rng);
    std::vector<std::size_t> order(ep.query.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      perm.query[i] = ep.query[order[i]];
      perm.query_truth[i] = ep.query_truth[order[i]];
    }
    const std::uint64_t seed = rng();
    const Matrix a = forward_batch(build_batch(ep, g, g.features(), net, seed, Mode::kEval, nullptr),
                                   params, net).logits.data();
    const Matrix b = forward_batch(build_batch(perm, g, g.features(), net, seed, Mode::kEval, nullptr),
                                   params, net).logits.data();
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t k = 0; k < a.cols; ++k) {
        worst = std::max(worst, std::fabs(a(order[i], k) - b(i, k)));
      }
    }
  }
  return {worst < 1e-6 ? Verdict::kPass : Verdict::kFail,
          "100 episodes, max logit deviation " + num("%.3e", worst)};
}

// ---- 5 ---------------------------------------------------------------------

Outcome sgc_oracle() {
  Rng rng = make_rng(5);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  std::uniform_real_distribution<double> dens(0.0, 0.2);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    GraphStore g = fixtures::random_graph(size(rng), dens(rng), 7, 3, 500 + t);
    const Matrix fast = smooth(g);
    const Matrix ref = fixtures::dense_smooth(g);
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
      worst = std::max(worst, std::fabs(fast.data[i] - ref.data[i]));
    }
  }
  return {worst <= 1e-10 ? Verdict::kPass : Verdict::kFail,
          "50 graphs, max abs deviation " + num("%.3e", worst)};
}

// ---- 6 ---------------------------------------------------------------------

Outcome gate_invariants() {
  GraphStore base = fixtures::random_graph(120, 0.05, 10, 3, 6);
  Matrix x = base.features();
  for (std::size_t v = 0; v < x.rows; v += 7) {
    for (double& e : x.row(v)) e = 0.0;
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId v = 0; v < base.num_nodes(); ++v) {
    for (NodeId u : base.neighbors(v)) {
      if (v < u) edges.emplace_back(v, u);
    }
  }
  GraphStore g = GraphStore::make(x, edges, base.labels());
  AdaptiveFeatures af = fuse(g);
  bool ok = true;
  double worst_combo = 0.0;
  std::size_t zero_rows = 0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const double gv = af.gate[v];
    ok = ok && std::isfinite(gv) && gv >= 0.0 && gv <= 1.0;
    for (std::size_t j = 0; j < g.num_features(); ++j) {
      const double want = (1.0 - gv) * x(v, j) + gv * af.x_smooth(v, j);
      ok = ok && std::isfinite(af.x_task(v, j));
      worst_combo = std::max(worst_combo, std::fabs(af.x_task(v, j) - want));
    }
    if (v % 7 == 0) {
      ++zero_rows;
      ok = ok && gv == 0.5;
    }
  }
  ok = ok && worst_combo == 0.0;
  return {ok ? Verdict::kPass : Verdict::kFail,
          "gates in [0,1], convex-combination deviation " + num("%.1e", worst_combo) + ", " +
              std::to_string(zero_rows) + " zero rows at g=0.5"};
}

// ---- 7 and 9 ----------------------------------------------------------------

struct ToyRun {
  double accuracy = 0.0;      // adaptive-feature input, as in validation
  double raw_accuracy = 0.0;  // raw-feature input
  double seconds = 0.0;
};

ToyRun train_and_score(const ClusterGraph& toy, const NetConfig& net, std::size_t episodes,
                       std::uint64_t seed, std::size_t runs, std::size_t eval_episodes) {
  const auto t0 = Clock::now();
  AdaptiveFeatures af = fuse(toy.graph);
  TrainConfig tc;
  tc.episodes_total = episodes;
  tc.eval_every = 100;
  tc.val_episodes = 50;
  tc.seed = seed;
  Rng init = make_rng(seed, 1);
  TrainResult r = train(toy.graph, af, &toy.split, init_params(net, init), net, tc);
  EvalConfig ec;
  ec.n_way = 2;
  ec.k_shot = 5;
  ec.m_query = 10;
  ec.runs = runs;
  ec.episodes = eval_episodes;
  ec.phase = Phase::kVal;
  ec.seed = seed + 1000;
  ec.raw_features = false;
  EvalReport rep = meta_test(toy.graph, &af, toy.split, r.best, net, ec);
  const double secs = seconds_since(t0);
  ec.raw_features = true;
  EvalReport raw = meta_test(toy.graph, &af, toy.split, r.best, net, ec);
  return {rep.mean, raw.mean, secs};
}

Outcome toy_convergence() {
  ClusterGraphConfig cfg;
  cfg.seed = 7;
  ClusterGraph toy = make_cluster_graph(cfg);
  NetConfig net;
  net.in_dim = cfg.dim;
  ToyRun run = train_and_score(toy, net, 500, 7, 5, 100);
  const bool ok = run.accuracy >= 0.95 && run.seconds < 300.0;
  return {ok ? Verdict::kPass : Verdict::kFail,
          "2-way 5-shot val accuracy " + num("%.4f", run.accuracy) + " after 500 episodes in " +
              num("%.1f", run.seconds) + " s (raw-feature input " + num("%.4f", run.raw_accuracy) + ")"};
}

// The criterion 7 graph with Gaussian noise added to every feature.
ClusterGraph noisy_toy(double noise_std) {
  ClusterGraphConfig cfg;
  cfg.seed = 9;
  ClusterGraph toy = make_cluster_graph(cfg);
  Matrix x = toy.graph.features();
  Rng rng = make_rng(9, 77);
  std::normal_distribution<double> noise(0.0, noise_std);
  for (double& v : x.data) v += noise(rng);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId v = 0; v < toy.graph.num_nodes(); ++v) {
    for (NodeId u : toy.graph.neighbors(v)) {
      if (v < u) edges.emplace_back(v, u);
    }
  }
  toy.graph = GraphStore::make(std::move(x), edges, toy.graph.labels());
  return toy;
}

Outcome ablation_direction() {
  const double noise_std = 2.5;
  const std::size_t episodes = 1500;
  ClusterGraph toy = noisy_toy(noise_std);
  NetConfig net;
  net.in_dim = toy.graph.num_features();
  const std::vector<std::pair<std::string, Ablation>> variants = {
      {"full", {}},
      {"no_local", {true, false, false}},
      {"no_global", {false, true, false}},
      {"no_task_context", {false, false, true}},
      {"no_both", {true, true, false}},
  };
  std::string detail = "noise std " + num("%.1f", noise_std) + ", " + std::to_string(episodes) +
                       " training episodes: ";
  std::vector<double> acc;
  for (const auto& [name, a] : variants) {
    ToyRun r = train_and_score(toy, apply_ablation(net, a), episodes, 9, 5, 100);
    acc.push_back(r.accuracy);
    detail += name + " " + num("%.4f", r.accuracy) + "; ";
  }
  bool ok = true;
  for (std::size_t i = 1; i <= 3; ++i) ok = ok && acc[0] > acc[i] && acc[i] > acc[4];
  return {ok ? Verdict::kPass : Verdict::kFail, detail};
}

// ---- 8 ---------------------------------------------------------------------

Outcome real_dataset_accuracy() {
  struct Target {
    std::string name;
    std::size_t k_shot;
    double floor;
  };
  const Target targets[] = {{"cora", 5, 0.80}, {"citeseer", 3, 0.65}};
  std::string detail;
  bool ok = true, ran = false;
  for (const Target& t : targets) {
    if (!has_dataset(t.name)) {
      detail += t.name + ": no data; ";
      continue;
    }
    ran = true;
    GraphStore g = load_dataset(t.name);
    ClassSplit split = load_split(split_file(t.name), g);
    AdaptiveFeatures af = fuse(g);
    NetConfig net;
    net.in_dim = g.num_features();
    TrainConfig tc;
    tc.tasks.k_shot = t.k_shot;
    Rng init = make_rng(0, 1);
    TrainResult r = train(g, af, &split, init_params(net, init), net, tc);
    EvalConfig ec;
    ec.k_shot = t.k_shot;
    EvalReport rep = meta_test(g, &af, split, r.best, net, ec, t.name);
    ok = ok && rep.mean >= t.floor;
    detail += report_table_row(rep) + "; ";
  }
  if (!ran) return {Verdict::kSkip, "datasets absent under VISION_DATA_DIR; " + detail};
  return {ok ? Verdict::kPass : Verdict::kFail, detail};
}

// ---- 10 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "vision_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir / "graph");
  ClusterGraphConfig cfg;
  cfg.clusters = 6;
  cfg.nodes = 240;
  cfg.seed = 10;
  ClusterGraph toy = make_cluster_graph(cfg);
  write_graph(toy.graph, dir / "graph" / "features.txt", dir / "graph" / "edges.txt",
              dir / "graph" / "labels.txt");
  std::ofstream(dir / "split.txt") << "train: 0,1\nval: 2,3\ntest: 4,5\n";
  auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    if (run_cli(args, out, err) != 0) throw std::runtime_error(err.str());
  };
  std::vector<std::uint64_t> ck_hash;
  std::vector<std::string> reports;
  for (int i = 0; i < 2; ++i) {
    const std::string ck = (dir / "model.ckpt").string();
    const std::string res = (dir / "result.json").string();
    cli({"train", "--data", (dir / "graph").string(), "--split", (dir / "split.txt").string(),
         "--seed", "1", "--episodes", "40", "--eval-every", "20", "--val-episodes", "10",
         "--hidden-dim", "32", "--ffn-dim", "64", "--out", ck});
    cli({"eval", "--data", (dir / "graph").string(), "--split", (dir / "split.txt").string(),
         "--seed", "1", "--checkpoint", ck, "--n-way", "2", "--runs", "2", "--eval-episodes", "20",
         "--result", res});
    ck_hash.push_back(nd::file_hash(ck));
    reports.push_back(slurp(res));
  }
  const bool ok = ck_hash[0] == ck_hash[1] && reports[0] == reports[1];
  fs::remove_all(dir);
  return {ok ? Verdict::kPass : Verdict::kFail,
          std::string("checkpoint hashes ") + (ck_hash[0] == ck_hash[1] ? "equal" : "differ") +
              ", reports " + (reports[0] == reports[1] ? "equal" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-10)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"anchor probability closed form", anchor_closed_form},
      {"anchor diversity Monte Carlo", anchor_diversity},
      {"gradient oracle", gradient_oracle},
      {"permutation invariance", permutation_invariance},
      {"SGC oracle", sgc_oracle},
      {"gate and fusion invariants", gate_invariants},
      {"separable toy convergence", toy_convergence},
      {"real-dataset accuracy", real_dataset_accuracy},
      {"ablation direction", ablation_direction},
      {"determinism", determinism},
  };
  int failures = 0;
  Verdict last = Verdict::kPass;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    while (!o.detail.empty() && (o.detail.back() == ' ' || o.detail.back() == ';')) o.detail.pop_back();
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
    std::cout << "criterion " << (i + 1) << " [" << criteria[i].first << "]: " << tag << " ("
              << o.detail << ")" << std::endl;
    if (o.verdict == Verdict::kFail) ++failures;
    last = o.verdict;
  }
  if (only != 0 && last == Verdict::kSkip) return 77;
  return failures == 0 ? 0 : 1;
}
