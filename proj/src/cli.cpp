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

#include "vision/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "vision/adaptive_features.hpp"
#include "vision/config.hpp"
#include "vision/context_net.hpp"
#include "vision/error.hpp"
#include "vision/graph_store.hpp"
#include "vision/ndmath/checkpoint.hpp"
#include "vision/random.hpp"
#include "vision/task_forge.hpp"
#include "vision/train_eval.hpp"

namespace vision {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kInitStream = 1;

std::string fixed(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Phase parse_phase(const std::string& s) {
  if (s == "train") return Phase::kTrain;
  if (s == "val") return Phase::kVal;
  if (s == "test") return Phase::kTest;
  throw ConfigError("unknown phase '" + s + "' (train, val, test)");
}

// Options shared by every subcommand, plus the names of boolean flags so a
// config file can switch them on.
struct Registry {
  std::set<std::string> flags;
  std::string config_path;

  void flag(CLI::App* app, const std::string& name, bool& target, const std::string& desc) {
    app->add_flag("--" + name, target, desc);
    flags.insert(name);
  }
};

struct DataOpts {
  std::string dir;
  std::string features;
  std::string edges;
  std::string labels;
  std::string split;
  std::string cache;
  std::string name;

  void add(CLI::App* app) {
    app->add_option("--data", dir, "Directory holding features.txt, edges.txt, labels.txt");
    app->add_option("--features", features, "Features file");
    app->add_option("--edges", edges, "Edges file");
    app->add_option("--labels", labels, "Labels file");
    app->add_option("--split", split, "Class split file");
    app->add_option("--cache", cache, "Adaptive-feature cache file");
    app->add_option("--dataset", name, "Dataset name used in reports");
  }

  bool has_graph() const { return !dir.empty() || !features.empty(); }

  GraphStore load() const {
    if (!has_graph()) throw ConfigError("no graph given: use --data or --features/--edges/--labels");
    auto pick = [&](const std::string& explicit_path, const char* file) {
      if (!explicit_path.empty()) return fs::path(explicit_path);
      if (dir.empty()) throw ConfigError(std::string("missing path for ") + file);
      return fs::path(dir) / file;
    };
    return load_graph(pick(features, "features.txt"), pick(edges, "edges.txt"),
                      pick(labels, "labels.txt"));
  }

  ClassSplit load_split_for(const GraphStore& g) const {
    if (split.empty()) throw ConfigError("--split is required");
    return vision::load_split(split, g);
  }

  fs::path cache_path() const {
    if (!cache.empty()) return cache;
    if (!dir.empty()) return fs::path(dir) / "adaptive.cache";
    return {};
  }

  AdaptiveFeatures adaptive(const GraphStore& g) const {
    const fs::path p = cache_path();
    return p.empty() ? fuse(g) : load_or_fuse(g, p);
  }

  std::string display_name() const {
    if (!name.empty()) return name;
    if (!dir.empty()) return fs::path(dir).filename().string();
    return "";
  }
};

void add_net_opts(CLI::App* app, NetConfig& net) {
  app->add_option("--hidden-dim", net.hidden_dim, "Token width")->capture_default_str();
  app->add_option("--attn-heads", net.attn_heads, "Attention heads")->capture_default_str();
  app->add_option("--layers", net.num_layers, "Dual-context layers")->capture_default_str();
  app->add_option("--ffn-dim", net.ffn_dim, "Feed-forward width")->capture_default_str();
  app->add_option("--readout-heads", net.readout_heads, "Readout heads")->capture_default_str();
  app->add_option("--readout-dim", net.readout_dim, "Per-head readout width")->capture_default_str();
  app->add_option("--k-neigh", net.k_neigh, "Sampled neighbors per node")->capture_default_str();
  app->add_option("--max-n-way", net.max_n_way, "Role table size")->capture_default_str();
  app->add_option("--tau-init", net.tau_init, "Initial readout temperature")->capture_default_str();
  app->add_option("--noise", net.noise_std, "Training input noise std")->capture_default_str();
}

void add_ablation_opts(Registry& reg, CLI::App* app, Ablation& a) {
  reg.flag(app, "no-local", a.no_local, "Disable local structural attention");
  reg.flag(app, "no-global", a.no_global, "Disable global task attention");
  reg.flag(app, "no-task-context", a.no_task_context, "Replace role embeddings with the mask");
}

void add_train_opts(CLI::App* app, TrainConfig& t) {
  app->add_option("--episodes", t.episodes_total, "Training pseudo-tasks")->capture_default_str();
  app->add_option("--lr", t.lr, "Peak learning rate")->capture_default_str();
  app->add_option("--weight-decay", t.weight_decay, "AdamW weight decay")->capture_default_str();
  app->add_option("--lambda", t.loss.contrastive_weight, "Contrastive loss weight")
      ->capture_default_str();
  app->add_option("--epsilon", t.loss.label_smoothing, "Label smoothing")->capture_default_str();
  app->add_option("--tau", t.loss.contrastive_temperature, "Contrastive temperature")
      ->capture_default_str();
  app->add_option("--pool", t.tasks.pool_size, "Candidate pool size")->capture_default_str();
  app->add_option("--train-n-way", t.tasks.n_way, "Pseudo-task ways")->capture_default_str();
  app->add_option("--train-k-shot", t.tasks.k_shot, "Pseudo-task shots")->capture_default_str();
  app->add_option("--train-m-query", t.tasks.m_query, "Pseudo-task queries per class")
      ->capture_default_str();
  app->add_option("--eval-every", t.eval_every, "Validation interval")->capture_default_str();
  app->add_option("--val-episodes", t.val_episodes, "Validation episodes")->capture_default_str();
}

void add_eval_opts(CLI::App* app, EvalConfig& e, std::string& phase) {
  app->add_option("--n-way", e.n_way, "Ways")->capture_default_str();
  app->add_option("--k-shot", e.k_shot, "Shots")->capture_default_str();
  app->add_option("--m-query", e.m_query, "Queries per class")->capture_default_str();
  app->add_option("--runs", e.runs, "Independent runs")->capture_default_str();
  app->add_option("--eval-episodes", e.episodes, "Episodes per run")->capture_default_str();
  app->add_option("--phase", phase, "Class group to evaluate on")->capture_default_str();
}

void add_seed(CLI::App* app, std::uint64_t& seed) {
  app->add_option("--seed", seed, "Random seed")->envname("VISION_SEED")->capture_default_str();
}

KeyValues echo_options(const CLI::App* app) {
  KeyValues kv;
  kv["command"] = app->get_name();
  for (const CLI::Option* o : app->get_options()) {
    const std::string name = o->get_single_name();
    if (name == "help") continue;
    if (o->count() > 0) {
      std::string joined;
      for (const auto& r : o->results()) joined += (joined.empty() ? "" : ",") + r;
      kv[name] = joined.empty() ? "true" : joined;
    } else {
      kv[name] = o->get_default_str();
    }
  }
  return kv;
}

bool flag_given(const std::vector<std::string>& args, const std::string& name) {
  const std::string f = "--" + name;
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == f || a.rfind(f + "=", 0) == 0; });
}

// Prepends `--key value` for every config-file entry not given on the
// command line.
std::vector<std::string> merge_config(const CLI::App& app, const Registry& reg,
                                      std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands({})) {
    if (s->get_name() == args[0]) sub = s;
  }
  if (sub == nullptr) return args;
  std::vector<std::string> injected{args[0]};
  for (const auto& [raw_key, value] : load_key_values(path)) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (sub->get_option_no_throw("--" + key) == nullptr) {
      throw ConfigError(path + ": unknown key '" + key + "' for " + args[0]);
    }
    if (flag_given(args, key)) continue;
    if (reg.flags.count(key)) {
      if (value == "true" || value == "1") injected.push_back("--" + key);
      continue;
    }
    injected.push_back("--" + key);
    injected.push_back(value);
  }
  injected.insert(injected.end(), args.begin() + 1, args.end());
  return injected;
}

struct Model {
  nd::ParamStore params;
  NetConfig net;
  nd::CheckpointMeta meta;
};

Model load_model(const std::string& path, const GraphStore& g) {
  nd::Checkpoint ck = nd::load_checkpoint(path);
  Model m{std::move(ck.params), NetConfig::from_kv(parse_key_values(ck.meta.config_text, path)),
          ck.meta};
  m.net.validate();
  if (m.net.hash() != m.meta.config_hash) throw ValidationError(path + ": config hash mismatch");
  if (m.net.in_dim != g.num_features()) {
    throw ConfigError("checkpoint expects " + std::to_string(m.net.in_dim) +
                      " features, graph has " + std::to_string(g.num_features()));
  }
  return m;
}

void write_text(const std::string& path, const std::string& text, bool append = false) {
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
}

TrainResult train_variant(const GraphStore& g, const AdaptiveFeatures& af, const ClassSplit* split,
                          const NetConfig& net, const TrainConfig& tc, std::ostream& err) {
  Rng init = make_rng(tc.seed, kInitStream);
  return train(g, af, split, init_params(net, init), net, tc,
               [&err](const std::string& line) { err << line << "\n"; });
}

}  // namespace

int run_cli(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot node classification by unsupervised meta-training", "vision"};
  app.require_subcommand(1);
  Registry reg;

  DataOpts data;
  NetConfig net;
  TrainConfig tc;
  EvalConfig ec;
  Ablation abl;
  std::string phase = "test";
  std::uint64_t seed = 0;
  std::string checkpoint, out_path, log_path, result_path, table_path, mode = "pseudo";
  std::size_t count = 10, classes = 0, ways = 0, trials = 10000;
  bool adaptive_input = false;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", reg.config_path, "key = value defaults file");
    add_seed(s, seed);
  };

  CLI::App* prepare = app.add_subcommand("prepare", "Build the adaptive-feature cache");
  data.add(prepare);
  common(prepare);

  CLI::App* train_cmd = app.add_subcommand("train", "Meta-train on pseudo-tasks");
  data.add(train_cmd);
  common(train_cmd);
  add_net_opts(train_cmd, net);
  add_train_opts(train_cmd, tc);
  add_ablation_opts(reg, train_cmd, abl);
  train_cmd->add_option("--out", out_path, "Checkpoint to write")->required();
  train_cmd->add_option("--log", log_path, "Training log (CSV)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Fine-tuning-free episodic evaluation");
  data.add(eval_cmd);
  common(eval_cmd);
  add_eval_opts(eval_cmd, ec, phase);
  eval_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  eval_cmd->add_option("--result", result_path, "Result record (JSON)");
  eval_cmd->add_option("--table", table_path, "Append a table row to this file");
  reg.flag(eval_cmd, "adaptive-input", adaptive_input, "Feed adaptive instead of raw features");

  CLI::App* gen = app.add_subcommand("gen-tasks", "Write episodes as JSON lines");
  data.add(gen);
  common(gen);
  gen->add_option("--mode", mode, "pseudo or labeled")->capture_default_str();
  gen->add_option("--count", count, "Episodes")->capture_default_str();
  gen->add_option("--n-way", ec.n_way, "Ways")->capture_default_str();
  gen->add_option("--k-shot", ec.k_shot, "Shots")->capture_default_str();
  gen->add_option("--m-query", ec.m_query, "Queries per class")->capture_default_str();
  gen->add_option("--pool", tc.tasks.pool_size, "Candidate pool size")->capture_default_str();
  gen->add_option("--phase", phase, "Class group for labeled episodes")->capture_default_str();
  gen->add_option("--out", out_path, "Output file (default stdout)");

  CLI::App* anchors = app.add_subcommand("verify-anchors", "Anchor class-diversity statistics");
  data.add(anchors);
  common(anchors);
  anchors->add_option("--classes", classes, "Number of equally likely classes");
  anchors->add_option("--ways", ways, "Anchors per task");
  anchors->add_option("--trials", trials, "Monte Carlo draws")->capture_default_str();

  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation variants");
  data.add(ablate);
  common(ablate);
  add_net_opts(ablate, net);
  add_train_opts(ablate, tc);
  add_eval_opts(ablate, ec, phase);
  ablate->add_option("--result", result_path, "Result records (JSON)");

  try {
    std::vector<std::string> args = merge_config(app, reg, args_in);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    tc.seed = seed;
    ec.seed = seed;
    if (prepare->parsed()) {
      GraphStore g = data.load();
      if (data.cache_path().empty()) throw ConfigError("prepare needs --cache or --data");
      AdaptiveFeatures af = load_or_fuse(g, data.cache_path());
      double mean_gate = 0.0;
      for (double x : af.gate) mean_gate += x;
      mean_gate /= static_cast<double>(std::max<std::size_t>(af.gate.size(), 1));
      out << "nodes " << g.num_nodes() << " features " << g.num_features() << " edges "
          << g.num_edges() << " mean_gate " << fixed("%.6f", mean_gate) << " cache "
          << data.cache_path().string() << "\n";
    } else if (train_cmd->parsed()) {
      GraphStore g = data.load();
      AdaptiveFeatures af = data.adaptive(g);
      std::optional<ClassSplit> split;
      if (!data.split.empty()) split = data.load_split_for(g);
      net.in_dim = g.num_features();
      const NetConfig used = apply_ablation(net, abl);
      TrainResult r = train_variant(g, af, split ? &*split : nullptr, used, tc, err);
      KeyValues text = used.to_kv();
      for (const auto& [k, v] : echo_options(train_cmd)) text["flag." + k] = v;
      nd::save_checkpoint(out_path, r.best, {used.hash(), seed, format_key_values(text)});
      if (!log_path.empty()) {
        std::string csv = "step,lr,loss_total,loss_ce,loss_contrastive\n";
        for (const auto& e : r.log) {
          csv += std::to_string(e.step) + "," + fixed("%.17g", e.lr) + "," +
                 fixed("%.17g", e.loss_total) + "," + fixed("%.17g", e.loss_ce) + "," +
                 fixed("%.17g", e.loss_contrastive) + "\n";
        }
        write_text(log_path, csv);
      }
      out << "checkpoint " << out_path << " hash " << hex(nd::file_hash(out_path)) << " best_step "
          << r.best_step;
      if (r.best_val >= 0.0) out << " best_val " << fixed("%.4f", r.best_val);
      out << "\n";
    } else if (eval_cmd->parsed()) {
      GraphStore g = data.load();
      ClassSplit split = data.load_split_for(g);
      Model m = load_model(checkpoint, g);
      ec.phase = parse_phase(phase);
      ec.raw_features = !adaptive_input;
      std::optional<AdaptiveFeatures> af;
      if (adaptive_input) af = data.adaptive(g);
      EvalReport rep = meta_test(g, af ? &*af : nullptr, split, m.params, m.net, ec,
                                 data.display_name());
      KeyValues echo = echo_options(eval_cmd);
      echo["checkpoint_hash"] = hex(nd::file_hash(checkpoint));
      const std::string json = report_to_json(rep, echo);
      if (result_path.empty()) {
        out << json << "\n";
      } else {
        write_text(result_path, json + "\n");
      }
      if (!table_path.empty()) write_text(table_path, report_table_row(rep) + "\n", true);
      out << report_table_row(rep) << "\n";
    } else if (gen->parsed()) {
      GraphStore g = data.load();
      Rng rng = make_rng(seed);
      std::string lines;
      if (mode == "pseudo") {
        AdaptiveFeatures af = data.adaptive(g);
        TaskGenConfig tg = tc.tasks;
        tg.n_way = ec.n_way;
        tg.k_shot = ec.k_shot;
        tg.m_query = ec.m_query;
        for (std::size_t i = 0; i < count; ++i) {
          lines += episode_to_json(gen_pseudo_task_retry(af, tg, rng)) + "\n";
        }
      } else if (mode == "labeled") {
        ClassSplit split = data.load_split_for(g);
        const ClassIndex index = build_class_index(g);
        for (std::size_t i = 0; i < count; ++i) {
          lines += episode_to_json(gen_eval_episode(index, split, parse_phase(phase), ec.n_way,
                                                    ec.k_shot, ec.m_query, rng)) +
                   "\n";
        }
      } else {
        throw ConfigError("unknown mode '" + mode + "' (pseudo, labeled)");
      }
      if (out_path.empty()) {
        out << lines;
      } else {
        write_text(out_path, lines);
      }
    } else if (anchors->parsed()) {
      if (classes > 0 && ways > 0) {
        out << fixed("%.6f", anchor_distinct_probability(classes, ways)) << "\n";
      } else if (!data.has_graph()) {
        out << "classes\tways\tp_distinct\texpected_distinct\n";
        for (auto [c, n] : {std::pair<std::size_t, std::size_t>{7, 2}, {40, 5}, {70, 5}}) {
          // Expected distinct classes among n uniform draws from c classes.
          const double expected =
              static_cast<double>(c) *
              (1.0 - std::pow(1.0 - 1.0 / static_cast<double>(c), static_cast<double>(n)));
          out << c << "\t" << n << "\t" << fixed("%.6f", anchor_distinct_probability(c, n)) << "\t"
              << fixed("%.4f", expected) << "\n";
        }
      }
      if (data.has_graph()) {
        if (ways == 0) throw ConfigError("--ways is required for the Monte Carlo estimate");
        GraphStore g = data.load();
        Rng rng = make_rng(seed);
        DiversityStats st = anchor_diversity_monte_carlo(g, ways, trials, rng);
        out << "dataset " << data.display_name() << " ways " << ways << " trials " << st.trials
            << " mean_distinct " << fixed("%.4f", st.mean_distinct) << " excluded_unlabeled "
            << st.excluded_unlabeled << "\n";
      }
    } else if (ablate->parsed()) {
      GraphStore g = data.load();
      ClassSplit split = data.load_split_for(g);
      AdaptiveFeatures af = data.adaptive(g);
      net.in_dim = g.num_features();
      ec.phase = parse_phase(phase);
      const std::vector<std::pair<std::string, Ablation>> variants = {
          {"full", {}},
          {"no_local", {true, false, false}},
          {"no_global", {false, true, false}},
          {"no_task_context", {false, false, true}},
          {"no_local_no_global", {true, true, false}},
      };
      nlohmann::ordered_json all = nlohmann::ordered_json::array();
      for (const auto& [name, a] : variants) {
        const NetConfig used = apply_ablation(net, a);
        TrainResult r = train_variant(g, af, &split, used, tc, err);
        EvalReport rep = meta_test(g, &af, split, r.best, used, ec, name);
        KeyValues echo = echo_options(ablate);
        echo["variant"] = name;
        all.push_back(nlohmann::ordered_json::parse(report_to_json(rep, echo)));
        out << report_table_row(rep) << "\n";
      }
      if (!result_path.empty()) write_text(result_path, all.dump(2) + "\n");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace vision
