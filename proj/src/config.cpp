// Copyright 2026 The MCAKD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mcakd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "mcakd/error.hpp"
#include "mcakd/hash.hpp"
#include "mcakd/json_io.hpp"

namespace mcakd {

namespace {

using nlohmann::json;

json toml_to_json(const toml::node& node) {
  if (auto* tbl = node.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *tbl) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (auto* arr = node.as_array()) {
    json j = json::array();
    for (const auto& v : *arr) j.push_back(toml_to_json(v));
    return j;
  }
  if (auto v = node.value<std::int64_t>(); v && node.is_integer()) return *v;
  if (auto v = node.value<double>(); v && node.is_floating_point()) return *v;
  if (auto v = node.value<bool>()) return *v;
  if (auto v = node.value<std::string>()) return *v;
  fail(ErrorKind::Config, "unsupported TOML value type");
}

// Reads keys from one table and rejects any key it was not asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    require(j_.is_object(), ErrorKind::Config, "[" + name_ + "] must be a table");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      require(v.is_boolean(), ErrorKind::Config, where(key) + " must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      require(v.is_string(), ErrorKind::Config, where(key) + " must be a string");
    } else if constexpr (std::is_integral_v<T>) {
      require(v.is_number_integer(), ErrorKind::Config, where(key) + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      require(v.is_number(), ErrorKind::Config, where(key) + " must be a number");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Config, where(key) + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) fail(ErrorKind::Config, "unknown key '" + k + "' in [" + name_ + "]");
  }

 private:
  std::string where(const char* key) const { return "[" + name_ + "]." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

void read_role(Section& s, RoleSection& r) {
  s.get("depth_enc", r.model.depth_enc);
  s.get("depth_dec", r.model.depth_dec);
  s.get("heads", r.model.heads);
  s.get("dim", r.model.dim);
  s.get("mlp_ratio", r.model.mlp_ratio);
  s.get("max_tokens", r.model.max_tokens);
  std::vector<int> patch;
  s.get("patch", patch);
  if (!patch.empty()) {
    require(patch.size() == 3, ErrorKind::Config, "patch must be [p_t, p_k, p_n]");
    r.model.patch = {patch[0], patch[1], patch[2]};
  }
  s.get("epochs", r.epochs);
  s.get("lr", r.lr);
  s.get("batch", r.batch);
  s.finish();
}

json role_json(const RoleSection& r) {
  return {{"model", r.model}, {"epochs", r.epochs}, {"lr", r.lr}, {"batch", r.batch}};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Config, std::string("config JSON parse error: ") + e.what());
    }
  } else {
    try {
      root = toml_to_json(toml::parse(text));
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << "config TOML parse error at line " << e.source().begin.line << ": "
         << e.description();
      fail(ErrorKind::Config, os.str());
    }
  }

  ExperimentConfig cfg;
  Section top(root, "root");
  top.get("name", cfg.name);
  top.get("seed", cfg.seed);
  cfg.data.gen.seed = cfg.seed;

  if (const json* j = top.sub("data")) {
    Section s(*j, "data");
    auto& g = cfg.data.gen;
    s.get("name", cfg.data.name);
    s.get("T", g.T);
    s.get("K", g.K);
    s.get("N_v", g.N_v);
    s.get("N_h_ant", g.N_h_ant);
    s.get("num_paths", g.num_paths);
    s.get("delta_t", g.delta_t);
    s.get("delta_f", g.delta_f);
    s.get("max_doppler", g.max_doppler);
    s.get("max_delay", g.max_delay);
    s.get("azimuth_min", g.azimuth_min);
    s.get("azimuth_max", g.azimuth_max);
    s.get("elevation_min", g.elevation_min);
    s.get("elevation_max", g.elevation_max);
    s.get("seed", g.seed);
    s.get("train", cfg.data.counts.train);
    s.get("val", cfg.data.counts.val);
    s.get("test", cfg.data.counts.test);
    std::string norm = to_string(cfg.data.norm);
    s.get("normalization", norm);
    cfg.data.norm = norm_mode_from_string(norm);
    s.finish();
  }
  for (auto [key, role] : {std::pair{"teacher", &cfg.teacher}, std::pair{"student", &cfg.student}}) {
    if (const json* j = top.sub(key)) {
      Section s(*j, key);
      read_role(s, *role);
    }
  }
  if (const json* j = top.sub("distill")) {
    Section s(*j, "distill");
    s.get("lambda", cfg.distill.lambda);
    s.get("attn", cfg.distill.attn);
    s.get("embed", cfg.distill.embed);
    s.get("hs", cfg.distill.hs);
    s.get("caks", cfg.distill.caks);
    s.get("caks_heads", cfg.distill.caks_heads);
    s.get("caks_dim", cfg.distill.caks_dim);
    s.finish();
  }
  if (const json* j = top.sub("schedule")) {
    Section s(*j, "schedule");
    std::string mode = "fixed";
    s.get("mode", mode);
    if (mode == "fixed") cfg.schedule.mode = AlPlSchedule::Mode::FixedCycle;
    else if (mode == "plateau") cfg.schedule.mode = AlPlSchedule::Mode::PlateauTriggered;
    else fail(ErrorKind::Config, "[schedule].mode must be 'fixed' or 'plateau'");
    s.get("n_s", cfg.schedule.n_s);
    s.get("n_d", cfg.schedule.n_d);
    s.get("window", cfg.schedule.window);
    s.get("min_delta", cfg.schedule.min_delta);
    s.get("pl_len", cfg.schedule.pl_len);
    s.finish();
  }
  if (const json* j = top.sub("train")) {
    Section s(*j, "train");
    std::vector<double> mix;
    s.get("mask_mix", mix);
    if (!mix.empty()) {
      require(mix.size() == 3, ErrorKind::Config, "[train].mask_mix needs 3 weights");
      cfg.train.mask_mix = {mix[0], mix[1], mix[2]};
    }
    s.get("ratio_random", cfg.train.ratio_random);
    s.get("ratio_time", cfg.train.ratio_time);
    s.get("ratio_freq", cfg.train.ratio_freq);
    s.get("cosine_decay", cfg.train.cosine_decay);
    s.get("beta1", cfg.train.beta1);
    s.get("beta2", cfg.train.beta2);
    s.get("threads", cfg.train.threads);
    s.finish();
  }
  if (const json* j = top.sub("eval")) {
    Section s(*j, "eval");
    s.get("time_x", cfg.eval.time_x);
    s.get("freq_x", cfg.eval.freq_x);
    s.get("split", cfg.eval.split);
    s.get("bench_batch", cfg.eval.bench_batch);
    s.get("bench_reps", cfg.eval.bench_reps);
    s.get("bench_warmup", cfg.eval.bench_warmup);
    s.finish();
  }
  if (const json* j = top.sub("tradeoff")) {
    require(j->is_array(), ErrorKind::Config, "[[tradeoff]] must be an array of tables");
    for (const auto& item : *j) {
      Section s(item, "tradeoff");
      TradeoffVersion v;
      s.get("name", v.name);
      s.get("depth_enc", v.depth_enc);
      s.get("depth_dec", v.depth_dec);
      s.get("dim", v.dim);
      s.finish();
      cfg.tradeoff.push_back(v);
    }
  }
  if (const json* j = top.sub("ablations")) {
    try {
      for (const auto& a : j->get<std::vector<std::string>>()) apply_ablation(cfg, a);
    } catch (const json::exception& e) {
      fail(ErrorKind::Config, std::string("ablations must be a list of strings: ") + e.what());
    }
  }
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void ExperimentConfig::validate() const {
  data.gen.validate();
  require(data.counts.train >= 0 && data.counts.val >= 0 && data.counts.test >= 0,
          ErrorKind::Config, "[data] split counts must be non-negative");
  require(data.counts.total() > 0, ErrorKind::Config, "[data] requests zero samples");
  for (const auto* r : {&teacher, &student}) {
    r->model.validate();
    r->model.patch.validate(data.gen.dims());
    require(r->model.patch.token_count(data.gen.dims()) >= 2, ErrorKind::Config,
            "patching leaves fewer than 2 tokens");
    require(r->epochs >= 0 && r->batch >= 1 && r->lr >= 0, ErrorKind::Config,
            "epochs >= 0, batch >= 1 and lr >= 0 required");
  }
  require(distill.lambda >= 0, ErrorKind::Config, "[distill].lambda must be >= 0");
  AlPlSchedule s = schedule;
  s.total_epochs = student.epochs;
  s.validate();
  train_config(Role::Teacher).validate();
  const auto dims = data.gen.dims();
  for (const auto& t : tasks()) t.validate(dims);
  require(eval.split == "train" || eval.split == "val" || eval.split == "test", ErrorKind::Config,
          "[eval].split must be train, val or test");
  require(eval.bench_batch >= 1 && eval.bench_reps >= 1 && eval.bench_warmup >= 0,
          ErrorKind::Config, "[eval] bench settings invalid");
  for (const auto& v : tradeoff) tradeoff_model(v).validate();
}

TrainConfig ExperimentConfig::train_config(Role role) const {
  const RoleSection& r = role == Role::Teacher ? teacher : student;
  TrainConfig t;
  t.lr = r.lr;
  t.batch = r.batch;
  t.epochs = r.epochs;
  t.beta1 = train.beta1;
  t.beta2 = train.beta2;
  t.lambda = distill.lambda;
  t.seed = seed;
  t.mask_mix = train.mask_mix;
  t.ratio_random = train.ratio_random;
  t.ratio_time = train.ratio_time;
  t.ratio_freq = train.ratio_freq;
  t.cosine_decay = train.cosine_decay;
  t.threads = train.threads;
  t.val_time_x = eval.time_x;
  t.val_freq_x = eval.freq_x;
  t.toggles.attn = distill.attn;
  t.toggles.embed = distill.embed;
  t.toggles.hs = distill.hs;
  t.toggles.select = distill.caks ? SelectMode::CrossAttention : SelectMode::Prefix;
  t.caks_heads = distill.caks_heads;
  t.caks_dim = distill.caks_dim;
  return t;
}

std::vector<TaskSpec> ExperimentConfig::tasks() const {
  const auto d = data.gen.dims();
  return {{TaskKind::Time, eval.time_x > 0 ? eval.time_x : d.T / 2},
          {TaskKind::Frequency, eval.freq_x > 0 ? eval.freq_x : d.K / 2}};
}

ModelConfig ExperimentConfig::tradeoff_model(const TradeoffVersion& v) const {
  ModelConfig m = teacher.model;
  m.depth_enc = v.depth_enc;
  m.depth_dec = v.depth_dec;
  m.dim = v.dim;
  return m;
}

json ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["data"] = {{"name", data.name},
               {"gen", data.gen},
               {"train", data.counts.train},
               {"val", data.counts.val},
               {"test", data.counts.test},
               {"normalization", to_string(data.norm)}};
  j["teacher"] = role_json(teacher);
  j["student"] = role_json(student);
  j["distill"] = {{"lambda", distill.lambda}, {"attn", distill.attn},
                  {"embed", distill.embed},   {"hs", distill.hs},
                  {"caks", distill.caks},     {"caks_heads", distill.caks_heads},
                  {"caks_dim", distill.caks_dim}};
  j["schedule"] = {
      {"mode", schedule.mode == AlPlSchedule::Mode::FixedCycle ? "fixed" : "plateau"},
      {"n_s", schedule.n_s},
      {"n_d", schedule.n_d},
      {"window", schedule.window},
      {"min_delta", schedule.min_delta},
      {"pl_len", schedule.pl_len}};
  j["train"] = {{"mask_mix", train.mask_mix},       {"ratio_random", train.ratio_random},
                {"ratio_time", train.ratio_time},   {"ratio_freq", train.ratio_freq},
                {"cosine_decay", train.cosine_decay}, {"beta1", train.beta1},
                {"beta2", train.beta2}};
  j["eval"] = {{"time_x", eval.time_x},           {"freq_x", eval.freq_x},
               {"split", eval.split},             {"bench_batch", eval.bench_batch},
               {"bench_reps", eval.bench_reps},   {"bench_warmup", eval.bench_warmup}};
  j["tradeoff"] = json::array();
  for (const auto& v : tradeoff)
    j["tradeoff"].push_back(
        {{"name", v.name}, {"depth_enc", v.depth_enc}, {"depth_dec", v.depth_dec}, {"dim", v.dim}});
  j["ablations"] = ablations;
  return j;
}

std::string ExperimentConfig::fingerprint() const { return sha256_hex(to_json().dump()); }

void apply_ablation(ExperimentConfig& cfg, const std::string& which) {
  if (which == "embed") cfg.distill.embed = false;
  else if (which == "attn") cfg.distill.attn = false;
  else if (which == "hs") cfg.distill.hs = false;
  else if (which == "caks") cfg.distill.caks = false;
  else if (which == "alpl") {
    cfg.schedule.mode = AlPlSchedule::Mode::FixedCycle;
    cfg.schedule.n_s = 0;
    cfg.schedule.n_d = 1;
  } else {
    fail(ErrorKind::Config, "unknown ablation '" + which + "' (expected embed, attn, hs, caks, alpl)");
  }
  cfg.ablations.push_back(which);
}

}  // namespace mcakd
