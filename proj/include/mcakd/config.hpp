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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcakd/csi.hpp"
#include "mcakd/model.hpp"
#include "mcakd/train.hpp"

namespace mcakd {

struct DataSection {
  std::string name = "synthetic";
  ChannelGenConfig gen;
  SplitCounts counts{2048, 256, 256};
  NormMode norm = NormMode::Global;
};

struct RoleSection {
  ModelConfig model;
  int epochs = 30;
  double lr = 5e-4;
  int batch = 64;
};

struct DistillSection {
  double lambda = 0.1;
  bool attn = true;
  bool embed = true;
  bool hs = true;
  bool caks = true;
  int caks_heads = 0;
  int caks_dim = 0;
};

// Options shared by every training run.
struct TrainSection {
  std::array<double, 3> mask_mix{1.0, 1.0, 1.0};
  double ratio_random = 0.5;
  double ratio_time = 0.5;
  double ratio_freq = 0.5;
  bool cosine_decay = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int threads = 0;
};

struct EvalSection {
  int time_x = 0;  // 0: T/2
  int freq_x = 0;  // 0: K/2
  std::string split = "test";
  int bench_batch = 8;
  int bench_reps = 20;
  int bench_warmup = 3;
};

struct TradeoffVersion {
  std::string name;
  int depth_enc = 0;
  int depth_dec = 0;
  int dim = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DataSection data;
  RoleSection teacher;
  RoleSection student;
  DistillSection distill;
  AlPlSchedule schedule;
  TrainSection train;
  EvalSection eval;
  std::vector<TradeoffVersion> tradeoff;
  std::vector<std::string> ablations;

  void validate() const;
  TrainConfig train_config(Role role) const;
  std::vector<TaskSpec> tasks() const;
  ModelConfig tradeoff_model(const TradeoffVersion& v) const;

  nlohmann::json to_json() const;
  // SHA-256 of the canonical JSON form.
  std::string fingerprint() const;
};

// Parses TOML (or JSON when the text starts with '{'); unknown keys are
// rejected with Error(Config).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Ablation presets: embed, attn, hs, caks, alpl.
void apply_ablation(ExperimentConfig& cfg, const std::string& which);

}  // namespace mcakd
