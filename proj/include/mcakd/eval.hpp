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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcakd/csi.hpp"
#include "mcakd/model.hpp"
#include "mcakd/tokenize.hpp"

namespace mcakd {

// Floor returned for (numerically) perfect reconstructions.
inline constexpr double kNmseFloorDb = -400.0;

// 10 lg(||H_hat - H||_F^2 / ||H||_F^2) over the full tensor.
double nmse_db(const CsiTensor& h_hat, const CsiTensor& h);
// Same ratio restricted to the masked entries.
double nmse_masked_db(const CsiTensor& h_hat, const CsiTensor& h, const MaskSet& mask,
                      const PatchSpec& spec);

CsiTensor persistence_baseline(const CsiTensor& h, const TaskSpec& task);

using Predictor = std::function<CsiTensor(const CsiTensor&, const MaskSet&)>;
Predictor model_predictor(const ModelState& state);

struct TaskResult {
  TaskSpec task;
  double nmse_db = 0.0;         // mean of per-sample full-tensor dB values
  double nmse_masked_db = 0.0;  // mean of per-sample masked-region dB values
  std::size_t samples = 0;
};

struct LatencyStats {
  int batch = 1;
  int repetitions = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::vector<double> samples_ms;
};

struct EvalReport {
  std::string dataset;
  std::string split;
  std::string aggregation = "mean_of_per_sample_db";
  std::vector<TaskResult> tasks;
  std::uint64_t param_count = 0;
  std::optional<LatencyStats> latency;
  std::string config_fingerprint;
  std::string model_fingerprint;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

EvalReport evaluate(const Predictor& predictor, const std::vector<const CsiTensor*>& samples,
                    const PatchSpec& spec, const std::vector<TaskSpec>& tasks, int threads = 1);

EvalReport evaluate(const ModelState& state, const Dataset& ds, Split split,
                    const std::vector<TaskSpec>& tasks, int threads = 1);

// Order statistics over a set of wall-clock measurements (nearest-rank).
LatencyStats latency_stats(std::vector<double> samples_ms, int batch);

// Forward-only wall clock for `batch` sequential samples, after `warmup` untimed rounds.
LatencyStats bench(const ModelState& state, const CsiTensor& sample, int batch, int repetitions,
                   int warmup);

}  // namespace mcakd
