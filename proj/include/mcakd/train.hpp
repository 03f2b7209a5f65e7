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

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcakd/csi.hpp"
#include "mcakd/distill.hpp"
#include "mcakd/model.hpp"

namespace mcakd {

// P_s: self-supervised only. P_d: distillation-augmented.
enum class Phase : std::uint8_t { Autonomous = 0, Passive = 1 };
const char* to_string(Phase p);

struct AlPlSchedule {
  enum class Mode : std::uint8_t { FixedCycle = 0, PlateauTriggered = 1 };

  Mode mode = Mode::FixedCycle;
  int n_s = 2;  // FixedCycle: autonomous epochs per cycle
  int n_d = 1;  // FixedCycle: passive epochs per cycle
  int window = 3;            // PlateauTriggered: W
  double min_delta = 1e-3;   // PlateauTriggered: epsilon
  int pl_len = 2;            // PlateauTriggered: passive epochs per trigger
  int total_epochs = 30;

  static AlPlSchedule fixed(int n_s, int n_d, int total_epochs);
  static AlPlSchedule plateau(int window, double min_delta, int pl_len, int total_epochs);
  void validate() const;
};

// history[i] is the validation L_mse measured after epoch i; only
// history[0, epoch) is consulted.
Phase phase_of(int epoch, const AlPlSchedule& sched, std::span<const double> history);

struct TrainConfig {
  double lr = 5e-4;
  int batch = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  std::array<double, 3> mask_mix{1.0, 1.0, 1.0};  // random, time, frequency
  double ratio_random = 0.5;
  double ratio_time = 0.5;
  double ratio_freq = 0.5;
  int epochs = 30;
  bool cosine_decay = false;
  int threads = 0;      // 0: MCAKD_THREADS / hardware default
  int val_time_x = 0;   // 0: T/2
  int val_freq_x = 0;   // 0: K/2
  DistillToggles toggles;
  int caks_heads = 0;   // 0: student heads
  int caks_dim = 0;     // 0: student dim

  void validate() const;
};

// Teacher wrapper that counts forward passes; parameters are read-only.
class FrozenTeacher {
 public:
  explicit FrozenTeacher(const ModelState& state) : state_(state) {}

  ForwardPass<float> forward(const Mat& tokens, const std::vector<GridCoord>& coords,
                             const MaskSet& mask) const;
  const ModelState& state() const { return state_; }
  // Per-sample forward passes.
  std::uint64_t forward_calls() const { return calls_.load(); }
  // Batched forward passes (one per P_d batch).
  std::uint64_t batch_forwards() const { return batches_.load(); }
  void count_batch() const { batches_.fetch_add(1); }

 private:
  const ModelState& state_;
  mutable std::atomic<std::uint64_t> calls_{0};
  mutable std::atomic<std::uint64_t> batches_{0};
};

struct BatchItem {
  const CsiTensor* sample = nullptr;
  MaskSet mask;
};

struct PhaseLoss {
  double loss = 0.0;  // l_mse (P_s) or l_mse + lambda * l_mcakd (P_d), batch mean
  DistillLosses parts;
};

// Eq. 9 phase-dependent objective for one batch. When grads is non-null it
// receives the batch-mean gradient with respect to the student parameters.
// In P_s no teacher forward pass is executed.
PhaseLoss phase_loss(std::span<const BatchItem> batch, const ModelState& student,
                     const FrozenTeacher* teacher, const CaKsSet* caks, Phase phase,
                     const TrainConfig& cfg, ModelParams<float>* grads);

class Adam {
 public:
  Adam(const ModelParams<float>& like, double beta1, double beta2, double eps);
  void step(ModelParams<float>& params, const ModelParams<float>& grads, double lr);
  long steps() const { return t_; }

 private:
  ModelParams<float> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct EpochMetrics {
  int epoch = 0;
  Phase phase = Phase::Autonomous;
  double loss = 0.0;
  DistillLosses losses;
  double val_mse = 0.0;
  double val_nmse_time_db = 0.0;
  double val_nmse_freq_db = 0.0;
  double wall_ms = 0.0;
  std::uint64_t teacher_forwards = 0;  // during this epoch
  std::uint64_t passive_batches = 0;   // during this epoch
};

struct TrainResult {
  ModelState state;
  std::vector<EpochMetrics> metrics;
  std::uint64_t teacher_forwards = 0;
  std::uint64_t passive_samples = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Self-supervised masked reconstruction (no teacher). Teacher pretraining and
// the no-KD student baseline both use this path.
TrainResult train_self_supervised(const Dataset& ds, const ModelConfig& model_cfg, Role role,
                                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

TrainResult pretrain_teacher(const Dataset& ds, const ModelConfig& model_cfg,
                             const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Student training under the AL-PL schedule with a frozen teacher.
TrainResult distill_student(const Dataset& ds, const FrozenTeacher& teacher,
                            const ModelConfig& student_cfg, const TrainConfig& cfg,
                            const AlPlSchedule& sched, const EpochCallback& on_epoch = {});

// Validation masked-reconstruction MSE averaged over the three strategies.
double validation_mse(const ModelState& state, const Dataset& ds, const TrainConfig& cfg);

std::string metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& selection,
                        const std::string& fingerprint);

}  // namespace mcakd
