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

#include "mcakd/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mcakd/error.hpp"
#include "mcakd/eval.hpp"
#include "mcakd/parallel.hpp"

namespace mcakd {

const char* to_string(Phase p) { return p == Phase::Autonomous ? "P_s" : "P_d"; }

AlPlSchedule AlPlSchedule::fixed(int n_s, int n_d, int total_epochs) {
  AlPlSchedule s;
  s.mode = Mode::FixedCycle;
  s.n_s = n_s;
  s.n_d = n_d;
  s.total_epochs = total_epochs;
  return s;
}

AlPlSchedule AlPlSchedule::plateau(int window, double min_delta, int pl_len, int total_epochs) {
  AlPlSchedule s;
  s.mode = Mode::PlateauTriggered;
  s.window = window;
  s.min_delta = min_delta;
  s.pl_len = pl_len;
  s.total_epochs = total_epochs;
  return s;
}

void AlPlSchedule::validate() const {
  require(total_epochs >= 0, ErrorKind::Config, "schedule: total_epochs must be >= 0");
  if (mode == Mode::FixedCycle) {
    require(n_s >= 0 && n_d >= 0 && n_s + n_d > 0, ErrorKind::Config,
            "schedule: fixed cycle needs n_s, n_d >= 0 with n_s + n_d > 0");
  } else {
    require(window >= 1 && pl_len >= 1 && min_delta >= 0, ErrorKind::Config,
            "schedule: plateau needs window >= 1, pl_len >= 1, min_delta >= 0");
  }
}

Phase phase_of(int epoch, const AlPlSchedule& sched, std::span<const double> history) {
  sched.validate();
  require(epoch >= 0 && epoch < sched.total_epochs, ErrorKind::Contract,
          "phase_of: epoch " + std::to_string(epoch) + " outside schedule");
  if (sched.mode == AlPlSchedule::Mode::FixedCycle)
    return epoch % (sched.n_s + sched.n_d) < sched.n_s ? Phase::Autonomous : Phase::Passive;

  // Replay the trigger rule over the observed history.
  const int W = sched.window;
  int passive_left = 0;
  int segment_start = 0;
  Phase phase = Phase::Autonomous;
  for (int j = 0; j <= epoch; ++j) {
    if (passive_left > 0) {
      phase = Phase::Passive;
      if (--passive_left == 0) segment_start = j + 1;
      continue;
    }
    phase = Phase::Autonomous;
    const int before = j - 1 - W;
    if (j - segment_start >= W && before >= 0 && j <= static_cast<int>(history.size())) {
      const double best_before = *std::min_element(history.begin(), history.begin() + before + 1);
      const double best_now = *std::min_element(history.begin(), history.begin() + j);
      if (best_before - best_now < sched.min_delta) {
        phase = Phase::Passive;
        passive_left = sched.pl_len - 1;
        if (passive_left == 0) segment_start = j + 1;
      }
    }
  }
  return phase;
}

void TrainConfig::validate() const {
  require(lr >= 0, ErrorKind::Config, "train: lr must be >= 0");
  require(batch >= 1, ErrorKind::Config, "train: batch must be >= 1");
  require(lambda >= 0, ErrorKind::Config, "train: lambda must be >= 0");
  require(epochs >= 0, ErrorKind::Config, "train: epochs must be >= 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0, ErrorKind::Config,
          "train: invalid Adam hyperparameters");
  require(mask_mix[0] >= 0 && mask_mix[1] >= 0 && mask_mix[2] >= 0 &&
              mask_mix[0] + mask_mix[1] + mask_mix[2] > 0,
          ErrorKind::Config, "train: mask mix weights must be non-negative, not all zero");
  for (double r : {ratio_random, ratio_time, ratio_freq})
    require(r > 0 && r < 1, ErrorKind::Config, "train: mask ratios must lie in (0, 1)");
}

ForwardPass<float> FrozenTeacher::forward(const Mat& tokens, const std::vector<GridCoord>& coords,
                                          const MaskSet& mask) const {
  calls_.fetch_add(1);
  return forward_tokens<float>(state_.params, state_.config, tokens, coords, mask);
}

namespace {

struct SampleLoss {
  double mse = 0.0;
  DistillLosses parts;
};

void scale_tap_grads(TapGrads<float>& g, float alpha) {
  g.embedding *= alpha;
  g.hidden_enc *= alpha;
  g.hidden_dec *= alpha;
  for (auto* maps : {&g.attn_enc, &g.attn_dec})
    for (auto& layer : *maps)
      for (auto& m : layer) m *= alpha;
}

SampleLoss sample_loss(const BatchItem& item, const TokenBatch& tb, const ModelState& student,
                       const FrozenTeacher* teacher, const CaKsSet* caks, Phase phase,
                       const TrainConfig& cfg, float grad_scale, ModelParams<float>* grads) {
  SampleLoss out;
  auto pass = forward_tokens<float>(student.params, student.config, tb.tokens, tb.coords, item.mask);
  Mat d_out;
  out.mse = masked_token_mse<float>(pass.out, tb.tokens, item.mask, grads ? &d_out : nullptr);

  TapGrads<float> tap_grads;
  const bool passive = phase == Phase::Passive;
  if (passive) {
    const auto tpass = teacher->forward(tb.tokens, tb.coords, item.mask);
    out.parts = mcakd_loss<float>(tpass.taps, pass.taps, *caks, cfg.toggles,
                                  grads ? &tap_grads : nullptr);
  }
  out.parts.l_mse = out.mse;
  if (grads) {
    d_out *= grad_scale;
    if (passive) scale_tap_grads(tap_grads, static_cast<float>(cfg.lambda) * grad_scale);
    backward<float>(student.params, student.config, pass, d_out, passive ? &tap_grads : nullptr,
                    *grads);
  }
  return out;
}

}  // namespace

PhaseLoss phase_loss(std::span<const BatchItem> batch, const ModelState& student,
                     const FrozenTeacher* teacher, const CaKsSet* caks, Phase phase,
                     const TrainConfig& cfg, ModelParams<float>* grads) {
  require(!batch.empty(), ErrorKind::Contract, "phase_loss: empty batch");
  if (phase == Phase::Passive) {
    require(teacher != nullptr, ErrorKind::Contract, "phase_loss: P_d requires a teacher");
    require(caks != nullptr, ErrorKind::Contract, "phase_loss: P_d requires CA-KS modules");
    check_distill_compatible(teacher->state().config, student.config);
    teacher->count_batch();
  }
  const std::size_t B = batch.size();
  const float grad_scale = 1.0f / static_cast<float>(B);
  const int threads = cfg.threads > 0 ? cfg.threads : worker_threads();
  const std::size_t wave = std::min<std::size_t>(std::max(threads, 1), B);

  if (grads) {
    if (grads->scalar_count() != count_params(student.config))
      *grads = ModelParams<float>::zeros(student.config);
    else
      grads->set_zero();
  }
  std::vector<ModelParams<float>> slots;
  if (grads) slots.assign(wave, ModelParams<float>::zeros(student.config));

  std::vector<SampleLoss> losses(B);
  // Samples run in waves; each wave's gradients are reduced in sample order
  // so the result is independent of the worker count.
  for (std::size_t start = 0; start < B; start += wave) {
    const std::size_t n = std::min(wave, B - start);
    parallel_for(n, threads, [&](std::size_t w) {
      const BatchItem& item = batch[start + w];
      TokenBatch tb = patchify(*item.sample, student.config.patch);
      if (grads) slots[w].set_zero();
      losses[start + w] = sample_loss(item, tb, student, teacher, caks, phase, cfg, grad_scale,
                                      grads ? &slots[w] : nullptr);
    });
    if (grads)
      for (std::size_t w = 0; w < n; ++w) axpy(*grads, slots[w], 1.0f);
  }

  PhaseLoss out;
  for (const auto& l : losses) {
    out.parts.l_mse += l.mse;
    out.parts.l_attn += l.parts.l_attn;
    out.parts.l_embed += l.parts.l_embed;
    out.parts.l_hs += l.parts.l_hs;
  }
  out.parts.l_mse /= B;
  out.parts.l_attn /= B;
  out.parts.l_embed /= B;
  out.parts.l_hs /= B;
  out.parts.l_mcakd = out.parts.l_attn + out.parts.l_embed + out.parts.l_hs;
  out.loss = phase == Phase::Passive ? out.parts.l_mse + cfg.lambda * out.parts.l_mcakd
                                     : out.parts.l_mse;
  return out;
}

Adam::Adam(const ModelParams<float>& like, double beta1, double beta2, double eps)
    : m_(like), v_(like), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.set_zero();
  v_.set_zero();
}

void Adam::step(ModelParams<float>& params, const ModelParams<float>& grads, double lr) {
  ++t_;
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  const float c1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const float c2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const float step = static_cast<float>(lr);
  const float eps = static_cast<float>(eps_);

  std::vector<const Mat*> g;
  std::vector<Mat*> m, v;
  grads.for_each([&](const std::string&, const Mat& x) { g.push_back(&x); });
  m_.for_each([&](const std::string&, Mat& x) { m.push_back(&x); });
  v_.for_each([&](const std::string&, Mat& x) { v.push_back(&x); });
  std::size_t i = 0;
  params.for_each([&](const std::string&, Mat& p) {
    auto& mi = *m[i];
    auto& vi = *v[i];
    const auto& gi = *g[i];
    mi = b1 * mi + (1.0f - b1) * gi;
    vi = b2 * vi + (1.0f - b2) * gi.cwiseProduct(gi);
    p.array() -= step * (mi.array() / c1) / ((vi.array() / c2).sqrt() + eps);
    ++i;
  });
}

namespace {

struct ValStats {
  double mse = 0.0;
  double nmse_time_db = 0.0;
  double nmse_freq_db = 0.0;
};

ValStats validation_stats(const ModelState& state, const Dataset& ds,
                          const std::vector<std::size_t>& val_idx, const TrainConfig& cfg) {
  ValStats out;
  if (val_idx.empty()) return out;
  const auto& dims = ds.dims;
  const auto& patch = state.config.patch;
  const TaskSpec time_task{TaskKind::Time, cfg.val_time_x > 0 ? cfg.val_time_x : dims.T / 2};
  const TaskSpec freq_task{TaskKind::Frequency, cfg.val_freq_x > 0 ? cfg.val_freq_x : dims.K / 2};
  const MaskSet time_mask = task_mask(time_task, dims, patch);
  const MaskSet freq_mask = task_mask(freq_task, dims, patch);
  const int G = patch.token_count(dims);
  const int threads = cfg.threads > 0 ? cfg.threads : worker_threads();

  std::vector<ValStats> per(val_idx.size());
  parallel_for(val_idx.size(), threads, [&](std::size_t i) {
    const CsiTensor& h = ds.samples[val_idx[i]];
    const TokenBatch tb = patchify(h, patch);
    const MaskSet rand_mask =
        make_random_mask(cfg.ratio_random, G, derive_seed(cfg.seed, 5) ^ val_idx[i]);
    double mse = 0.0;
    for (const MaskSet* m : {&rand_mask, &time_mask, &freq_mask}) {
      const auto pass = forward_tokens<float>(state.params, state.config, tb.tokens, tb.coords, *m);
      mse += masked_token_mse<float>(pass.out, tb.tokens, *m, nullptr);
      if (m == &time_mask)
        per[i].nmse_time_db = nmse_db(assemble_prediction(h, *m, pass.out, patch), h);
      if (m == &freq_mask)
        per[i].nmse_freq_db = nmse_db(assemble_prediction(h, *m, pass.out, patch), h);
    }
    per[i].mse = mse / 3.0;
  });
  for (const auto& p : per) {
    out.mse += p.mse;
    out.nmse_time_db += p.nmse_time_db;
    out.nmse_freq_db += p.nmse_freq_db;
  }
  const double n = static_cast<double>(per.size());
  out.mse /= n;
  out.nmse_time_db /= n;
  out.nmse_freq_db /= n;
  return out;
}

TrainResult run_training(const Dataset& ds, const ModelConfig& model_cfg, Role role,
                         const TrainConfig& cfg, const FrozenTeacher* teacher,
                         const AlPlSchedule* sched, const EpochCallback& on_epoch) {
  cfg.validate();
  check_compatible(model_cfg, ds.dims);
  CaKsSet caks;
  if (teacher) {
    require(sched != nullptr, ErrorKind::Contract, "distillation requires a schedule");
    sched->validate();
    require(sched->total_epochs >= cfg.epochs, ErrorKind::Config,
            "schedule covers fewer epochs than training");
    check_distill_compatible(teacher->state().config, model_cfg);
    check_compatible(teacher->state().config, ds.dims);
    caks = init_caks_set(teacher->state().config.dim, model_cfg.dim, cfg.caks_dim,
                         cfg.caks_heads > 0 ? cfg.caks_heads : model_cfg.heads,
                         derive_seed(cfg.seed, 4));
  }
  const auto train_idx = ds.indices(Split::Train);
  const auto val_idx = ds.indices(Split::Val);
  require(!train_idx.empty(), ErrorKind::Config, "training split is empty");

  TrainResult result;
  result.state = init_model(model_cfg, role, derive_seed(cfg.seed, 1));
  Adam adam(result.state.params, cfg.beta1, cfg.beta2, cfg.adam_eps);
  ModelParams<float> grads = ModelParams<float>::zeros(model_cfg);

  std::mt19937_64 order_rng(derive_seed(cfg.seed, 2));
  std::mt19937_64 mask_rng(derive_seed(cfg.seed, 3));
  std::discrete_distribution<int> pick_strategy(cfg.mask_mix.begin(), cfg.mask_mix.end());
  const double ratios[3] = {cfg.ratio_random, cfg.ratio_time, cfg.ratio_freq};

  const std::size_t B = static_cast<std::size_t>(cfg.batch);
  const std::size_t batches_per_epoch = (train_idx.size() + B - 1) / B;
  const double total_steps = static_cast<double>(batches_per_epoch) * cfg.epochs;
  std::vector<double> history;
  std::vector<std::size_t> order = train_idx;

  for (int e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const Phase phase = teacher ? phase_of(e, *sched, history) : Phase::Autonomous;
    const std::uint64_t calls_before = teacher ? teacher->forward_calls() : 0;
    std::shuffle(order.begin(), order.end(), order_rng);

    EpochMetrics m;
    m.epoch = e;
    m.phase = phase;
    double seen = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = b * B;
      const std::size_t hi = std::min(lo + B, order.size());
      const auto strategy = static_cast<MaskStrategy>(pick_strategy(mask_rng));
      std::vector<BatchItem> items;
      items.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        const std::uint64_t mask_seed = mask_rng();
        items.push_back({&ds.samples[order[i]],
                         make_mask(strategy, ratios[static_cast<int>(strategy)], ds.dims,
                                   model_cfg.patch, mask_seed)});
      }
      const PhaseLoss pl = phase_loss(items, result.state, teacher, &caks, phase, cfg, &grads);
      if (!std::isfinite(pl.loss) || !grads.all_finite())
        fail(ErrorKind::Numeric, "training diverged at epoch " + std::to_string(e) + " batch " +
                                     std::to_string(b));
      double lr = cfg.lr;
      if (cfg.cosine_decay) {
        const double step = static_cast<double>(e * batches_per_epoch + b);
        lr = cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / total_steps));
      }
      adam.step(result.state.params, grads, lr);
      if (phase == Phase::Passive) {
        ++m.passive_batches;
        result.passive_samples += items.size();
      }

      const double w = static_cast<double>(items.size());
      m.loss += w * pl.loss;
      m.losses.l_mse += w * pl.parts.l_mse;
      m.losses.l_attn += w * pl.parts.l_attn;
      m.losses.l_embed += w * pl.parts.l_embed;
      m.losses.l_hs += w * pl.parts.l_hs;
      seen += w;
    }
    m.loss /= seen;
    m.losses.l_mse /= seen;
    m.losses.l_attn /= seen;
    m.losses.l_embed /= seen;
    m.losses.l_hs /= seen;
    m.losses.l_mcakd = m.losses.l_attn + m.losses.l_embed + m.losses.l_hs;

    const ValStats vs = validation_stats(result.state, ds, val_idx, cfg);
    m.val_mse = val_idx.empty() ? m.losses.l_mse : vs.mse;
    m.val_nmse_time_db = vs.nmse_time_db;
    m.val_nmse_freq_db = vs.nmse_freq_db;
    history.push_back(m.val_mse);
    m.teacher_forwards = teacher ? teacher->forward_calls() - calls_before : 0;
    result.teacher_forwards += m.teacher_forwards;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

}  // namespace

double validation_mse(const ModelState& state, const Dataset& ds, const TrainConfig& cfg) {
  return validation_stats(state, ds, ds.indices(Split::Val), cfg).mse;
}

TrainResult train_self_supervised(const Dataset& ds, const ModelConfig& model_cfg, Role role,
                                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  return run_training(ds, model_cfg, role, cfg, nullptr, nullptr, on_epoch);
}

TrainResult pretrain_teacher(const Dataset& ds, const ModelConfig& model_cfg,
                             const TrainConfig& cfg, const EpochCallback& on_epoch) {
  return run_training(ds, model_cfg, Role::Teacher, cfg, nullptr, nullptr, on_epoch);
}

TrainResult distill_student(const Dataset& ds, const FrozenTeacher& teacher,
                            const ModelConfig& student_cfg, const TrainConfig& cfg,
                            const AlPlSchedule& sched, const EpochCallback& on_epoch) {
  return run_training(ds, student_cfg, Role::Student, cfg, &teacher, &sched, on_epoch);
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& selection,
                        const std::string& fingerprint) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,phase,l_mse,l_attn,l_embed,l_hs,l_mcakd,val_nmse_time_db,val_nmse_freq_db,wall_ms,"
        "teacher_forwards,selection,fingerprint\n";
  for (const auto& m : metrics) {
    os << m.epoch << ',' << to_string(m.phase) << ',' << m.losses.l_mse << ',' << m.losses.l_attn
       << ',' << m.losses.l_embed << ',' << m.losses.l_hs << ',' << m.losses.l_mcakd << ','
       << m.val_nmse_time_db << ',' << m.val_nmse_freq_db << ',' << m.wall_ms << ','
       << m.teacher_forwards << ',' << selection << ',' << fingerprint << '\n';
  }
  return os.str();
}

}  // namespace mcakd
