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

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <set>
#include <sstream>

#include "mcakd/train.hpp"
#include "test_util.hpp"

using namespace mcakd;
using mcakd::test::error_kind_of;

namespace {

const Dataset& toy_data() {
  static const Dataset ds = [] {
    ChannelGenConfig g;
    g.T = 4;
    g.K = 4;
    g.N_v = 1;
    g.N_h_ant = 2;
    g.num_paths = 2;
    g.seed = 3;
    return generate_dataset(g, {32, 8, 0}, NormMode::Global);
  }();
  return ds;
}

ModelConfig toy_model(int dim) {
  ModelConfig c;
  c.depth_enc = 1;
  c.depth_dec = 1;
  c.heads = 2;
  c.dim = dim;
  c.mlp_ratio = 2.0;
  c.patch = {2, 2, 1};
  c.max_tokens = 64;
  return c;
}

TrainConfig toy_train(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch = 8;
  t.lr = 1e-3;
  t.seed = 5;
  t.threads = 2;
  return t;
}

const ModelState& toy_teacher() {
  static const ModelState st =
      pretrain_teacher(toy_data(), toy_model(16), toy_train(1)).state;
  return st;
}

std::vector<Phase> phases(const AlPlSchedule& s, const std::vector<double>& h) {
  std::vector<Phase> out;
  for (int e = 0; e < s.total_epochs; ++e) out.push_back(phase_of(e, s, h));
  return out;
}

constexpr Phase S = Phase::Autonomous;
constexpr Phase D = Phase::Passive;

}  // namespace

TEST_CASE("fixed cycle schedules") {
  CHECK(phases(AlPlSchedule::fixed(2, 1, 6), {}) == std::vector{S, S, D, S, S, D});
  CHECK(phases(AlPlSchedule::fixed(0, 1, 4), {}) == std::vector{D, D, D, D});
  CHECK(phases(AlPlSchedule::fixed(1, 0, 3), {}) == std::vector{S, S, S});
  CHECK(error_kind_of([] { AlPlSchedule::fixed(0, 0, 3).validate(); }) == ErrorKind::Config);
  CHECK(error_kind_of([] { phase_of(3, AlPlSchedule::fixed(2, 1, 3), {}); }) ==
        ErrorKind::Contract);
}

TEST_CASE("plateau-triggered schedule replays the improvement rule") {
  // Rapid improvement for four epochs, then a slow 1e-4 per epoch drift.
  std::vector<double> h{1.0, 0.5, 0.25, 0.2};
  for (int j = 4; j < 18; ++j) h.push_back(0.2 - 1e-4 * (j - 3));
  const auto sched = AlPlSchedule::plateau(3, 1e-3, 2, 18);
  // Epoch 7: min(h[0..3]) - min(h[0..6]) = 0.2 - 0.1997 < 1e-3 -> passive for 2 epochs,
  // then 3 autonomous epochs must elapse before the next check.
  const std::vector expected{S, S, S, S, S, S, S, D, D, S, S, S, D, D, S, S, S, D};
  CHECK(phases(sched, h) == expected);

  SUBCASE("only past history is consulted") {
    auto changed = h;
    for (std::size_t j = 8; j < changed.size(); ++j) changed[j] = 100.0;
    for (int e = 0; e <= 8; ++e) CHECK(phase_of(e, sched, changed) == phase_of(e, sched, h));
  }
  SUBCASE("steady improvement never triggers") {
    std::vector<double> g;
    for (int j = 0; j < 18; ++j) g.push_back(std::pow(0.5, j));
    const auto p = phases(AlPlSchedule::plateau(3, 1e-9, 2, 18), g);
    CHECK(std::count(p.begin(), p.end(), D) == 0);
  }
}

TEST_CASE("P_d requires a teacher") {
  const auto& ds = toy_data();
  const auto st = init_model(toy_model(8), Role::Student, 1);
  const std::vector<BatchItem> batch{
      {&ds.samples[0], make_random_mask(0.5, 8, 1)}};
  CHECK(error_kind_of([&] {
          phase_loss(batch, st, nullptr, nullptr, Phase::Passive, toy_train(1), nullptr);
        }) == ErrorKind::Contract);
}

TEST_CASE("phase loss: teacher calls, lambda and composition") {
  const auto& ds = toy_data();
  const FrozenTeacher teacher(toy_teacher());
  const auto st = init_model(toy_model(8), Role::Student, 2);
  const auto caks = init_caks_set(16, 8, 0, 2, 9);
  std::vector<BatchItem> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({&ds.samples[i], make_random_mask(0.5, 8, i)});
  auto cfg = toy_train(1);

  const auto ps = phase_loss(batch, st, &teacher, &caks, Phase::Autonomous, cfg, nullptr);
  CHECK(teacher.forward_calls() == 0);
  CHECK(ps.loss == ps.parts.l_mse);
  CHECK(ps.parts.l_mcakd == 0.0);

  const auto pd = phase_loss(batch, st, &teacher, &caks, Phase::Passive, cfg, nullptr);
  CHECK(teacher.forward_calls() == 4);
  CHECK(teacher.batch_forwards() == 1);
  CHECK(pd.loss == doctest::Approx(pd.parts.l_mse + cfg.lambda * pd.parts.l_mcakd).epsilon(1e-12));
  CHECK(pd.parts.l_mcakd > 0.0);

  cfg.lambda = 0.0;
  ModelParams<float> g_s, g_d;
  const auto p0 = phase_loss(batch, st, &teacher, &caks, Phase::Passive, cfg, &g_d);
  const auto s0 = phase_loss(batch, st, &teacher, &caks, Phase::Autonomous, cfg, &g_s);
  CHECK(p0.loss == s0.loss);
  CHECK(g_s == g_d);
}

TEST_CASE("gradients do not depend on the worker count") {
  const auto& ds = toy_data();
  const auto st = init_model(toy_model(8), Role::Student, 2);
  std::vector<BatchItem> batch;
  for (int i = 0; i < 7; ++i) batch.push_back({&ds.samples[i], make_random_mask(0.5, 8, i)});
  auto cfg = toy_train(1);
  ModelParams<float> a, b;
  cfg.threads = 1;
  phase_loss(batch, st, nullptr, nullptr, Phase::Autonomous, cfg, &a);
  cfg.threads = 3;
  phase_loss(batch, st, nullptr, nullptr, Phase::Autonomous, cfg, &b);
  CHECK(a == b);
}

TEST_CASE("adam applies bias-corrected steps") {
  const auto c = toy_model(8);
  auto p = ModelParams<float>::zeros(c);
  auto g = ModelParams<float>::zeros(c);
  g.head_b(0, 0) = 0.5f;
  Adam adam(p, 0.9, 0.999, 1e-8);
  adam.step(p, g, 0.1);
  // m_hat = g, v_hat = g^2 after one step -> update = lr * g / (|g| + eps)
  CHECK(p.head_b(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p.head_b(0, 1) == 0.0f);
  CHECK(adam.steps() == 1);
}

TEST_CASE("training: improvement, determinism, lr = 0") {
  auto gen = toy_data().gen;
  const auto ds = generate_dataset(gen, {64, 16, 0}, NormMode::Global);
  auto cfg = toy_train(1);
  const auto init = init_model(toy_model(16), Role::Teacher, derive_seed(cfg.seed, 1));
  const double before = validation_mse(init, ds, cfg);
  const auto a = pretrain_teacher(ds, toy_model(16), cfg);
  CHECK(std::isfinite(a.metrics[0].val_mse));
  CHECK(a.metrics[0].val_mse < before);

  const auto b = pretrain_teacher(ds, toy_model(16), cfg);
  CHECK(a.state == b.state);

  cfg.lr = 0.0;
  const auto frozen = pretrain_teacher(ds, toy_model(16), cfg);
  CHECK(frozen.state == init);
}

TEST_CASE("distillation: schedule contract and frozen teacher") {
  const auto& ds = toy_data();
  const ModelState teacher_copy = toy_teacher();
  const FrozenTeacher teacher(toy_teacher());
  const auto cfg = toy_train(6);
  const auto res = distill_student(ds, teacher, toy_model(8), cfg, AlPlSchedule::fixed(2, 1, 6));
  REQUIRE(res.metrics.size() == 6);
  std::uint64_t passive_batches = 0;
  for (const auto& m : res.metrics) {
    if (m.epoch == 2 || m.epoch == 5) {
      CHECK(m.phase == Phase::Passive);
      CHECK(m.teacher_forwards == 32);
      CHECK(m.losses.l_mcakd > 0.0);
      CHECK(m.loss == doctest::Approx(m.losses.l_mse + cfg.lambda * m.losses.l_mcakd));
    } else {
      CHECK(m.phase == Phase::Autonomous);
      CHECK(m.teacher_forwards == 0);
      CHECK(m.losses.l_attn == 0.0);
    }
    passive_batches += m.passive_batches;
  }
  CHECK(passive_batches == 8);
  CHECK(teacher.batch_forwards() == passive_batches);
  CHECK(teacher.forward_calls() == res.passive_samples);
  CHECK(toy_teacher() == teacher_copy);
}

TEST_CASE("all-autonomous schedule equals teacher-free training") {
  const auto& ds = toy_data();
  const FrozenTeacher teacher(toy_teacher());
  const auto cfg = toy_train(2);
  const auto kd = distill_student(ds, teacher, toy_model(8), cfg, AlPlSchedule::fixed(1, 0, 2));
  const auto plain = train_self_supervised(ds, toy_model(8), Role::Student, cfg);
  CHECK(kd.state == plain.state);
  CHECK(teacher.forward_calls() == 0);
}

TEST_CASE("distillation preconditions fail before training") {
  const auto& ds = toy_data();
  const FrozenTeacher teacher(toy_teacher());
  auto bad = toy_model(8);
  bad.heads = 4;
  CHECK(error_kind_of([&] {
          distill_student(ds, teacher, bad, toy_train(1), AlPlSchedule::fixed(2, 1, 1));
        }) == ErrorKind::Contract);
  CHECK(teacher.forward_calls() == 0);
  CHECK(error_kind_of([&] {
          distill_student(ds, teacher, toy_model(8), toy_train(3), AlPlSchedule::fixed(2, 1, 2));
        }) == ErrorKind::Config);
}

TEST_CASE("config validation") {
  auto c = toy_train(1);
  c.batch = 0;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::Config);
  c = toy_train(1);
  c.lambda = -1;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::Config);
  c = toy_train(1);
  c.ratio_time = 1.0;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::Config);
  c = toy_train(1);
  c.mask_mix = {0, 0, 0};
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::Config);
}

TEST_CASE("metrics CSV layout") {
  EpochMetrics m;
  m.epoch = 3;
  m.phase = Phase::Passive;
  m.losses.l_attn = 0.25;
  const auto csv = metrics_csv({m}, "caks", "fp");
  std::istringstream is(csv);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header.rfind("epoch,phase,l_mse,l_attn,l_embed,l_hs,l_mcakd,val_nmse_time_db,"
                     "val_nmse_freq_db,wall_ms",
                     0) == 0);
  CHECK(row.rfind("3,P_d,0,0.25,", 0) == 0);
  CHECK(row.find(",caks,fp") != std::string::npos);
}

TEST_CASE("seed streams are distinct") {
  std::set<std::uint64_t> s;
  for (std::uint64_t stream = 1; stream <= 5; ++stream) s.insert(derive_seed(7, stream));
  CHECK(s.size() == 5);
  CHECK(derive_seed(7, 1) != derive_seed(8, 1));
}
