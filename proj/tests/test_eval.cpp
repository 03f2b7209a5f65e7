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
#include <numbers>

#include "mcakd/eval.hpp"
#include "test_util.hpp"

using namespace mcakd;
using mcakd::test::error_kind_of;

namespace {

CsiTensor filled(CsiDims d, cfloat v) {
  CsiTensor h(d);
  for (auto& z : h.data()) z = v;
  return h;
}

ChannelGenConfig one_path_cfg() {
  ChannelGenConfig c;
  c.T = 8;
  c.K = 8;
  c.N_v = 1;
  c.N_h_ant = 2;
  c.num_paths = 1;
  return c;
}

PathParams path(double doppler, double delay) {
  PathParams p;
  p.gain = {0.3, 0.9};
  p.doppler_hz = doppler;
  p.delay_s = delay;
  p.elevation = 1.0;
  p.azimuth = 0.2;
  return p;
}

}  // namespace

TEST_CASE("NMSE anchors") {
  const auto h = test::random_tensor({4, 4, 2}, 1);
  CHECK(nmse_db(CsiTensor(h.dims()), h) == 0.0);
  CHECK(nmse_db(h, h) <= -300.0);

  // 10 unit entries, one of them dropped: ratio exactly 0.1
  const CsiDims d{10, 1, 1};
  const auto ones = filled(d, {1.0f, 0.0f});
  auto dropped = ones;
  dropped(3, 0, 0) = 0.0f;
  CHECK(std::abs(nmse_db(dropped, ones) - (-10.0)) < 1e-9);

  CHECK(error_kind_of([&] { nmse_db(h, CsiTensor(h.dims())); }) == ErrorKind::Degenerate);
  CHECK(error_kind_of([&] { nmse_db(CsiTensor({2, 2, 2}), h); }) == ErrorKind::Contract);
}

TEST_CASE("NMSE is scale invariant") {
  const auto h = test::random_tensor({4, 4, 2}, 2);
  const auto g = test::random_tensor({4, 4, 2}, 3);
  for (double c : {0.5, 3.0, -2.0})
    CHECK(nmse_db(scaled(g, c), scaled(h, c)) == doctest::Approx(nmse_db(g, h)).epsilon(1e-6));
}

TEST_CASE("aggregation is the mean of per-sample dB values") {
  const CsiDims d{10, 10, 1};
  const auto a = filled(d, {1.0f, 0.0f});
  const auto b = filled(d, {2.0f, 0.0f});
  Predictor p = [](const CsiTensor& h, const MaskSet&) {
    CsiTensor out = h;
    // 10 of 100 entries wrong for `a` (-10 dB), 1 of 100 for `b` (-20 dB)
    const int wrong = h(0, 0, 0).real() == 1.0f ? 10 : 1;
    for (int i = 0; i < wrong; ++i) out(9, i, 0) = 0.0f;
    return out;
  };
  const auto r = evaluate(p, {&a, &b}, {1, 1, 1}, {{TaskKind::Time, 5}});
  CHECK(std::abs(r.tasks[0].nmse_db - (-15.0)) < 1e-9);
  CHECK(r.aggregation == "mean_of_per_sample_db");
}

TEST_CASE("stub predictors") {
  const CsiDims d{4, 4, 2};
  std::vector<CsiTensor> data{test::random_tensor(d, 4), test::random_tensor(d, 5)};
  for (auto& h : data) h = normalize(h).tensor;
  std::vector<const CsiTensor*> ptrs{&data[0], &data[1]};
  const std::vector<TaskSpec> tasks{{TaskKind::Time, 2}, {TaskKind::Frequency, 2}};

  const Predictor truth = [](const CsiTensor& h, const MaskSet&) { return h; };
  for (const auto& t : evaluate(truth, ptrs, {1, 1, 1}, tasks).tasks) {
    CHECK(t.nmse_db <= -300.0);
    CHECK(t.nmse_masked_db <= -300.0);
  }
  const Predictor zeros = [](const CsiTensor& h, const MaskSet&) { return CsiTensor(h.dims()); };
  for (const auto& t : evaluate(zeros, ptrs, {1, 1, 1}, tasks).tasks) CHECK(t.nmse_db == 0.0);
}

TEST_CASE("persistence baseline") {
  const auto cfg = one_path_cfg();

  SUBCASE("static channel is exact") {
    const auto h = synthesize_channel(cfg, {path(0.0, 2e-7)});
    CHECK(nmse_db(persistence_baseline(h, {TaskKind::Time, 4}), h) <= -300.0);
  }
  SUBCASE("time-invariant input repeats exactly") {
    const auto h = filled({8, 4, 2}, {0.5f, -1.0f});
    CHECK(nmse_db(persistence_baseline(h, {TaskKind::Time, 3}), h) <= -300.0);
  }
  SUBCASE("Doppler phase drift matches the closed form") {
    const double fd = 90.0;
    const auto h = synthesize_channel(cfg, {path(fd, 0.0)});
    const int X = 4;
    // |H| is constant; future slot t is off by a rotation of w*(t - X + 1).
    const double w = 2 * std::numbers::pi * fd * cfg.delta_t;
    double err = 0;
    for (int m = 1; m <= cfg.T - X; ++m) err += 2.0 - 2.0 * std::cos(w * m);
    const double expected = 10 * std::log10(err / cfg.T);
    CHECK(std::abs(nmse_db(persistence_baseline(h, {TaskKind::Time, X}), h) - expected) < 1e-3);
  }
  SUBCASE("delay phase drift along frequency") {
    const double tau = 4e-7;
    const auto h = synthesize_channel(cfg, {path(0.0, tau)});
    const int X = 2;
    const double w = 2 * std::numbers::pi * tau * cfg.delta_f;
    double err = 0;
    for (int m = 1; m <= cfg.K - X; ++m) err += 2.0 - 2.0 * std::cos(w * m);
    const double expected = 10 * std::log10(err / cfg.K);
    CHECK(std::abs(nmse_db(persistence_baseline(h, {TaskKind::Frequency, X}), h) - expected) <
          1e-3);
  }
}

TEST_CASE("latency statistics") {
  const auto one = latency_stats({2.5}, 4);
  CHECK(one.mean_ms == 2.5);
  CHECK(one.p50_ms == 2.5);
  CHECK(one.p95_ms == 2.5);

  const auto s = latency_stats({5, 1, 4, 2, 3}, 1);
  CHECK(s.mean_ms == 3.0);
  CHECK(s.p50_ms == 3.0);
  CHECK(s.p95_ms == 5.0);
  CHECK(error_kind_of([] { latency_stats({}, 1); }) == ErrorKind::Config);
}

TEST_CASE("bench: half-width model is faster") {
  ModelConfig c;
  c.depth_enc = 2;
  c.depth_dec = 1;
  c.heads = 4;
  c.dim = 256;
  c.patch = {1, 2, 2};
  const CsiDims d{16, 8, 4};
  const auto h = test::random_tensor(d, 1);
  const auto teacher = init_model(c, Role::Teacher, 1);
  c.dim = 128;
  const auto student = init_model(c, Role::Student, 1);
  const auto t = bench(teacher, h, 2, 5, 1);
  const auto s = bench(student, h, 2, 5, 1);
  CHECK(s.mean_ms < t.mean_ms);
  for (const auto& x : {t, s}) {
    CHECK(x.p95_ms >= x.p50_ms);
    CHECK(*std::min_element(x.samples_ms.begin(), x.samples_ms.end()) >= 0.0);
    CHECK(x.repetitions == 5);
  }
  CHECK(error_kind_of([&] { bench(student, h, 1, 0, 0); }) == ErrorKind::Config);
}

TEST_CASE("model evaluation is deterministic and reports both NMSE variants") {
  ChannelGenConfig g;
  g.T = 4;
  g.K = 4;
  g.N_v = 1;
  g.N_h_ant = 2;
  const auto ds = generate_dataset(g, {2, 0, 3}, NormMode::Global);
  ModelConfig c;
  c.depth_enc = 1;
  c.depth_dec = 1;
  c.heads = 2;
  c.dim = 8;
  c.patch = {2, 2, 1};
  const auto st = init_model(c, Role::Student, 4);
  const std::vector<TaskSpec> tasks{{TaskKind::Time, 2}, {TaskKind::Frequency, 2}};
  const auto a = evaluate(st, ds, Split::Test, tasks, 2);
  const auto b = evaluate(st, ds, Split::Test, tasks, 1);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.tasks[0].samples == 3);
  CHECK(a.param_count == count_params(c));
  CHECK(a.split == "test");
  // visible entries are exact, so the masked-region error is the larger ratio
  CHECK(a.tasks[0].nmse_masked_db > a.tasks[0].nmse_db);
  const auto csv = a.to_csv();
  CHECK(csv.find("mean_of_per_sample_db") != std::string::npos);
}
