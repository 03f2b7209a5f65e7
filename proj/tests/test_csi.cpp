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
#include <fstream>
#include <numbers>
#include <set>
#include <cstring>

#include <json.hpp>

#include "mcakd/csi.hpp"
#include "test_util.hpp"

using namespace mcakd;
using mcakd::test::error_kind_of;

namespace {

ChannelGenConfig small_cfg() {
  ChannelGenConfig c;
  c.T = 8;
  c.K = 4;
  c.N_v = 2;
  c.N_h_ant = 2;
  c.num_paths = 3;
  c.seed = 7;
  return c;
}

PathParams single_path(double doppler, double delay) {
  PathParams p;
  p.gain = {0.6, -0.8};
  p.doppler_hz = doppler;
  p.delay_s = delay;
  p.elevation = 1.1;
  p.azimuth = 0.4;
  return p;
}

}  // namespace

TEST_CASE("steering follows the half-wavelength UPA phase") {
  const double th = 0.9, ph = -0.3;
  for (int v = 0; v < 3; ++v)
    for (int h = 0; h < 3; ++h) {
      const double phase = std::numbers::pi * (v * std::sin(th) * std::sin(ph) + h * std::cos(th));
      const auto a = steering(v, h, th, ph);
      CHECK(a.real() == doctest::Approx(std::cos(phase)).epsilon(1e-12));
      CHECK(a.imag() == doctest::Approx(std::sin(phase)).epsilon(1e-12));
    }
}

TEST_CASE("static single path is constant over time and frequency") {
  auto cfg = small_cfg();
  const auto h = synthesize_channel(cfg, {single_path(0.0, 0.0)});
  for (int n = 0; n < h.dims().N; ++n)
    for (int t = 0; t < cfg.T; ++t)
      for (int k = 0; k < cfg.K; ++k) CHECK(h(t, k, n) == h(0, 0, n));
}

TEST_CASE("single Doppler path advances phase by 2*pi*f_D*dt per slot") {
  auto cfg = small_cfg();
  cfg.delta_t = 1e-3;
  const auto h = synthesize_channel(cfg, {single_path(100.0, 3e-7)});
  const std::complex<double> expected = std::polar(1.0, 2 * std::numbers::pi * 0.1);
  for (int t = 0; t + 1 < cfg.T; ++t)
    for (int k = 0; k < cfg.K; ++k)
      for (int n = 0; n < h.dims().N; ++n) {
        const std::complex<double> r = std::complex<double>(h(t + 1, k, n)) /
                                       std::complex<double>(h(t, k, n));
        CHECK(std::abs(r - expected) < 1e-5);
      }
}

TEST_CASE("lag autocorrelation of a single path matches exp(j2pi f_D dt tau)") {
  auto cfg = small_cfg();
  const double fd = 73.0;
  const auto h = synthesize_channel(cfg, {single_path(fd, 2e-7)});
  for (int lag = 1; lag < 4; ++lag) {
    std::complex<double> acc = 0;
    double energy = 0;
    for (int t = 0; t + lag < cfg.T; ++t) {
      const std::complex<double> a(h(t, 1, 2)), b(h(t + lag, 1, 2));
      acc += b * std::conj(a);
      energy += std::norm(a);
    }
    const auto expected = std::polar(1.0, 2 * std::numbers::pi * fd * cfg.delta_t * lag);
    CHECK(std::abs(acc / energy - expected) < 1e-6);
  }
}

TEST_CASE("mean per-entry power is close to one over many samples") {
  auto cfg = small_cfg();
  double acc = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto h = generate_channel(cfg, sample_seed(cfg.seed, i));
    acc += h.frobenius_sq() / h.dims().size();
  }
  CHECK(std::abs(acc / n - 1.0) < 0.1);
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  auto cfg = small_cfg();
  CHECK(generate_channel(cfg, 11) == generate_channel(cfg, 11));
  CHECK_FALSE(generate_channel(cfg, 11) == generate_channel(cfg, 12));
  CHECK(generate_channel(cfg, 11).all_finite());
}

TEST_CASE("invalid generator configs are rejected") {
  auto cfg = small_cfg();
  cfg.T = 0;
  CHECK(error_kind_of([&] { generate_channel(cfg, 0); }) == ErrorKind::Config);
  cfg = small_cfg();
  cfg.max_doppler = 600.0;  // 0.6 cycles per slot aliases
  CHECK(error_kind_of([&] { cfg.validate(); }) == ErrorKind::Config);
  cfg = small_cfg();
  cfg.max_delay = 1e-5;
  CHECK(error_kind_of([&] { cfg.validate(); }) == ErrorKind::Config);
  cfg = small_cfg();
  cfg.num_paths = 0;
  CHECK(error_kind_of([&] { cfg.validate(); }) == ErrorKind::Config);
}

TEST_CASE("normalize sets unit mean power and inverts exactly enough") {
  const CsiDims d{4, 4, 2};
  const auto h = test::random_tensor(d, 3);
  const auto n = normalize(h);
  CHECK(n.tensor.frobenius_sq() == doctest::Approx(double(d.size())).epsilon(1e-4));

  const auto back = denormalize(n.tensor, n.scale);
  for (std::size_t i = 0; i < h.data().size(); ++i)
    CHECK(std::abs(back.data()[i] - h.data()[i]) <= 1e-6f * (1 + std::abs(h.data()[i])));

  const auto unit = n.tensor;
  CHECK(normalize(unit).scale == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(normalize(scaled(unit, 2.0)).scale == doctest::Approx(2.0).epsilon(1e-6));

  CHECK(error_kind_of([&] { normalize(CsiTensor(d)); }) == ErrorKind::Degenerate);
}

TEST_CASE("datasets: deterministic, split-tagged, globally normalized") {
  auto cfg = small_cfg();
  const auto a = generate_dataset(cfg, {10, 3, 2}, NormMode::Global, 2);
  const auto b = generate_dataset(cfg, {10, 3, 2}, NormMode::Global, 1);
  CHECK(a == b);
  CHECK(a.indices(Split::Train).size() == 10);
  CHECK(a.indices(Split::Val).size() == 3);
  CHECK(a.indices(Split::Test).size() == 2);
  double energy = 0;
  for (const auto& s : a.samples) energy += s.frobenius_sq();
  CHECK(energy / (a.size() * a.dims.size()) == doctest::Approx(1.0).epsilon(1e-4));

  const auto p = generate_dataset(cfg, {4, 0, 0}, NormMode::PerSample);
  for (const auto& s : p.samples)
    CHECK(s.frobenius_sq() == doctest::Approx(double(p.dims.size())).epsilon(1e-4));
}

TEST_CASE("dataset save/load round trip is bit-exact") {
  const auto dir = test::temp_dir("csi");
  auto cfg = small_cfg();

  SUBCASE("empty") {
    const auto ds = generate_dataset(cfg, {0, 0, 0}, NormMode::Global);
    save_dataset(ds, dir / "empty");
    CHECK(load_dataset(dir / "empty") == ds);
  }
  SUBCASE("one sample") {
    const auto ds = generate_dataset(cfg, {1, 0, 0}, NormMode::Global);
    save_dataset(ds, dir / "one");
    const auto back = load_dataset(dir / "one");
    CHECK(back == ds);
    CHECK(std::memcmp(back.samples[0].data().data(), ds.samples[0].data().data(),
                      ds.dims.size() * sizeof(cfloat)) == 0);
  }
  SUBCASE("64 samples with splits") {
    auto ds = generate_dataset(cfg, {40, 12, 12}, NormMode::PerSample);
    ds.name = "sixty-four";
    ds.fingerprint = "abc";
    save_dataset(ds, dir / "many");
    const auto back = load_dataset(dir / "many");
    CHECK(back == ds);
    for (auto s : {Split::Train, Split::Val, Split::Test}) {
      const auto x = ds.indices(s), y = back.indices(s);
      CHECK(std::set(x.begin(), x.end()) == std::set(y.begin(), y.end()));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt dataset files raise format errors") {
  const auto dir = test::temp_dir("csi_bad");
  auto cfg = small_cfg();
  const auto ds = generate_dataset(cfg, {3, 0, 0}, NormMode::Global);
  save_dataset(ds, dir / "d");

  SUBCASE("truncated payload") {
    const auto bin = dir / "d.csi";
    std::filesystem::resize_file(bin, std::filesystem::file_size(bin) - 5);
    CHECK(error_kind_of([&] { load_dataset(dir / "d"); }) == ErrorKind::Format);
  }
  SUBCASE("version mismatch") {
    std::ifstream is(dir / "d.json");
    auto j = nlohmann::json::parse(is);
    is.close();
    j["version"] = 99;
    std::ofstream(dir / "d.json") << j.dump();
    CHECK(error_kind_of([&] { load_dataset(dir / "d"); }) == ErrorKind::Format);
  }
  SUBCASE("dim mismatch") {
    std::ifstream is(dir / "d.json");
    auto j = nlohmann::json::parse(is);
    is.close();
    j["T"] = 4;
    std::ofstream(dir / "d.json") << j.dump();
    CHECK(error_kind_of([&] { load_dataset(dir / "d"); }) == ErrorKind::Format);
  }
  SUBCASE("missing file") {
    CHECK(error_kind_of([&] { load_dataset(dir / "nope"); }) == ErrorKind::Io);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("nearby dataset seeds draw disjoint sample pools") {
  auto cfg = small_cfg();
  std::vector<std::vector<CsiTensor>> pools;
  for (std::uint64_t s : {1, 2, 3}) {
    cfg.seed = s;
    pools.push_back(generate_dataset(cfg, {16, 0, 0}, NormMode::Global).samples);
  }
  for (std::size_t a = 0; a < pools.size(); ++a)
    for (std::size_t b = a + 1; b < pools.size(); ++b)
      for (const auto& x : pools[a])
        for (const auto& y : pools[b]) CHECK_FALSE(x == y);
  CHECK(sample_seed(7, 0) != 7);
  CHECK((sample_seed(7, 5) ^ sample_seed(7, 0)) == 5);
}
