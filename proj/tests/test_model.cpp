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
#include <random>

#include "mcakd/model.hpp"
#include "test_util.hpp"

using namespace mcakd;
using mcakd::test::error_kind_of;

namespace {

ModelConfig toy_cfg() {
  ModelConfig c;
  c.depth_enc = 2;
  c.depth_dec = 1;
  c.heads = 2;
  c.dim = 8;
  c.mlp_ratio = 2.0;
  c.patch = {2, 1, 1};
  c.max_tokens = 64;
  return c;
}

const CsiDims kDims{4, 2, 2};

// Scalar probe over the head output and every tap, with fixed random weights.
template <class S>
struct Probe {
  MatT<S> w_out, w_embed, w_henc, w_hdec;
  std::vector<std::vector<MatT<S>>> w_aenc, w_adec;

  static Probe make(const ForwardPass<S>& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Probe pr;
    auto like = [&](const MatT<S>& m) { return test::random_mat<S>(m.rows(), m.cols(), rng); };
    pr.w_out = like(p.out);
    pr.w_embed = like(p.taps.embedding);
    pr.w_henc = like(p.taps.hidden_enc);
    pr.w_hdec = like(p.taps.hidden_dec);
    for (const auto& l : p.taps.attn_enc) {
      pr.w_aenc.emplace_back();
      for (const auto& a : l) pr.w_aenc.back().push_back(like(a));
    }
    for (const auto& l : p.taps.attn_dec) {
      pr.w_adec.emplace_back();
      for (const auto& a : l) pr.w_adec.back().push_back(like(a));
    }
    return pr;
  }

  double value(const ForwardPass<S>& p) const {
    double v = (w_out.array() * p.out.array()).sum() +
               (w_embed.array() * p.taps.embedding.array()).sum() +
               (w_henc.array() * p.taps.hidden_enc.array()).sum() +
               (w_hdec.array() * p.taps.hidden_dec.array()).sum();
    for (std::size_t l = 0; l < w_aenc.size(); ++l)
      for (std::size_t h = 0; h < w_aenc[l].size(); ++h)
        v += (w_aenc[l][h].array() * p.taps.attn_enc[l][h].array()).sum();
    for (std::size_t l = 0; l < w_adec.size(); ++l)
      for (std::size_t h = 0; h < w_adec[l].size(); ++h)
        v += (w_adec[l][h].array() * p.taps.attn_dec[l][h].array()).sum();
    return v;
  }

  TapGrads<S> tap_grads() const {
    return {w_embed, w_aenc, w_adec, w_henc, w_hdec};
  }
};

struct GradError {
  double normwise = 0;  // ||fd - an|| / ||fd||
  std::size_t checked = 0;
};

template <class S>
GradError check_gradients(const ModelParams<S>& params0, const ModelConfig& cfg, const MatT<S>& tokens,
                          const std::vector<GridCoord>& coords, const MaskSet& mask, double h,
                          std::size_t stride) {
  auto pass = forward_tokens<S>(params0, cfg, tokens, coords, mask);
  const auto probe = Probe<S>::make(pass, 99);
  const auto tg = probe.tap_grads();
  auto grads = ModelParams<S>::zeros(cfg);
  backward<S>(params0, cfg, pass, probe.w_out, &tg, grads);

  std::vector<const MatT<S>*> an;
  grads.for_each([&](const std::string&, const MatT<S>& m) { an.push_back(&m); });
  ModelParams<S> params = params0;
  std::vector<MatT<S>*> ps;
  params.for_each([&](const std::string&, MatT<S>& m) { ps.push_back(&m); });

  double num = 0, den = 0;
  GradError err;
  std::size_t flat = 0;
  for (std::size_t t = 0; t < ps.size(); ++t) {
    for (Eigen::Index i = 0; i < ps[t]->size(); ++i, ++flat) {
      if (flat % stride) continue;
      S& x = ps[t]->data()[i];
      const S orig = x;
      x = orig + static_cast<S>(h);
      const double up = probe.value(forward_tokens<S>(params, cfg, tokens, coords, mask));
      x = orig - static_cast<S>(h);
      const double dn = probe.value(forward_tokens<S>(params, cfg, tokens, coords, mask));
      x = orig;
      const double fd = (up - dn) / (2 * h);
      const double a = an[t]->data()[i];
      num += (fd - a) * (fd - a);
      den += fd * fd;
      ++err.checked;
    }
  }
  err.normwise = std::sqrt(num / den);
  return err;
}

// Init with non-trivial LayerNorm affine and biases so every path is exercised.
template <class S>
ModelParams<S> perturbed_params(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = init_model(cfg, Role::Teacher, seed).params.template cast<S>();
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> nd(0.0, 0.3);
  p.for_each([&](const std::string&, MatT<S>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += static_cast<S>(nd(rng));
  });
  return p;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = toy_cfg();
  c.validate();
  c.dim = 9;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::Config);
  c = toy_cfg();
  c.depth_enc = -1;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::Config);
  c = toy_cfg();
  c.mlp_ratio = 0;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::Config);
}

TEST_CASE("count_params equals enumeration of the parameter tensors") {
  ModelConfig c;
  c.depth_enc = 2;
  c.depth_dec = 1;
  c.heads = 4;
  c.dim = 32;
  c.patch = {4, 2, 2};
  const auto st = init_model(c, Role::Student, 1);
  std::uint64_t n = 0;
  st.params.for_each([&](const std::string&, const Mat& m) { n += m.size(); });
  CHECK(n == count_params(c));
  CHECK(st.params.scalar_count() == count_params(c));
}

TEST_CASE("count_params closed form") {
  ModelConfig c = toy_cfg();
  c.depth_enc = 0;
  c.depth_dec = 0;
  const std::uint64_t F = c.patch.feature_width(), D = c.dim;
  // embedding projection + bias, mask token, head + bias; positional encoding is fixed
  CHECK(count_params(c) == F * D + D + D + D * F + F);

  ModelConfig a;
  a.dim = 256;
  ModelConfig b = a;
  b.dim = 512;
  const double ratio = double(count_params(b)) / double(count_params(a));
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.2);
}

TEST_CASE("init is deterministic per seed") {
  const auto c = toy_cfg();
  CHECK(init_model(c, Role::Teacher, 3) == init_model(c, Role::Teacher, 3));
  CHECK_FALSE(init_model(c, Role::Teacher, 3) == init_model(c, Role::Teacher, 4));
  const auto st = init_model(c, Role::Teacher, 3);
  CHECK(st.params.all_finite());
  CHECK(st.params.enc[0].ln1_g.isOnes());
  CHECK(st.params.enc[0].bq.isZero());
  CHECK(st.params.embed_w.cwiseAbs().maxCoeff() <= 0.04f);
}

TEST_CASE("embedding") {
  const auto c = toy_cfg();
  auto st = init_model(c, Role::Teacher, 5);
  const auto coords = token_grid(kDims, c.patch);
  const int G = static_cast<int>(coords.size());

  SUBCASE("zero tokens and zero bias give the positional encoding") {
    const Mat z = Mat::Zero(G, c.patch.feature_width());
    const Mat e = embed<float>(z, coords, st.params);
    CHECK(e == positional_encoding<float>(coords, c.dim));
  }
  SUBCASE("identical tokens at distinct coordinates differ") {
    const Mat ones = Mat::Ones(G, c.patch.feature_width());
    const Mat e = embed<float>(ones, coords, st.params);
    for (int i = 0; i < G; ++i)
      for (int j = i + 1; j < G; ++j) CHECK((e.row(i) - e.row(j)).norm() > 1e-3f);
  }
  SUBCASE("shape [8, 32]") {
    ModelConfig c32 = c;
    c32.dim = 32;
    c32.heads = 4;
    const CsiDims d{4, 4, 2};
    c32.patch = {2, 1, 1};
    const auto co = token_grid(d, c32.patch);
    REQUIRE(co.size() == 16);
    c32.patch = {2, 2, 1};
    const auto co8 = token_grid(d, c32.patch);
    const auto s32 = init_model(c32, Role::Student, 1);
    const Mat e = embed<float>(patchify(test::random_tensor(d, 1), c32.patch).tokens, co8, s32.params);
    CHECK(e.rows() == 8);
    CHECK(e.cols() == 32);
  }
  SUBCASE("width mismatch") {
    const Mat bad = Mat::Zero(G, c.patch.feature_width() + 1);
    CHECK(error_kind_of([&] { embed<float>(bad, coords, st.params); }) == ErrorKind::Contract);
  }
}

TEST_CASE("forward: taps, stochastic attention and determinism") {
  const auto c = toy_cfg();
  const auto st = init_model(c, Role::Teacher, 8);
  const auto h = test::random_tensor(kDims, 8);
  const int G = c.patch.token_count(kDims);
  const auto mask = make_random_mask(0.5, G, 1);
  const int V = static_cast<int>(mask.visible_idx.size());
  const auto r = forward(h, mask, st);
  CHECK(r.h_hat.all_finite());
  REQUIRE(r.taps.attn_enc.size() == 2);
  REQUIRE(r.taps.attn_dec.size() == 1);
  for (const auto& l : r.taps.attn_enc)
    for (const auto& a : l) {
      CHECK(a.rows() == V);
      CHECK(a.cols() == V);
      CHECK(a.minCoeff() >= 0.0f);
      for (int i = 0; i < a.rows(); ++i) CHECK(std::abs(a.row(i).sum() - 1.0f) < 1e-5f);
    }
  for (const auto& a : r.taps.attn_dec[0]) {
    CHECK(a.rows() == G);
    for (int i = 0; i < a.rows(); ++i) CHECK(std::abs(a.row(i).sum() - 1.0f) < 1e-5f);
  }
  CHECK(r.taps.embedding.rows() == G);
  CHECK(r.taps.hidden_enc.rows() == V);
  CHECK(r.taps.hidden_dec.rows() == G);

  const auto again = forward(h, mask, st);
  CHECK(again.h_hat == r.h_hat);
  CHECK(again.taps.attn_dec == r.taps.attn_dec);
  CHECK(again.taps.hidden_enc == r.taps.hidden_enc);
}

TEST_CASE("forward with a single masked token") {
  const auto c = toy_cfg();
  const auto st = init_model(c, Role::Teacher, 2);
  const int G = c.patch.token_count(kDims);
  MaskSet m;
  for (int g = 0; g < G - 1; ++g) m.visible_idx.push_back(g);
  m.masked_idx = {G - 1};
  m.ratio = 1.0 / G;
  const auto r = forward(test::random_tensor(kDims, 3), m, st);
  for (const auto& l : r.taps.attn_enc)
    for (const auto& a : l) {
      CHECK(a.rows() == G - 1);
      CHECK(a.cols() == G - 1);
    }
}

TEST_CASE("depth zero model runs and taps the embedding stack") {
  auto c = toy_cfg();
  c.depth_enc = 0;
  c.depth_dec = 0;
  const auto st = init_model(c, Role::Teacher, 2);
  const auto mask = make_random_mask(0.5, c.patch.token_count(kDims), 4);
  const auto r = forward(test::random_tensor(kDims, 3), mask, st);
  CHECK(r.taps.attn_enc.empty());
  CHECK(r.taps.hidden_enc.rows() == static_cast<int>(mask.visible_idx.size()));
  CHECK(r.h_hat.all_finite());
}

TEST_CASE("predict passes visible entries through and fills only the task region") {
  auto c = toy_cfg();
  c.patch = {1, 1, 1};
  const CsiDims d{4, 4, 1};
  const auto st = init_model(c, Role::Teacher, 6);
  const auto h = test::random_tensor(d, 6);

  const auto last = predict(h, {TaskKind::Time, d.T - 1}, st);
  for (int t = 0; t < d.T; ++t)
    for (int k = 0; k < d.K; ++k) {
      if (t < d.T - 1) CHECK(last(t, k, 0) == h(t, k, 0));
      else CHECK_FALSE(last(t, k, 0) == h(t, k, 0));
    }

  const auto freq = predict(h, {TaskKind::Frequency, d.K / 2}, st);
  const auto m = task_mask({TaskKind::Frequency, d.K / 2}, d, c.patch);
  const auto coords = token_grid(d, c.patch);
  for (int g : m.masked_idx) CHECK(coords[g].k >= d.K / 2);
  CHECK(m.masked_idx.size() == coords.size() / 2);
  for (int t = 0; t < d.T; ++t)
    for (int k = 0; k < d.K / 2; ++k) CHECK(freq(t, k, 0) == h(t, k, 0));
}

TEST_CASE("non-finite activations name the layer") {
  const auto c = toy_cfg();
  auto st = init_model(c, Role::Teacher, 2);
  st.params.enc[1].w1(0, 0) = std::nanf("");
  const auto mask = make_random_mask(0.5, c.patch.token_count(kDims), 4);
  try {
    forward(test::random_tensor(kDims, 3), mask, st);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("encoder layer 1") != std::string::npos);
  }
}

TEST_CASE("incompatible inputs") {
  const auto c = toy_cfg();
  const auto st = init_model(c, Role::Teacher, 2);
  const auto mask = make_random_mask(0.5, c.patch.token_count(kDims), 4);
  CHECK(error_kind_of([&] { forward(test::random_tensor({3, 2, 2}, 1), mask, st); }) ==
        ErrorKind::Config);
  const auto wrong = make_random_mask(0.5, 4, 4);
  CHECK(error_kind_of([&] { forward(test::random_tensor(kDims, 1), wrong, st); }) ==
        ErrorKind::Contract);
}

TEST_CASE("distillation compatibility") {
  auto t = toy_cfg();
  t.dim = 16;
  auto s = toy_cfg();
  check_distill_compatible(t, s);
  s.heads = 4;
  CHECK(error_kind_of([&] { check_distill_compatible(t, s); }) == ErrorKind::Contract);
  s = toy_cfg();
  s.depth_dec = 2;
  CHECK(error_kind_of([&] { check_distill_compatible(t, s); }) == ErrorKind::Contract);
  s = toy_cfg();
  s.dim = 32;
  s.heads = 2;
  CHECK(error_kind_of([&] { check_distill_compatible(t, s); }) == ErrorKind::Contract);
}

TEST_CASE("gradients match central differences in double precision") {
  const auto c = toy_cfg();
  const auto params = perturbed_params<double>(c, 21);
  const auto tb = patchify(test::random_tensor(kDims, 22), c.patch);
  const auto mask = make_random_mask(0.5, tb.count(), 23);
  const auto err = check_gradients<double>(params, c, tb.tokens.cast<double>(), tb.coords, mask,
                                           1e-5, 1);
  CHECK(err.checked == count_params(c));
  CHECK(err.normwise < 1e-6);
}

TEST_CASE("gradients match central differences in single precision") {
  const auto c = toy_cfg();
  const auto params = perturbed_params<float>(c, 31);
  const auto tb = patchify(test::random_tensor(kDims, 32), c.patch);
  const auto mask = make_time_mask(2, tb.coords, c.patch);
  const auto err = check_gradients<float>(params, c, tb.tokens, tb.coords, mask, 1e-2, 3);
  CHECK(err.normwise < 1e-3);
}

TEST_CASE("checkpoint round trip is bit-exact and corruption is detected") {
  const auto dir = test::temp_dir("ckpt");
  const auto c = toy_cfg();
  const auto st = init_model(c, Role::Student, 12);
  save_checkpoint(st, dir / "a.ckpt", "fp123");
  std::string fp;
  const auto back = load_checkpoint(dir / "a.ckpt", &fp);
  CHECK(back == st);
  CHECK(fp == "fp123");

  SUBCASE("truncated") {
    std::filesystem::resize_file(dir / "a.ckpt", std::filesystem::file_size(dir / "a.ckpt") - 3);
    CHECK(error_kind_of([&] { load_checkpoint(dir / "a.ckpt"); }) == ErrorKind::Format);
  }
  SUBCASE("trailing bytes") {
    std::ofstream(dir / "a.ckpt", std::ios::app | std::ios::binary) << "xx";
    CHECK(error_kind_of([&] { load_checkpoint(dir / "a.ckpt"); }) == ErrorKind::Format);
  }
  SUBCASE("bad magic") {
    std::ofstream(dir / "b.ckpt", std::ios::binary) << "NOTACKPTxxxxxxxxxxxxxxxx";
    CHECK(error_kind_of([&] { load_checkpoint(dir / "b.ckpt"); }) == ErrorKind::Format);
  }
  SUBCASE("missing") {
    CHECK(error_kind_of([&] { load_checkpoint(dir / "none.ckpt"); }) == ErrorKind::Io);
  }
  std::filesystem::remove_all(dir);
}
