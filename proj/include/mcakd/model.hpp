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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcakd/csi.hpp"
#include "mcakd/tokenize.hpp"

namespace mcakd {

struct ModelConfig {
  int depth_enc = 6;
  int depth_dec = 4;
  int heads = 8;
  int dim = 512;
  double mlp_ratio = 4.0;
  PatchSpec patch;
  int max_tokens = 4096;

  int head_dim() const { return dim / heads; }
  int mlp_hidden() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class Role : std::uint8_t { Teacher = 0, Student = 1 };
const char* to_string(Role r);
Role role_from_string(const std::string& s);

// Learnable scalars of a ModelConfig. Closed form, with h = round(mlp_ratio * D):
//   F*D + D            token embedding
//   D                  mask token
//   D*F + F            reconstruction head
//   per block: 4D (two norms) + 4(D^2 + D) (attention) + 2Dh + h + D (MLP)
// Positional encodings are fixed and contribute nothing.
std::uint64_t count_params(const ModelConfig& cfg);

template <class S>
struct BlockParams {
  MatT<S> ln1_g, ln1_b;
  MatT<S> wq, bq, wk, bk, wv, bv, wo, bo;
  MatT<S> ln2_g, ln2_b;
  MatT<S> w1, b1, w2, b2;

  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "ln1.gamma", self.ln1_g);
    f(prefix + "ln1.beta", self.ln1_b);
    f(prefix + "attn.wq", self.wq);
    f(prefix + "attn.bq", self.bq);
    f(prefix + "attn.wk", self.wk);
    f(prefix + "attn.bk", self.bk);
    f(prefix + "attn.wv", self.wv);
    f(prefix + "attn.bv", self.bv);
    f(prefix + "attn.wo", self.wo);
    f(prefix + "attn.bo", self.bo);
    f(prefix + "ln2.gamma", self.ln2_g);
    f(prefix + "ln2.beta", self.ln2_b);
    f(prefix + "mlp.w1", self.w1);
    f(prefix + "mlp.b1", self.b1);
    f(prefix + "mlp.w2", self.w2);
    f(prefix + "mlp.b2", self.b2);
  }
};

template <class S>
struct ModelParams {
  MatT<S> embed_w;     // [F, D]
  MatT<S> embed_b;     // [1, D]
  MatT<S> mask_token;  // [1, D]
  std::vector<BlockParams<S>> enc;
  std::vector<BlockParams<S>> dec;
  MatT<S> head_w;  // [D, F]
  MatT<S> head_b;  // [1, F]

  // Visits every parameter tensor in a fixed order: f(name, tensor).
  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  static ModelParams zeros(const ModelConfig& cfg);
  std::uint64_t scalar_count() const;
  bool all_finite() const;
  void set_zero();

  template <class T>
  ModelParams<T> cast() const;

  // Exact equality of every tensor's shape and values.
  bool operator==(const ModelParams& o) const {
    std::vector<const MatT<S>*> a, b;
    for_each([&](const std::string&, const MatT<S>& m) { a.push_back(&m); });
    o.for_each([&](const std::string&, const MatT<S>& m) { b.push_back(&m); });
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) return false;
      if (!std::equal(a[i]->data(), a[i]->data() + a[i]->size(), b[i]->data())) return false;
    }
    return true;
  }

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    f(std::string("embed.w"), self.embed_w);
    f(std::string("embed.b"), self.embed_b);
    f(std::string("mask_token"), self.mask_token);
    for (std::size_t l = 0; l < self.enc.size(); ++l)
      BlockParams<S>::visit(self.enc[l], "enc." + std::to_string(l) + ".", f);
    for (std::size_t l = 0; l < self.dec.size(); ++l)
      BlockParams<S>::visit(self.dec[l], "dec." + std::to_string(l) + ".", f);
    f(std::string("head.w"), self.head_w);
    f(std::string("head.b"), self.head_b);
  }
};

// dst += alpha * src, tensor by tensor.
template <class S>
void axpy(ModelParams<S>& dst, const ModelParams<S>& src, S alpha) {
  std::vector<const MatT<S>*> from;
  src.for_each([&](const std::string&, const MatT<S>& m) { from.push_back(&m); });
  std::size_t i = 0;
  dst.for_each([&](const std::string&, MatT<S>& m) {
    if (alpha == S(1)) m += *from[i++];
    else m += alpha * *from[i++];
  });
}

// Captured intermediates of one forward pass.
template <class S>
struct Taps {
  MatT<S> embedding;                          // E: [G, D], all tokens
  std::vector<std::vector<MatT<S>>> attn_enc;  // [L_e][H] of [V, V]
  std::vector<std::vector<MatT<S>>> attn_dec;  // [L_d][H] of [G, G]
  MatT<S> hidden_enc;                         // [V, D] after last encoder attention sub-layer
  MatT<S> hidden_dec;                         // [G, D] after last decoder attention sub-layer
};

// Upstream gradients on taps; empty matrices / vectors mean zero.
template <class S>
struct TapGrads {
  MatT<S> embedding;
  std::vector<std::vector<MatT<S>>> attn_enc;
  std::vector<std::vector<MatT<S>>> attn_dec;
  MatT<S> hidden_enc;
  MatT<S> hidden_dec;
};

template <class S>
struct BlockCache {
  MatT<S> x, xhat1, rstd1, h1, q, k, v, o, x1, xhat2, rstd2, h2, u, act;
};

template <class S>
struct ForwardPass {
  MatT<S> out;  // head output for every token: [G, F]
  Taps<S> taps;
  // backward state
  MatT<S> tokens;
  MatT<S> dec_out;
  MaskSet mask;
  std::vector<BlockCache<S>> enc_cache;
  std::vector<BlockCache<S>> dec_cache;
};

template <class S>
MatT<S> positional_encoding(const std::vector<GridCoord>& coords, int dim);

template <class S>
MatT<S> embed(const MatT<S>& tokens, const std::vector<GridCoord>& coords,
              const ModelParams<S>& params);

template <class S>
ForwardPass<S> forward_tokens(const ModelParams<S>& params, const ModelConfig& cfg,
                              const MatT<S>& tokens, const std::vector<GridCoord>& coords,
                              const MaskSet& mask);

// Accumulates parameter gradients into `grads` given dLoss/d(out) and
// optional tap gradients.
template <class S>
void backward(const ModelParams<S>& params, const ModelConfig& cfg, const ForwardPass<S>& pass,
              const MatT<S>& d_out, const TapGrads<S>* d_taps, ModelParams<S>& grads);

struct ModelState {
  ModelConfig config;
  Role role = Role::Teacher;
  ModelParams<float> params;

  bool operator==(const ModelState&) const = default;
};

// Truncated normal (sigma 0.02, cut at 2 sigma) weights, zero biases, unit norm gains.
ModelState init_model(const ModelConfig& cfg, Role role, std::uint64_t seed);

// Checks that the model can consume tensors of this shape.
void check_compatible(const ModelConfig& cfg, const CsiDims& dims);

struct Reconstruction {
  CsiTensor h_hat;
  Taps<float> taps;
};

// Masked reconstruction: visible entries copied from h, masked entries from the head.
Reconstruction forward(const CsiTensor& h, const MaskSet& mask, const ModelState& state);

CsiTensor assemble_prediction(const CsiTensor& h, const MaskSet& mask, const Mat& out_tokens,
                              const PatchSpec& spec);

CsiTensor predict(const CsiTensor& h, const TaskSpec& task, const ModelState& state);

// Teacher/student pair must share patching, depths and heads.
void check_distill_compatible(const ModelConfig& teacher, const ModelConfig& student);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelState& state, const std::filesystem::path& path,
                     const std::string& fingerprint = {});
ModelState load_checkpoint(const std::filesystem::path& path, std::string* fingerprint = nullptr);

}  // namespace mcakd
