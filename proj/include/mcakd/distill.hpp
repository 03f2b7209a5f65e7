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
#include <vector>

#include "mcakd/model.hpp"

namespace mcakd {

enum class CaKsSite : std::uint8_t { Embedding = 0, Encoder = 1, Decoder = 2 };
const char* to_string(CaKsSite site);

// Cross-attention knowledge selection: student features query teacher
// features; the head-averaged attention weights score each teacher
// dimension and the top D_s dimensions are gathered.
template <class S>
struct CaKsState {
  MatT<S> w_q;  // [D_s, d_a]
  MatT<S> w_k;  // [D_t, d_a]
  MatT<S> w_v;  // [D_t, d_a]
  int heads = 1;
  CaKsSite site = CaKsSite::Embedding;

  int teacher_dim() const { return static_cast<int>(w_k.rows()); }
  int student_dim() const { return static_cast<int>(w_q.rows()); }
  int attn_dim() const { return static_cast<int>(w_q.cols()); }
};

// d_a = 0 selects d_a = D_s.
CaKsState<float> init_caks(int teacher_dim, int student_dim, int attn_dim, int heads,
                           CaKsSite site, std::uint64_t seed);

// One instance per site, shared by all masking strategies.
struct CaKsSet {
  CaKsState<float> embedding;
  CaKsState<float> encoder;
  CaKsState<float> decoder;
};

CaKsSet init_caks_set(int teacher_dim, int student_dim, int attn_dim, int heads,
                      std::uint64_t seed);

template <class S>
struct Selection {
  std::vector<int> indices;  // [D_s] teacher dimensions, best first
  MatT<S> filtered;          // [S, D_s] gathered teacher features
  MatT<S> attn;              // [S, S] head-averaged cross-attention (empty for prefix)
  std::vector<S> scores;     // [D_t] importance (empty for prefix)
};

template <class S>
Selection<S> ca_ks_select(const MatT<S>& teacher, const MatT<S>& student, const CaKsState<S>& ck);

// Selection ablation: keep the first D_s teacher dimensions.
template <class S>
Selection<S> prefix_select(const MatT<S>& teacher, int student_dim);

// 1 - mean_r CosSim(target[r], student[r]). Accumulates d/d(student) into
// d_student when non-null. Zero-norm rows raise Error(Degenerate).
template <class S>
S row_cosine_loss(const MatT<S>& target, const MatT<S>& student, MatT<S>* d_student);

using AttnMaps = std::vector<std::vector<Mat>>;
template <class S>
using AttnMapsT = std::vector<std::vector<MatT<S>>>;

// One stack's attention term: 1 - mean over (layer, head) of the cosine
// between flattened teacher and student maps. Zero for an empty stack.
template <class S>
S attention_term(const AttnMapsT<S>& teacher, const AttnMapsT<S>& student, AttnMapsT<S>* d_student);

template <class S>
S attention_loss(const Taps<S>& teacher, const Taps<S>& student, TapGrads<S>* d_student);

enum class SelectMode : std::uint8_t { CrossAttention = 0, Prefix = 1 };

// Teacher features filtered down to the student's width, then row cosine.
// The gather indices are piecewise constant in the CA-KS projections, so no
// gradient reaches W_q / W_k / W_v; only d_student is produced.
template <class S>
S feature_loss(const MatT<S>& teacher, const MatT<S>& student, const CaKsState<S>& ck,
               SelectMode mode, MatT<S>* d_student, Selection<S>* selection = nullptr);

template <class S>
S embedding_loss(const MatT<S>& e_teacher, const MatT<S>& e_student, const CaKsState<S>& ck,
                 SelectMode mode, MatT<S>* d_student);

template <class S>
S hidden_loss(const MatT<S>& enc_teacher, const MatT<S>& enc_student, const MatT<S>& dec_teacher,
              const MatT<S>& dec_student, const CaKsState<S>& ck_enc, const CaKsState<S>& ck_dec,
              SelectMode mode, MatT<S>* d_enc_student, MatT<S>* d_dec_student);

struct DistillToggles {
  bool attn = true;
  bool embed = true;
  bool hs = true;
  SelectMode select = SelectMode::CrossAttention;
};

struct DistillLosses {
  double l_attn = 0.0;
  double l_embed = 0.0;
  double l_hs = 0.0;
  double l_mcakd = 0.0;
  double l_mse = 0.0;
};

// l_mcakd = l_attn + l_embed + l_hs; disabled components contribute 0.
// When grads is non-null it receives dl_mcakd/d(student taps).
template <class S>
DistillLosses mcakd_loss(const Taps<S>& teacher, const Taps<S>& student, const CaKsSet& caks,
                         const DistillToggles& toggles, TapGrads<S>* grads);

// Mean squared complex error over the masked entries.
double mse_loss(const CsiTensor& h_hat, const CsiTensor& h, const MaskSet& mask,
                const PatchSpec& spec);

// Same quantity on token rows: sum over masked rows of ||out - target||^2
// divided by the number of masked complex entries.
template <class S>
S masked_token_mse(const MatT<S>& out, const MatT<S>& target, const MaskSet& mask,
                   MatT<S>* d_out);

template <class S>
CaKsState<S> cast_caks(const CaKsState<float>& ck) {
  return {ck.w_q.template cast<S>(), ck.w_k.template cast<S>(), ck.w_v.template cast<S>(),
          ck.heads, ck.site};
}

}  // namespace mcakd
