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

#include "mcakd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <type_traits>

#include "mcakd/error.hpp"

namespace mcakd {

const char* to_string(CaKsSite site) {
  switch (site) {
    case CaKsSite::Embedding: return "embedding";
    case CaKsSite::Encoder: return "encoder";
    case CaKsSite::Decoder: return "decoder";
  }
  return "embedding";
}

CaKsState<float> init_caks(int teacher_dim, int student_dim, int attn_dim, int heads,
                           CaKsSite site, std::uint64_t seed) {
  if (attn_dim == 0) attn_dim = student_dim;
  require(teacher_dim > 0 && student_dim > 0 && attn_dim > 0 && heads > 0, ErrorKind::Config,
          "CA-KS dims and heads must be positive");
  require(attn_dim % heads == 0, ErrorKind::Config,
          "CA-KS attention dim " + std::to_string(attn_dim) + " not divisible by heads " +
              std::to_string(heads));
  require(student_dim <= teacher_dim, ErrorKind::Contract,
          "CA-KS: student dim exceeds teacher dim");
  CaKsState<float> ck;
  ck.heads = heads;
  ck.site = site;
  ck.w_q.resize(student_dim, attn_dim);
  ck.w_k.resize(teacher_dim, attn_dim);
  ck.w_v.resize(teacher_dim, attn_dim);
  std::mt19937_64 rng(seed);
  // Xavier-style scale keeps the pre-softmax logits O(1).
  std::normal_distribution<double> wq(0.0, 1.0 / std::sqrt(static_cast<double>(student_dim)));
  std::normal_distribution<double> wkv(0.0, 1.0 / std::sqrt(static_cast<double>(teacher_dim)));
  for (Eigen::Index i = 0; i < ck.w_q.size(); ++i) ck.w_q.data()[i] = static_cast<float>(wq(rng));
  for (Eigen::Index i = 0; i < ck.w_k.size(); ++i) ck.w_k.data()[i] = static_cast<float>(wkv(rng));
  for (Eigen::Index i = 0; i < ck.w_v.size(); ++i) ck.w_v.data()[i] = static_cast<float>(wkv(rng));
  return ck;
}

CaKsSet init_caks_set(int teacher_dim, int student_dim, int attn_dim, int heads,
                      std::uint64_t seed) {
  return {init_caks(teacher_dim, student_dim, attn_dim, heads, CaKsSite::Embedding, seed),
          init_caks(teacher_dim, student_dim, attn_dim, heads, CaKsSite::Encoder, seed + 1),
          init_caks(teacher_dim, student_dim, attn_dim, heads, CaKsSite::Decoder, seed + 2)};
}

template <class S>
Selection<S> ca_ks_select(const MatT<S>& teacher, const MatT<S>& student, const CaKsState<S>& ck) {
  const auto seq = teacher.rows();
  const auto d_t = teacher.cols();
  const auto d_s = student.cols();
  require(seq >= 1, ErrorKind::Contract, "CA-KS: empty sequence");
  require(student.rows() == seq, ErrorKind::Contract,
          "CA-KS: teacher/student sequence lengths differ");
  require(d_s <= d_t, ErrorKind::Contract,
          "CA-KS: D_s = " + std::to_string(d_s) + " exceeds D_t = " + std::to_string(d_t));
  require(ck.w_q.rows() == d_s && ck.w_k.rows() == d_t && ck.w_v.rows() == d_t,
          ErrorKind::Contract, "CA-KS: projection shapes do not match feature widths");

  const MatT<S> q = student * ck.w_q;
  const MatT<S> k = teacher * ck.w_k;
  const int dh = ck.attn_dim() / ck.heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  Selection<S> sel;
  sel.attn = MatT<S>::Zero(seq, seq);
  for (int h = 0; h < ck.heads; ++h) {
    MatT<S> w = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
    for (Eigen::Index r = 0; r < seq; ++r) {
      const S mx = w.row(r).maxCoeff();
      w.row(r) = (w.row(r).array() - mx).exp();
      w.row(r) /= w.row(r).sum();
    }
    sel.attn += w;
  }
  sel.attn /= static_cast<S>(ck.heads);

  // s(d) = sum_l sum_s' A[l, s'] E_t[s', d]
  const MatT<S> score = sel.attn.colwise().sum() * teacher;
  sel.scores.assign(score.data(), score.data() + d_t);

  std::vector<int> order(d_t);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sel.scores[a] > sel.scores[b]; });
  sel.indices.assign(order.begin(), order.begin() + d_s);

  sel.filtered.resize(seq, d_s);
  for (Eigen::Index j = 0; j < d_s; ++j) sel.filtered.col(j) = teacher.col(sel.indices[j]);
  return sel;
}

template <class S>
Selection<S> prefix_select(const MatT<S>& teacher, int student_dim) {
  require(student_dim <= teacher.cols(), ErrorKind::Contract,
          "prefix selection: D_s exceeds D_t");
  Selection<S> sel;
  sel.indices.resize(student_dim);
  std::iota(sel.indices.begin(), sel.indices.end(), 0);
  sel.filtered = teacher.leftCols(student_dim);
  return sel;
}

template <class S>
S row_cosine_loss(const MatT<S>& target, const MatT<S>& student, MatT<S>* d_student) {
  require(target.rows() == student.rows() && target.cols() == student.cols(), ErrorKind::Contract,
          "cosine loss: shape mismatch");
  const auto rows = target.rows();
  require(rows > 0, ErrorKind::Contract, "cosine loss: no rows");
  if (d_student && d_student->size() == 0) *d_student = MatT<S>::Zero(rows, student.cols());
  S acc = 0;
  const S inv_rows = S(1) / static_cast<S>(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S nt = target.row(r).norm();
    const S ns = student.row(r).norm();
    require(nt > 0 && ns > 0, ErrorKind::Degenerate,
            "cosine loss: zero-norm vector at row " + std::to_string(r));
    const S dot = target.row(r).dot(student.row(r));
    const S cos = std::clamp(dot / (nt * ns), S(-1), S(1));
    acc += cos;
    if (d_student)
      d_student->row(r) -= inv_rows * (target.row(r) / (nt * ns) - cos * student.row(r) / (ns * ns));
  }
  // acc / rows (not acc * inv_rows) keeps the mean inside [-1, 1] under rounding
  return S(1) - acc / static_cast<S>(rows);
}

template <class S>
S attention_term(const AttnMapsT<S>& teacher, const AttnMapsT<S>& student,
                 AttnMapsT<S>* d_student) {
  require(teacher.size() == student.size(), ErrorKind::Contract,
          "attention loss: layer counts differ");
  if (teacher.empty()) return S(0);
  std::size_t pairs = 0;
  for (std::size_t l = 0; l < teacher.size(); ++l) {
    require(teacher[l].size() == student[l].size(), ErrorKind::Contract,
            "attention loss: head counts differ at layer " + std::to_string(l));
    pairs += teacher[l].size();
  }
  require(pairs > 0, ErrorKind::Contract, "attention loss: no heads");
  const S inv = S(1) / static_cast<S>(pairs);
  if (d_student) {
    d_student->resize(student.size());
    for (std::size_t l = 0; l < student.size(); ++l) d_student->at(l).resize(student[l].size());
  }
  S acc = 0;
  for (std::size_t l = 0; l < teacher.size(); ++l) {
    for (std::size_t h = 0; h < teacher[l].size(); ++h) {
      const MatT<S>& a = teacher[l][h];
      const MatT<S>& b = student[l][h];
      require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Contract,
              "attention loss: map shapes differ at layer " + std::to_string(l) + " head " +
                  std::to_string(h));
      // flatten(last two axes): a row-major map is already contiguous
      const S na = a.norm();
      const S nb = b.norm();
      require(na > 0 && nb > 0, ErrorKind::Degenerate,
              "attention loss: zero-norm map at layer " + std::to_string(l) + " head " +
                  std::to_string(h));
      const S dot = (a.array() * b.array()).sum();
      const S cos = std::clamp(dot / (na * nb), S(-1), S(1));
      acc += cos;
      if (d_student) {
        MatT<S>& g = (*d_student)[l][h];
        MatT<S> step = -inv * (a / (na * nb) - cos * b / (nb * nb));
        if (g.size() == 0) g = std::move(step);
        else g += step;
      }
    }
  }
  return S(1) - acc / static_cast<S>(pairs);
}

template <class S>
S attention_loss(const Taps<S>& teacher, const Taps<S>& student, TapGrads<S>* d_student) {
  const S enc = attention_term<S>(teacher.attn_enc, student.attn_enc,
                                  d_student ? &d_student->attn_enc : nullptr);
  const S dec = attention_term<S>(teacher.attn_dec, student.attn_dec,
                                  d_student ? &d_student->attn_dec : nullptr);
  return enc + dec;
}

template <class S>
S feature_loss(const MatT<S>& teacher, const MatT<S>& student, const CaKsState<S>& ck,
               SelectMode mode, MatT<S>* d_student, Selection<S>* selection) {
  Selection<S> sel = mode == SelectMode::CrossAttention
                         ? ca_ks_select<S>(teacher, student, ck)
                         : prefix_select<S>(teacher, static_cast<int>(student.cols()));
  const S loss = row_cosine_loss<S>(sel.filtered, student, d_student);
  if (selection) *selection = std::move(sel);
  return loss;
}

template <class S>
S embedding_loss(const MatT<S>& e_teacher, const MatT<S>& e_student, const CaKsState<S>& ck,
                 SelectMode mode, MatT<S>* d_student) {
  return feature_loss<S>(e_teacher, e_student, ck, mode, d_student);
}

template <class S>
S hidden_loss(const MatT<S>& enc_teacher, const MatT<S>& enc_student, const MatT<S>& dec_teacher,
              const MatT<S>& dec_student, const CaKsState<S>& ck_enc, const CaKsState<S>& ck_dec,
              SelectMode mode, MatT<S>* d_enc_student, MatT<S>* d_dec_student) {
  const S enc = feature_loss<S>(enc_teacher, enc_student, ck_enc, mode, d_enc_student);
  const S dec = feature_loss<S>(dec_teacher, dec_student, ck_dec, mode, d_dec_student);
  return enc + dec;
}

namespace {

template <class S>
const CaKsState<S>& as_scalar(const CaKsState<float>& ck, CaKsState<S>& storage) {
  if constexpr (std::is_same_v<S, float>) {
    return ck;
  } else {
    storage = cast_caks<S>(ck);
    return storage;
  }
}

}  // namespace

template <class S>
DistillLosses mcakd_loss(const Taps<S>& teacher, const Taps<S>& student, const CaKsSet& caks,
                         const DistillToggles& toggles, TapGrads<S>* grads) {
  DistillLosses out;
  if (toggles.attn) out.l_attn = static_cast<double>(attention_loss<S>(teacher, student, grads));
  CaKsState<S> tmp;
  if (toggles.embed)
    out.l_embed = static_cast<double>(embedding_loss<S>(
        teacher.embedding, student.embedding, as_scalar<S>(caks.embedding, tmp), toggles.select,
        grads ? &grads->embedding : nullptr));
  if (toggles.hs) {
    CaKsState<S> tmp_dec;
    out.l_hs = static_cast<double>(hidden_loss<S>(
        teacher.hidden_enc, student.hidden_enc, teacher.hidden_dec, student.hidden_dec,
        as_scalar<S>(caks.encoder, tmp), as_scalar<S>(caks.decoder, tmp_dec), toggles.select,
        grads ? &grads->hidden_enc : nullptr, grads ? &grads->hidden_dec : nullptr));
  }
  out.l_mcakd = out.l_attn + out.l_embed + out.l_hs;
  return out;
}

double mse_loss(const CsiTensor& h_hat, const CsiTensor& h, const MaskSet& mask,
                const PatchSpec& spec) {
  require(h_hat.dims() == h.dims(), ErrorKind::Contract, "mse_loss: dims differ");
  require(!mask.masked_idx.empty(), ErrorKind::Degenerate, "mse_loss: empty masked set");
  const auto coords = token_grid(h.dims(), spec);
  require(static_cast<std::size_t>(mask.token_count()) == coords.size(), ErrorKind::Contract,
          "mse_loss: mask does not match patching");
  double acc = 0.0;
  std::size_t entries = 0;
  for (int g : mask.masked_idx) {
    const auto& c = coords[g];
    for (int dt = 0; dt < spec.p_t; ++dt)
      for (int dk = 0; dk < spec.p_k; ++dk)
        for (int dn = 0; dn < spec.p_n; ++dn) {
          const int t = c.t * spec.p_t + dt, k = c.k * spec.p_k + dk, n = c.n * spec.p_n + dn;
          acc += std::norm(std::complex<double>(h(t, k, n)) - std::complex<double>(h_hat(t, k, n)));
          ++entries;
        }
  }
  return acc / static_cast<double>(entries);
}

template <class S>
S masked_token_mse(const MatT<S>& out, const MatT<S>& target, const MaskSet& mask,
                   MatT<S>* d_out) {
  require(out.rows() == target.rows() && out.cols() == target.cols(), ErrorKind::Contract,
          "masked_token_mse: shape mismatch");
  require(!mask.masked_idx.empty(), ErrorKind::Degenerate, "masked_token_mse: empty masked set");
  const S entries = static_cast<S>(mask.masked_idx.size()) * static_cast<S>(out.cols() / 2);
  if (d_out && d_out->size() == 0) *d_out = MatT<S>::Zero(out.rows(), out.cols());
  S acc = 0;
  for (int g : mask.masked_idx) {
    const auto diff = (out.row(g) - target.row(g)).eval();
    acc += diff.squaredNorm();
    if (d_out) d_out->row(g) += (S(2) / entries) * diff;
  }
  return acc / entries;
}

#define MCAKD_INSTANTIATE(S)                                                                      \
  template Selection<S> ca_ks_select<S>(const MatT<S>&, const MatT<S>&, const CaKsState<S>&);    \
  template Selection<S> prefix_select<S>(const MatT<S>&, int);                                   \
  template S row_cosine_loss<S>(const MatT<S>&, const MatT<S>&, MatT<S>*);                       \
  template S attention_term<S>(const AttnMapsT<S>&, const AttnMapsT<S>&, AttnMapsT<S>*);         \
  template S attention_loss<S>(const Taps<S>&, const Taps<S>&, TapGrads<S>*);                    \
  template S feature_loss<S>(const MatT<S>&, const MatT<S>&, const CaKsState<S>&, SelectMode,    \
                             MatT<S>*, Selection<S>*);                                            \
  template S embedding_loss<S>(const MatT<S>&, const MatT<S>&, const CaKsState<S>&, SelectMode,  \
                               MatT<S>*);                                                         \
  template S hidden_loss<S>(const MatT<S>&, const MatT<S>&, const MatT<S>&, const MatT<S>&,       \
                            const CaKsState<S>&, const CaKsState<S>&, SelectMode, MatT<S>*,      \
                            MatT<S>*);                                                            \
  template DistillLosses mcakd_loss<S>(const Taps<S>&, const Taps<S>&, const CaKsSet&,           \
                                       const DistillToggles&, TapGrads<S>*);                     \
  template S masked_token_mse<S>(const MatT<S>&, const MatT<S>&, const MaskSet&, MatT<S>*);

MCAKD_INSTANTIATE(float)
MCAKD_INSTANTIATE(double)
#undef MCAKD_INSTANTIATE

}  // namespace mcakd
