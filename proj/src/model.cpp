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

#include "mcakd/model.hpp"

#include <cmath>
#include <random>

#include "mcakd/error.hpp"

namespace mcakd {

int ModelConfig::mlp_hidden() const {
  return static_cast<int>(std::lround(mlp_ratio * dim));
}

void ModelConfig::validate() const {
  require(depth_enc >= 0 && depth_dec >= 0, ErrorKind::Config, "model depths must be >= 0");
  require(heads > 0 && dim > 0, ErrorKind::Config, "model heads and dim must be positive");
  require(dim % heads == 0, ErrorKind::Config,
          "model dim " + std::to_string(dim) + " is not divisible by heads " +
              std::to_string(heads));
  require(mlp_ratio > 0 && mlp_hidden() > 0, ErrorKind::Config, "mlp_ratio must be positive");
  require(patch.p_t > 0 && patch.p_k > 0 && patch.p_n > 0, ErrorKind::Config,
          "patch sizes must be positive");
  require(max_tokens > 0, ErrorKind::Config, "max_tokens must be positive");
}

const char* to_string(Role r) { return r == Role::Teacher ? "teacher" : "student"; }

Role role_from_string(const std::string& s) {
  if (s == "teacher") return Role::Teacher;
  if (s == "student") return Role::Student;
  fail(ErrorKind::Config, "unknown role '" + s + "'");
}

std::uint64_t count_params(const ModelConfig& cfg) {
  const std::uint64_t D = cfg.dim;
  const std::uint64_t F = cfg.patch.feature_width();
  const std::uint64_t h = cfg.mlp_hidden();
  const std::uint64_t block = 4 * D + 4 * (D * D + D) + 2 * D * h + h + D;
  return (F * D + D) + D + (D * F + F) +
         static_cast<std::uint64_t>(cfg.depth_enc + cfg.depth_dec) * block;
}

namespace {

template <class S>
BlockParams<S> zero_block(int D, int h) {
  BlockParams<S> b;
  b.ln1_g = MatT<S>::Zero(1, D);
  b.ln1_b = MatT<S>::Zero(1, D);
  b.wq = MatT<S>::Zero(D, D);
  b.bq = MatT<S>::Zero(1, D);
  b.wk = MatT<S>::Zero(D, D);
  b.bk = MatT<S>::Zero(1, D);
  b.wv = MatT<S>::Zero(D, D);
  b.bv = MatT<S>::Zero(1, D);
  b.wo = MatT<S>::Zero(D, D);
  b.bo = MatT<S>::Zero(1, D);
  b.ln2_g = MatT<S>::Zero(1, D);
  b.ln2_b = MatT<S>::Zero(1, D);
  b.w1 = MatT<S>::Zero(D, h);
  b.b1 = MatT<S>::Zero(1, h);
  b.w2 = MatT<S>::Zero(h, D);
  b.b2 = MatT<S>::Zero(1, D);
  return b;
}

}  // namespace

template <class S>
ModelParams<S> ModelParams<S>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const int D = cfg.dim;
  const int F = cfg.patch.feature_width();
  ModelParams p;
  p.embed_w = MatT<S>::Zero(F, D);
  p.embed_b = MatT<S>::Zero(1, D);
  p.mask_token = MatT<S>::Zero(1, D);
  for (int l = 0; l < cfg.depth_enc; ++l) p.enc.push_back(zero_block<S>(D, cfg.mlp_hidden()));
  for (int l = 0; l < cfg.depth_dec; ++l) p.dec.push_back(zero_block<S>(D, cfg.mlp_hidden()));
  p.head_w = MatT<S>::Zero(D, F);
  p.head_b = MatT<S>::Zero(1, F);
  return p;
}

template <class S>
std::uint64_t ModelParams<S>::scalar_count() const {
  std::uint64_t n = 0;
  for_each([&](const std::string&, const MatT<S>& m) { n += m.size(); });
  return n;
}

template <class S>
bool ModelParams<S>::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const MatT<S>& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <class S>
void ModelParams<S>::set_zero() {
  for_each([](const std::string&, MatT<S>& m) { m.setZero(); });
}

template <class S>
template <class T>
ModelParams<T> ModelParams<S>::cast() const {
  ModelParams<T> out;
  auto c = [](const MatT<S>& m) -> MatT<T> { return m.template cast<T>(); };
  out.embed_w = c(embed_w);
  out.embed_b = c(embed_b);
  out.mask_token = c(mask_token);
  auto cast_blocks = [&](const std::vector<BlockParams<S>>& src) {
    std::vector<BlockParams<T>> dst(src.size());
    for (std::size_t l = 0; l < src.size(); ++l) {
      const auto& s = src[l];
      auto& d = dst[l];
      d.ln1_g = c(s.ln1_g), d.ln1_b = c(s.ln1_b);
      d.wq = c(s.wq), d.bq = c(s.bq), d.wk = c(s.wk), d.bk = c(s.bk);
      d.wv = c(s.wv), d.bv = c(s.bv), d.wo = c(s.wo), d.bo = c(s.bo);
      d.ln2_g = c(s.ln2_g), d.ln2_b = c(s.ln2_b);
      d.w1 = c(s.w1), d.b1 = c(s.b1), d.w2 = c(s.w2), d.b2 = c(s.b2);
    }
    return dst;
  };
  out.enc = cast_blocks(enc);
  out.dec = cast_blocks(dec);
  out.head_w = c(head_w);
  out.head_b = c(head_b);
  return out;
}

template <class S>
MatT<S> positional_encoding(const std::vector<GridCoord>& coords, int dim) {
  // D is split across the (t, k, n) axes; each axis gets a standard
  // sin/cos ladder over its own width.
  const int base = (dim / 3) & ~1;
  const int widths[3] = {base, base, dim - 2 * base};
  MatT<S> pe(static_cast<Eigen::Index>(coords.size()), dim);
  for (std::size_t g = 0; g < coords.size(); ++g) {
    const int pos[3] = {coords[g].t, coords[g].k, coords[g].n};
    int col = 0;
    for (int axis = 0; axis < 3; ++axis) {
      const int w = widths[axis];
      for (int j = 0; j < w; ++j, ++col) {
        const double freq = std::pow(10000.0, -static_cast<double>(j / 2 * 2) / std::max(w, 1));
        const double angle = pos[axis] * freq;
        pe(g, col) = static_cast<S>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
      }
    }
  }
  return pe;
}

template <class S>
MatT<S> embed(const MatT<S>& tokens, const std::vector<GridCoord>& coords,
              const ModelParams<S>& params) {
  require(tokens.cols() == params.embed_w.rows(), ErrorKind::Contract,
          "embed: token width " + std::to_string(tokens.cols()) + " does not match model width " +
              std::to_string(params.embed_w.rows()));
  require(static_cast<std::size_t>(tokens.rows()) == coords.size(), ErrorKind::Contract,
          "embed: token count does not match coordinate count");
  MatT<S> e = tokens * params.embed_w;
  e.rowwise() += params.embed_b.row(0);
  e += positional_encoding<S>(coords, static_cast<int>(params.embed_w.cols()));
  return e;
}

namespace {

template <class S>
constexpr S kLnEps = S(1e-5);

template <class S>
void layer_norm(const MatT<S>& x, const MatT<S>& gamma, const MatT<S>& beta, MatT<S>& xhat,
                MatT<S>& rstd, MatT<S>& y) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  xhat.resize(rows, cols);
  rstd.resize(rows, 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S mu = x.row(r).mean();
    const S var = (x.row(r).array() - mu).square().mean();
    const S rs = S(1) / std::sqrt(var + kLnEps<S>);
    rstd(r, 0) = rs;
    xhat.row(r) = (x.row(r).array() - mu) * rs;
  }
  y = (xhat.array().rowwise() * gamma.row(0).array()).matrix();
  y.rowwise() += beta.row(0);
}

template <class S>
MatT<S> layer_norm_backward(const MatT<S>& dy, const MatT<S>& xhat, const MatT<S>& rstd,
                            const MatT<S>& gamma, MatT<S>& d_gamma, MatT<S>& d_beta) {
  d_gamma += (dy.array() * xhat.array()).colwise().sum().matrix();
  d_beta += dy.colwise().sum();
  MatT<S> dxhat = (dy.array().rowwise() * gamma.row(0).array()).matrix();
  MatT<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const S m1 = dxhat.row(r).mean();
    const S m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
    dx.row(r) = rstd(r, 0) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
  }
  return dx;
}

template <class S>
S gelu(S u) {
  return S(0.5) * u * (S(1) + std::erf(u / std::sqrt(S(2))));
}

template <class S>
S gelu_grad(S u) {
  const S cdf = S(0.5) * (S(1) + std::erf(u / std::sqrt(S(2))));
  const S pdf = std::exp(S(-0.5) * u * u) / std::sqrt(S(2) * S(3.14159265358979323846));
  return cdf + u * pdf;
}

template <class S>
void softmax_rows(MatT<S>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const S mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

template <class S>
MatT<S> add_bias(MatT<S> m, const MatT<S>& b) {
  m.rowwise() += b.row(0);
  return m;
}

template <class S>
MatT<S> block_forward(const BlockParams<S>& p, const MatT<S>& x, int heads,
                      BlockCache<S>& c, std::vector<MatT<S>>& attn) {
  const auto D = x.cols();
  const int dh = static_cast<int>(D / heads);
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  c.x = x;
  layer_norm(x, p.ln1_g, p.ln1_b, c.xhat1, c.rstd1, c.h1);
  c.q = add_bias<S>(c.h1 * p.wq, p.bq);
  c.k = add_bias<S>(c.h1 * p.wk, p.bk);
  c.v = add_bias<S>(c.h1 * p.wv, p.bv);
  c.o.resize(x.rows(), D);
  attn.resize(heads);
  for (int h = 0; h < heads; ++h) {
    MatT<S> scores = (c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(scores);
    c.o.middleCols(h * dh, dh) = scores * c.v.middleCols(h * dh, dh);
    attn[h] = std::move(scores);
  }
  c.x1 = x + add_bias<S>(c.o * p.wo, p.bo);
  layer_norm(c.x1, p.ln2_g, p.ln2_b, c.xhat2, c.rstd2, c.h2);
  c.u = add_bias<S>(c.h2 * p.w1, p.b1);
  c.act = c.u.unaryExpr([](S v) { return gelu(v); });
  return c.x1 + add_bias<S>(c.act * p.w2, p.b2);
}

// Returns dL/dx given dL/d(block output); d_hidden (may be null) is the extra
// gradient on x1, d_attn (may be null) on the attention weights.
template <class S>
MatT<S> block_backward(const BlockParams<S>& p, const BlockCache<S>& c,
                       const std::vector<MatT<S>>& attn, const MatT<S>& dy, int heads,
                       const MatT<S>* d_hidden, const std::vector<MatT<S>>* d_attn,
                       BlockParams<S>& g) {
  const auto D = c.x.cols();
  const int dh = static_cast<int>(D / heads);
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  // MLP sub-layer
  g.w2.noalias() += c.act.transpose() * dy;
  g.b2 += dy.colwise().sum();
  MatT<S> d_act = dy * p.w2.transpose();
  MatT<S> du = (d_act.array() * c.u.unaryExpr([](S v) { return gelu_grad(v); }).array()).matrix();
  g.w1.noalias() += c.h2.transpose() * du;
  g.b1 += du.colwise().sum();
  MatT<S> dh2 = du * p.w1.transpose();
  MatT<S> dx1 = dy + layer_norm_backward<S>(dh2, c.xhat2, c.rstd2, p.ln2_g, g.ln2_g, g.ln2_b);
  if (d_hidden && d_hidden->size() > 0) dx1 += *d_hidden;

  // attention sub-layer
  g.wo.noalias() += c.o.transpose() * dx1;
  g.bo += dx1.colwise().sum();
  MatT<S> d_o = dx1 * p.wo.transpose();
  MatT<S> dq(c.q.rows(), D), dk(c.k.rows(), D), dv(c.v.rows(), D);
  for (int h = 0; h < heads; ++h) {
    const MatT<S>& P = attn[h];
    MatT<S> dP = d_o.middleCols(h * dh, dh) * c.v.middleCols(h * dh, dh).transpose();
    if (d_attn && !d_attn->empty() && (*d_attn)[h].size() > 0) dP += (*d_attn)[h];
    dv.middleCols(h * dh, dh) = P.transpose() * d_o.middleCols(h * dh, dh);
    const auto row_dot = (dP.array() * P.array()).rowwise().sum().eval();
    MatT<S> dS = (P.array() * (dP.array().colwise() - row_dot)).matrix() * scale;
    dq.middleCols(h * dh, dh) = dS * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = dS.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += c.h1.transpose() * dq;
  g.bq += dq.colwise().sum();
  g.wk.noalias() += c.h1.transpose() * dk;
  g.bk += dk.colwise().sum();
  g.wv.noalias() += c.h1.transpose() * dv;
  g.bv += dv.colwise().sum();
  MatT<S> dh1 = dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
  return dx1 + layer_norm_backward<S>(dh1, c.xhat1, c.rstd1, p.ln1_g, g.ln1_g, g.ln1_b);
}

template <class S>
MatT<S> run_stack(const std::vector<BlockParams<S>>& blocks, MatT<S> x, int heads,
                  std::vector<BlockCache<S>>& caches, std::vector<std::vector<MatT<S>>>& attn,
                  MatT<S>& hidden, const char* name) {
  caches.resize(blocks.size());
  attn.resize(blocks.size());
  if (blocks.empty()) hidden = x;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    x = block_forward(blocks[l], x, heads, caches[l], attn[l]);
    if (!x.allFinite())
      fail(ErrorKind::Numeric, std::string("non-finite activation in ") + name + " layer " +
                                   std::to_string(l));
    if (l + 1 == blocks.size()) hidden = caches[l].x1;
  }
  return x;
}

template <class S>
MatT<S> stack_backward(const std::vector<BlockParams<S>>& blocks,
                       const std::vector<BlockCache<S>>& caches,
                       const std::vector<std::vector<MatT<S>>>& attn, MatT<S> dy, int heads,
                       const MatT<S>* d_hidden,
                       const std::vector<std::vector<MatT<S>>>* d_attn,
                       std::vector<BlockParams<S>>& grads) {
  const bool has_hidden = d_hidden && d_hidden->size() > 0;
  if (blocks.empty()) {
    if (has_hidden) dy += *d_hidden;
    return dy;
  }
  for (std::size_t i = blocks.size(); i-- > 0;) {
    const MatT<S>* dh = (i + 1 == blocks.size() && has_hidden) ? d_hidden : nullptr;
    const std::vector<MatT<S>>* da =
        (d_attn && i < d_attn->size()) ? &(*d_attn)[i] : nullptr;
    dy = block_backward(blocks[i], caches[i], attn[i], dy, heads, dh, da, grads[i]);
  }
  return dy;
}

}  // namespace

template <class S>
ForwardPass<S> forward_tokens(const ModelParams<S>& params, const ModelConfig& cfg,
                              const MatT<S>& tokens, const std::vector<GridCoord>& coords,
                              const MaskSet& mask) {
  const auto G = tokens.rows();
  require(mask.token_count() == G, ErrorKind::Contract,
          "forward: mask covers " + std::to_string(mask.token_count()) + " tokens, input has " +
              std::to_string(G));
  require(!mask.visible_idx.empty() && !mask.masked_idx.empty(), ErrorKind::Degenerate,
          "forward: mask must leave visible and masked tokens");
  require(G <= cfg.max_tokens, ErrorKind::Contract, "forward: token count exceeds max_tokens");

  ForwardPass<S> pass;
  pass.tokens = tokens;
  pass.mask = mask;
  pass.taps.embedding = embed<S>(tokens, coords, params);

  const auto V = static_cast<Eigen::Index>(mask.visible_idx.size());
  MatT<S> z(V, cfg.dim);
  for (Eigen::Index i = 0; i < V; ++i) z.row(i) = pass.taps.embedding.row(mask.visible_idx[i]);
  MatT<S> enc_out = run_stack(params.enc, std::move(z), cfg.heads, pass.enc_cache,
                              pass.taps.attn_enc, pass.taps.hidden_enc, "encoder");

  MatT<S> y = positional_encoding<S>(coords, cfg.dim);
  for (Eigen::Index i = 0; i < V; ++i) y.row(mask.visible_idx[i]) += enc_out.row(i);
  for (int g : mask.masked_idx) y.row(g) += params.mask_token.row(0);
  MatT<S> dec_out = run_stack(params.dec, std::move(y), cfg.heads, pass.dec_cache,
                              pass.taps.attn_dec, pass.taps.hidden_dec, "decoder");

  pass.out = add_bias<S>(dec_out * params.head_w, params.head_b);
  if (!pass.out.allFinite()) fail(ErrorKind::Numeric, "non-finite activation in head");
  pass.dec_out = std::move(dec_out);
  return pass;
}

template <class S>
void backward(const ModelParams<S>& params, const ModelConfig& cfg, const ForwardPass<S>& pass,
              const MatT<S>& d_out, const TapGrads<S>* d_taps, ModelParams<S>& grads) {
  const auto& mask = pass.mask;
  grads.head_w.noalias() += pass.dec_out.transpose() * d_out;
  grads.head_b += d_out.colwise().sum();
  MatT<S> dy = d_out * params.head_w.transpose();

  MatT<S> dy0 = stack_backward(params.dec, pass.dec_cache, pass.taps.attn_dec, std::move(dy), cfg.heads,
                               d_taps ? &d_taps->hidden_dec : nullptr,
                               d_taps ? &d_taps->attn_dec : nullptr, grads.dec);

  const auto V = static_cast<Eigen::Index>(mask.visible_idx.size());
  MatT<S> d_enc_out(V, cfg.dim);
  for (Eigen::Index i = 0; i < V; ++i) d_enc_out.row(i) = dy0.row(mask.visible_idx[i]);
  for (int g : mask.masked_idx) grads.mask_token.row(0) += dy0.row(g);

  MatT<S> dz = stack_backward(params.enc, pass.enc_cache, pass.taps.attn_enc, std::move(d_enc_out),
                              cfg.heads, d_taps ? &d_taps->hidden_enc : nullptr,
                              d_taps ? &d_taps->attn_enc : nullptr, grads.enc);

  MatT<S> d_embed = MatT<S>::Zero(pass.tokens.rows(), cfg.dim);
  if (d_taps && d_taps->embedding.size() > 0) d_embed = d_taps->embedding;
  for (Eigen::Index i = 0; i < V; ++i) d_embed.row(mask.visible_idx[i]) += dz.row(i);
  grads.embed_w.noalias() += pass.tokens.transpose() * d_embed;
  grads.embed_b += d_embed.colwise().sum();
}

ModelState init_model(const ModelConfig& cfg, Role role, std::uint64_t seed) {
  ModelState state;
  state.config = cfg;
  state.role = role;
  state.params = ModelParams<float>::zeros(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto trunc_normal = [&](Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double v;
      do v = normal(rng);
      while (std::abs(v) > 0.04);
      m.data()[i] = static_cast<float>(v);
    }
  };
  auto& p = state.params;
  trunc_normal(p.embed_w);
  trunc_normal(p.mask_token);
  for (auto* stack : {&p.enc, &p.dec}) {
    for (auto& b : *stack) {
      b.ln1_g.setOnes();
      b.ln2_g.setOnes();
      for (Mat* w : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) trunc_normal(*w);
    }
  }
  trunc_normal(p.head_w);
  return state;
}

void check_compatible(const ModelConfig& cfg, const CsiDims& dims) {
  cfg.validate();
  cfg.patch.validate(dims);
  require(cfg.patch.token_count(dims) >= 2, ErrorKind::Config, "patching leaves fewer than 2 tokens");
  require(cfg.patch.token_count(dims) <= cfg.max_tokens, ErrorKind::Config,
          "token count exceeds max_tokens");
}

CsiTensor assemble_prediction(const CsiTensor& h, const MaskSet& mask, const Mat& out_tokens,
                              const PatchSpec& spec) {
  TokenBatch tb = patchify(h, spec);
  require(out_tokens.rows() == tb.tokens.rows() && out_tokens.cols() == tb.tokens.cols(),
          ErrorKind::Contract, "assemble_prediction: output token shape mismatch");
  for (int g : mask.masked_idx) tb.tokens.row(g) = out_tokens.row(g);
  return unpatchify(tb, spec, h.dims());
}

Reconstruction forward(const CsiTensor& h, const MaskSet& mask, const ModelState& state) {
  check_compatible(state.config, h.dims());
  const TokenBatch tb = patchify(h, state.config.patch);
  auto pass = forward_tokens<float>(state.params, state.config, tb.tokens, tb.coords, mask);
  return {assemble_prediction(h, mask, pass.out, state.config.patch), std::move(pass.taps)};
}

CsiTensor predict(const CsiTensor& h, const TaskSpec& task, const ModelState& state) {
  return forward(h, task_mask(task, h.dims(), state.config.patch), state).h_hat;
}

void check_distill_compatible(const ModelConfig& teacher, const ModelConfig& student) {
  teacher.validate();
  student.validate();
  require(teacher.heads == student.heads, ErrorKind::Contract,
          "teacher/student head counts differ (" + std::to_string(teacher.heads) + " vs " +
              std::to_string(student.heads) + ")");
  require(teacher.depth_enc == student.depth_enc && teacher.depth_dec == student.depth_dec,
          ErrorKind::Contract, "teacher/student depths differ");
  require(teacher.patch == student.patch, ErrorKind::Contract, "teacher/student patching differs");
  require(student.dim <= teacher.dim, ErrorKind::Contract,
          "student dim exceeds teacher dim; CA-KS cannot select D_s > D_t features");
}

#define MCAKD_INSTANTIATE(S)                                                                      \
  template struct ModelParams<S>;                                                                 \
  template MatT<S> positional_encoding<S>(const std::vector<GridCoord>&, int);                   \
  template MatT<S> embed<S>(const MatT<S>&, const std::vector<GridCoord>&, const ModelParams<S>&); \
  template ForwardPass<S> forward_tokens<S>(const ModelParams<S>&, const ModelConfig&,           \
                                            const MatT<S>&, const std::vector<GridCoord>&,        \
                                            const MaskSet&);                                      \
  template void backward<S>(const ModelParams<S>&, const ModelConfig&, const ForwardPass<S>&,    \
                            const MatT<S>&, const TapGrads<S>*, ModelParams<S>&);

MCAKD_INSTANTIATE(float)
MCAKD_INSTANTIATE(double)
#undef MCAKD_INSTANTIATE

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace mcakd
