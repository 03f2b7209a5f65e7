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

#include "mcakd/tokenize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mcakd/error.hpp"

namespace mcakd {

void PatchSpec::validate(const CsiDims& dims) const {
  require(p_t > 0 && p_k > 0 && p_n > 0, ErrorKind::Config, "patch sizes must be positive");
  require(dims.T % p_t == 0 && dims.K % p_k == 0 && dims.N % p_n == 0, ErrorKind::Config,
          "patch (" + std::to_string(p_t) + "," + std::to_string(p_k) + "," +
              std::to_string(p_n) + ") does not divide dims (" + std::to_string(dims.T) + "," +
              std::to_string(dims.K) + "," + std::to_string(dims.N) + ")");
}

int PatchSpec::token_count(const CsiDims& dims) const {
  return (dims.T / p_t) * (dims.K / p_k) * (dims.N / p_n);
}

std::vector<GridCoord> token_grid(const CsiDims& dims, const PatchSpec& spec) {
  spec.validate(dims);
  std::vector<GridCoord> coords;
  coords.reserve(spec.token_count(dims));
  for (int t = 0; t < dims.T / spec.p_t; ++t)
    for (int k = 0; k < dims.K / spec.p_k; ++k)
      for (int n = 0; n < dims.N / spec.p_n; ++n) coords.push_back({t, k, n});
  return coords;
}

TokenBatch patchify(const CsiTensor& h, const PatchSpec& spec) {
  TokenBatch tb;
  tb.coords = token_grid(h.dims(), spec);
  const int vol = spec.volume();
  tb.tokens.resize(static_cast<Eigen::Index>(tb.coords.size()), spec.feature_width());
  for (std::size_t g = 0; g < tb.coords.size(); ++g) {
    const auto& c = tb.coords[g];
    int j = 0;
    for (int dt = 0; dt < spec.p_t; ++dt)
      for (int dk = 0; dk < spec.p_k; ++dk)
        for (int dn = 0; dn < spec.p_n; ++dn, ++j) {
          const cfloat z = h(c.t * spec.p_t + dt, c.k * spec.p_k + dk, c.n * spec.p_n + dn);
          tb.tokens(g, j) = z.real();
          tb.tokens(g, vol + j) = z.imag();
        }
  }
  return tb;
}

CsiTensor unpatchify(const TokenBatch& tb, const PatchSpec& spec, const CsiDims& dims) {
  spec.validate(dims);
  const int vol = spec.volume();
  require(tb.tokens.rows() == spec.token_count(dims) && tb.tokens.cols() == 2 * vol &&
              tb.coords.size() == static_cast<std::size_t>(tb.tokens.rows()),
          ErrorKind::Contract, "unpatchify: token batch shape does not match patch/dims");
  CsiTensor h(dims);
  for (std::size_t g = 0; g < tb.coords.size(); ++g) {
    const auto& c = tb.coords[g];
    require(c.t >= 0 && c.t < dims.T / spec.p_t && c.k >= 0 && c.k < dims.K / spec.p_k &&
                c.n >= 0 && c.n < dims.N / spec.p_n,
            ErrorKind::Contract, "unpatchify: token coordinate out of range");
    int j = 0;
    for (int dt = 0; dt < spec.p_t; ++dt)
      for (int dk = 0; dk < spec.p_k; ++dk)
        for (int dn = 0; dn < spec.p_n; ++dn, ++j)
          h(c.t * spec.p_t + dt, c.k * spec.p_k + dk, c.n * spec.p_n + dn) =
              cfloat(tb.tokens(g, j), tb.tokens(g, vol + j));
  }
  return h;
}

const char* to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::Random: return "random";
    case MaskStrategy::Time: return "time";
    case MaskStrategy::Frequency: return "frequency";
  }
  return "random";
}

const char* to_string(TaskKind k) { return k == TaskKind::Time ? "time" : "frequency"; }

std::vector<bool> MaskSet::masked_flags() const {
  std::vector<bool> flags(token_count(), false);
  for (int g : masked_idx) flags[g] = true;
  return flags;
}

namespace {

void check_nondegenerate(const MaskSet& m) {
  require(!m.visible_idx.empty() && !m.masked_idx.empty(), ErrorKind::Degenerate,
          std::string("degenerate ") + to_string(m.strategy) + " mask: " +
              std::to_string(m.visible_idx.size()) + " visible, " +
              std::to_string(m.masked_idx.size()) + " masked");
}

template <class Pred>
MaskSet split_by(MaskStrategy strategy, int boundary, const std::vector<GridCoord>& coords,
                 Pred masked) {
  MaskSet m;
  m.strategy = strategy;
  m.boundary = boundary;
  for (std::size_t g = 0; g < coords.size(); ++g)
    (masked(coords[g]) ? m.masked_idx : m.visible_idx).push_back(static_cast<int>(g));
  m.ratio = coords.empty() ? 0.0 : static_cast<double>(m.masked_idx.size()) / coords.size();
  check_nondegenerate(m);
  return m;
}

}  // namespace

MaskSet make_random_mask(double ratio, int token_count, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::Config, "mask ratio must lie in (0, 1)");
  const int n_masked = static_cast<int>(std::lround(ratio * token_count));
  std::vector<int> perm(token_count);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  MaskSet m;
  m.strategy = MaskStrategy::Random;
  m.ratio = ratio;
  m.masked_idx.assign(perm.begin(), perm.begin() + n_masked);
  m.visible_idx.assign(perm.begin() + n_masked, perm.end());
  std::sort(m.masked_idx.begin(), m.masked_idx.end());
  std::sort(m.visible_idx.begin(), m.visible_idx.end());
  check_nondegenerate(m);
  return m;
}

MaskSet make_time_mask(int boundary, const std::vector<GridCoord>& coords, const PatchSpec& spec) {
  require(boundary % spec.p_t == 0, ErrorKind::Config,
          "time boundary " + std::to_string(boundary) + " is not a multiple of p_t");
  const int cut = boundary / spec.p_t;
  return split_by(MaskStrategy::Time, boundary, coords,
                  [cut](const GridCoord& c) { return c.t >= cut; });
}

MaskSet make_frequency_mask(int boundary, const std::vector<GridCoord>& coords,
                            const PatchSpec& spec) {
  require(boundary % spec.p_k == 0, ErrorKind::Config,
          "frequency boundary " + std::to_string(boundary) + " is not a multiple of p_k");
  const int cut = boundary / spec.p_k;
  return split_by(MaskStrategy::Frequency, boundary, coords,
                  [cut](const GridCoord& c) { return c.k >= cut; });
}

MaskSet make_mask(MaskStrategy strategy, double ratio, const CsiDims& dims,
                  const PatchSpec& spec, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::Config, "mask ratio must lie in (0, 1)");
  const auto coords = token_grid(dims, spec);
  switch (strategy) {
    case MaskStrategy::Random:
      return make_random_mask(ratio, static_cast<int>(coords.size()), seed);
    case MaskStrategy::Time: {
      const int slabs = dims.T / spec.p_t;
      const int masked = static_cast<int>(std::lround(ratio * slabs));
      return make_time_mask((slabs - masked) * spec.p_t, coords, spec);
    }
    case MaskStrategy::Frequency: {
      const int slabs = dims.K / spec.p_k;
      const int masked = static_cast<int>(std::lround(ratio * slabs));
      return make_frequency_mask((slabs - masked) * spec.p_k, coords, spec);
    }
  }
  fail(ErrorKind::Config, "unknown mask strategy");
}

void TaskSpec::validate(const CsiDims& dims) const {
  const int limit = kind == TaskKind::Time ? dims.T : dims.K;
  require(boundary > 0 && boundary < limit, ErrorKind::Config,
          std::string(to_string(kind)) + " task boundary " + std::to_string(boundary) +
              " must lie in (0, " + std::to_string(limit) + ")");
}

MaskSet task_mask(const TaskSpec& task, const CsiDims& dims, const PatchSpec& spec) {
  task.validate(dims);
  const auto coords = token_grid(dims, spec);
  return task.kind == TaskKind::Time ? make_time_mask(task.boundary, coords, spec)
                                     : make_frequency_mask(task.boundary, coords, spec);
}

}  // namespace mcakd
