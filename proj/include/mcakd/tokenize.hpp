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

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mcakd/csi.hpp"

namespace mcakd {

template <class S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat = MatT<float>;

struct PatchSpec {
  int p_t = 1;
  int p_k = 1;
  int p_n = 1;

  int volume() const { return p_t * p_k * p_n; }
  int feature_width() const { return 2 * volume(); }
  // Throws Error(Config) unless the patch divides dims and yields >= 2 tokens.
  void validate(const CsiDims& dims) const;
  int token_count(const CsiDims& dims) const;
  bool operator==(const PatchSpec&) const = default;
};

struct GridCoord {
  int t = 0;
  int k = 0;
  int n = 0;
  bool operator==(const GridCoord&) const = default;
};

struct TokenBatch {
  Mat tokens;                     // [G, F]
  std::vector<GridCoord> coords;  // grid position of each token

  int count() const { return static_cast<int>(tokens.rows()); }
};

// Token g covers the (p_t, p_k, p_n) block at coords[g]; features are the
// block's real parts (t, k, n order) followed by its imaginary parts.
TokenBatch patchify(const CsiTensor& h, const PatchSpec& spec);
CsiTensor unpatchify(const TokenBatch& tb, const PatchSpec& spec, const CsiDims& dims);

std::vector<GridCoord> token_grid(const CsiDims& dims, const PatchSpec& spec);

enum class MaskStrategy : std::uint8_t { Random = 0, Time = 1, Frequency = 2 };

const char* to_string(MaskStrategy s);

struct MaskSet {
  MaskStrategy strategy = MaskStrategy::Random;
  double ratio = 0.5;  // fraction of masked tokens
  int boundary = -1;   // X_T / X_F in RB units for Time / Frequency
  std::vector<int> visible_idx;
  std::vector<int> masked_idx;

  int token_count() const { return static_cast<int>(visible_idx.size() + masked_idx.size()); }
  // true at masked positions, indexed by token id
  std::vector<bool> masked_flags() const;
  bool operator==(const MaskSet&) const = default;
};

// Random: round(ratio * G) masked tokens drawn with `seed`.
MaskSet make_random_mask(double ratio, int token_count, std::uint64_t seed);
// Time: tokens with t-index >= boundary / p_t are masked (boundary in RBs).
MaskSet make_time_mask(int boundary, const std::vector<GridCoord>& coords, const PatchSpec& spec);
MaskSet make_frequency_mask(int boundary, const std::vector<GridCoord>& coords,
                            const PatchSpec& spec);

// Ratio-driven mask for pretraining: Time/Frequency boundaries are derived
// from the ratio as dim - round(ratio * dim / p) * p.
MaskSet make_mask(MaskStrategy strategy, double ratio, const CsiDims& dims,
                  const PatchSpec& spec, std::uint64_t seed);

enum class TaskKind : std::uint8_t { Time = 0, Frequency = 1 };

struct TaskSpec {
  TaskKind kind = TaskKind::Time;
  int boundary = 0;  // X_T or X_F: number of known RBs

  void validate(const CsiDims& dims) const;
  bool operator==(const TaskSpec&) const = default;
};

const char* to_string(TaskKind k);

// Single source of truth for prediction-task masks.
MaskSet task_mask(const TaskSpec& task, const CsiDims& dims, const PatchSpec& spec);

}  // namespace mcakd
