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

#include <json.hpp>

#include "mcakd/csi.hpp"
#include "mcakd/model.hpp"
#include "mcakd/tokenize.hpp"

namespace mcakd {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ChannelGenConfig, T, K, N_v, N_h_ant, num_paths, delta_t,
                                   delta_f, max_doppler, max_delay, azimuth_min, azimuth_max,
                                   elevation_min, elevation_max, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PatchSpec, p_t, p_k, p_n)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelConfig, depth_enc, depth_dec, heads, dim, mlp_ratio, patch,
                                   max_tokens)

}  // namespace mcakd
