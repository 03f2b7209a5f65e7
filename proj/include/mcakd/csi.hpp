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

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mcakd {

using cfloat = std::complex<float>;

struct CsiDims {
  int T = 0;  // time RBs
  int K = 0;  // frequency RBs
  int N = 0;  // antennas

  std::size_t size() const { return static_cast<std::size_t>(T) * K * N; }
  bool operator==(const CsiDims&) const = default;
};

// Complex STF channel grid, t-major then k then n.
class CsiTensor {
 public:
  CsiTensor() = default;
  explicit CsiTensor(CsiDims dims) : dims_(dims), data_(dims.size()) {}
  CsiTensor(CsiDims dims, std::vector<cfloat> data);

  const CsiDims& dims() const { return dims_; }
  std::size_t index(int t, int k, int n) const {
    return (static_cast<std::size_t>(t) * dims_.K + k) * dims_.N + n;
  }
  cfloat& operator()(int t, int k, int n) { return data_[index(t, k, n)]; }
  const cfloat& operator()(int t, int k, int n) const { return data_[index(t, k, n)]; }

  std::vector<cfloat>& data() { return data_; }
  const std::vector<cfloat>& data() const { return data_; }

  double frobenius_sq() const;
  bool all_finite() const;

  bool operator==(const CsiTensor&) const = default;

 private:
  CsiDims dims_;
  std::vector<cfloat> data_;
};

struct ChannelGenConfig {
  int T = 16;
  int K = 8;
  int N_v = 2;
  int N_h_ant = 2;
  int num_paths = 4;
  double delta_t = 1e-3;        // slot duration (s)
  double delta_f = 180e3;       // RB spacing (Hz)
  double max_doppler = 100.0;   // Hz
  double max_delay = 1e-6;      // s
  double azimuth_min = -1.0471975511965976;
  double azimuth_max = 1.0471975511965976;
  double elevation_min = 0.5235987755982988;
  double elevation_max = 2.6179938779914944;
  std::uint64_t seed = 0;

  int N() const { return N_v * N_h_ant; }
  CsiDims dims() const { return {T, K, N()}; }
  // Throws Error(Config) when a field or sampling invariant is violated.
  void validate() const;
  bool operator==(const ChannelGenConfig&) const = default;
};

struct PathParams {
  std::complex<double> gain;
  double doppler_hz = 0.0;
  double delay_s = 0.0;
  double elevation = 0.0;  // theta
  double azimuth = 0.0;    // phi
};

// Half-wavelength UPA steering entry for antenna (v, h).
std::complex<double> steering(int v, int h, double elevation, double azimuth);

std::vector<PathParams> draw_paths(const ChannelGenConfig& cfg, std::uint64_t sample_seed);
CsiTensor synthesize_channel(const ChannelGenConfig& cfg, const std::vector<PathParams>& paths);
CsiTensor generate_channel(const ChannelGenConfig& cfg, std::uint64_t sample_seed);

// splitmix64 over (seed, stream); independent RNG streams from one seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Per-sample generator seed: mixed dataset seed XOR sample index. Mixing first
// keeps the sample pools of nearby dataset seeds (1, 2, 3, ...) disjoint.
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
  return derive_seed(seed, 0) ^ index;
}

struct Normalized {
  CsiTensor tensor;
  double scale = 1.0;
};

// Rescales H so that ||H||_F^2 = T*K*N.
Normalized normalize(const CsiTensor& h);
CsiTensor denormalize(const CsiTensor& h, double scale);
CsiTensor scaled(const CsiTensor& h, double factor);

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };
enum class NormMode { Global, PerSample };

std::string to_string(Split s);
std::string to_string(NormMode m);
NormMode norm_mode_from_string(const std::string& s);

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
  int total() const { return train + val + test; }
};

struct Dataset {
  std::string name = "dataset";
  CsiDims dims;
  std::vector<CsiTensor> samples;
  std::vector<Split> splits;
  ChannelGenConfig gen;
  std::uint64_t seed = 0;
  NormMode norm_mode = NormMode::Global;
  std::vector<double> scales;  // per-sample normalization scale
  std::string fingerprint;

  std::size_t size() const { return samples.size(); }
  std::vector<std::size_t> indices(Split s) const;
  bool operator==(const Dataset&) const = default;
};

Dataset generate_dataset(const ChannelGenConfig& cfg, SplitCounts counts, NormMode mode,
                         int threads = 1);

inline constexpr int kDatasetVersion = 1;

// Writes <prefix>.csi (f32 LE interleaved payload) and <prefix>.json (sidecar).
void save_dataset(const Dataset& ds, const std::filesystem::path& prefix);
Dataset load_dataset(const std::filesystem::path& prefix);

}  // namespace mcakd
