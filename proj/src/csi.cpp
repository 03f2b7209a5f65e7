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

#include "mcakd/csi.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "mcakd/error.hpp"
#include "mcakd/json_io.hpp"
#include "mcakd/parallel.hpp"

namespace mcakd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

CsiTensor::CsiTensor(CsiDims dims, std::vector<cfloat> data)
    : dims_(dims), data_(std::move(data)) {
  require(data_.size() == dims_.size(), ErrorKind::Contract,
          "CsiTensor: data size does not match dims");
}

double CsiTensor::frobenius_sq() const {
  double acc = 0.0;
  for (const auto& z : data_) acc += std::norm(std::complex<double>(z));
  return acc;
}

bool CsiTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const cfloat& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

void ChannelGenConfig::validate() const {
  require(T > 0 && K > 0 && N_v > 0 && N_h_ant > 0, ErrorKind::Config,
          "channel config: T, K, N_v, N_h_ant must be positive");
  require(num_paths > 0, ErrorKind::Config, "channel config: num_paths must be positive");
  require(delta_t > 0 && delta_f > 0, ErrorKind::Config,
          "channel config: delta_t and delta_f must be positive");
  require(max_doppler >= 0 && max_delay >= 0, ErrorKind::Config,
          "channel config: max_doppler and max_delay must be non-negative");
  require(max_doppler * delta_t < 0.5, ErrorKind::Config,
          "channel config: max_doppler * delta_t must be < 0.5");
  require(max_delay * delta_f < 1.0, ErrorKind::Config,
          "channel config: max_delay * delta_f must be < 1.0");
  require(azimuth_min <= azimuth_max && elevation_min <= elevation_max, ErrorKind::Config,
          "channel config: angle ranges must satisfy min <= max");
}

std::complex<double> steering(int v, int h, double elevation, double azimuth) {
  const double phase = std::numbers::pi * (v * std::sin(elevation) * std::sin(azimuth) +
                                           h * std::cos(elevation));
  return std::polar(1.0, phase);
}

std::vector<PathParams> draw_paths(const ChannelGenConfig& cfg, std::uint64_t sample_seed) {
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(sample_seed),
                    static_cast<std::uint32_t>(sample_seed >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / cfg.num_paths));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<PathParams> paths(cfg.num_paths);
  for (auto& p : paths) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    p.gain = {re, im};
    p.doppler_hz = cfg.max_doppler * std::cos(2.0 * std::numbers::pi * unit(rng));
    p.delay_s = cfg.max_delay * unit(rng);
    p.elevation = cfg.elevation_min + (cfg.elevation_max - cfg.elevation_min) * unit(rng);
    p.azimuth = cfg.azimuth_min + (cfg.azimuth_max - cfg.azimuth_min) * unit(rng);
  }
  return paths;
}

CsiTensor synthesize_channel(const ChannelGenConfig& cfg, const std::vector<PathParams>& paths) {
  cfg.validate();
  CsiTensor out(cfg.dims());
  const int N = cfg.N();
  std::vector<std::complex<double>> acc(out.data().size());
  std::vector<std::complex<double>> array(N);
  for (const auto& p : paths) {
    for (int v = 0; v < cfg.N_v; ++v)
      for (int h = 0; h < cfg.N_h_ant; ++h)
        array[v * cfg.N_h_ant + h] = steering(v, h, p.elevation, p.azimuth);
    for (int t = 0; t < cfg.T; ++t) {
      for (int k = 0; k < cfg.K; ++k) {
        const double phase = 2.0 * std::numbers::pi *
                             (p.doppler_hz * t * cfg.delta_t - p.delay_s * k * cfg.delta_f);
        const std::complex<double> tf = p.gain * std::polar(1.0, phase);
        for (int n = 0; n < N; ++n) acc[out.index(t, k, n)] += tf * array[n];
      }
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) out.data()[i] = cfloat(acc[i]);
  require(out.all_finite(), ErrorKind::Numeric, "generate_channel: non-finite entry");
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

CsiTensor generate_channel(const ChannelGenConfig& cfg, std::uint64_t sample_seed) {
  return synthesize_channel(cfg, draw_paths(cfg, sample_seed));
}

CsiTensor scaled(const CsiTensor& h, double factor) {
  CsiTensor out(h.dims());
  for (std::size_t i = 0; i < h.data().size(); ++i)
    out.data()[i] = cfloat(std::complex<double>(h.data()[i]) * factor);
  return out;
}

Normalized normalize(const CsiTensor& h) {
  const double energy = h.frobenius_sq();
  require(energy > 0.0, ErrorKind::Degenerate, "normalize: all-zero tensor");
  const double scale = std::sqrt(energy / static_cast<double>(h.dims().size()));
  return {scaled(h, 1.0 / scale), scale};
}

CsiTensor denormalize(const CsiTensor& h, double scale) { return scaled(h, scale); }

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

std::string to_string(NormMode m) { return m == NormMode::Global ? "global" : "per_sample"; }

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "global") return NormMode::Global;
  if (s == "per_sample") return NormMode::PerSample;
  fail(ErrorKind::Config, "unknown normalization mode '" + s + "'");
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(i);
  return out;
}

Dataset generate_dataset(const ChannelGenConfig& cfg, SplitCounts counts, NormMode mode,
                         int threads) {
  cfg.validate();
  require(counts.train >= 0 && counts.val >= 0 && counts.test >= 0, ErrorKind::Config,
          "dataset: split counts must be non-negative");
  Dataset ds;
  ds.dims = cfg.dims();
  ds.gen = cfg;
  ds.seed = cfg.seed;
  ds.norm_mode = mode;
  const std::size_t n = counts.total();
  ds.samples.resize(n);
  ds.splits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int idx = static_cast<int>(i);
    ds.splits[i] = idx < counts.train               ? Split::Train
                   : idx < counts.train + counts.val ? Split::Val
                                                     : Split::Test;
  }
  parallel_for(n, threads, [&](std::size_t i) {
    ds.samples[i] = generate_channel(cfg, sample_seed(cfg.seed, i));
  });

  ds.scales.assign(n, 1.0);
  if (n == 0) return ds;
  if (mode == NormMode::PerSample) {
    for (std::size_t i = 0; i < n; ++i) {
      auto norm = normalize(ds.samples[i]);
      ds.samples[i] = std::move(norm.tensor);
      ds.scales[i] = norm.scale;
    }
  } else {
    double energy = 0.0;
    for (const auto& s : ds.samples) energy += s.frobenius_sq();
    require(energy > 0.0, ErrorKind::Degenerate, "dataset: all-zero samples");
    const double scale = std::sqrt(energy / (static_cast<double>(n) * ds.dims.size()));
    for (std::size_t i = 0; i < n; ++i) {
      ds.samples[i] = scaled(ds.samples[i], 1.0 / scale);
      ds.scales[i] = scale;
    }
  }
  return ds;
}

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

std::filesystem::path with_ext(const std::filesystem::path& prefix, const char* ext) {
  return std::filesystem::path(prefix.string() + ext);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& prefix) {
  const auto bin_path = with_ext(prefix, ".csi");
  const auto json_path = with_ext(prefix, ".json");
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) fail(ErrorKind::Io, "cannot open " + bin_path.string() + " for writing");
  std::vector<std::uint32_t> buf;
  for (const auto& s : ds.samples) {
    require(s.dims() == ds.dims, ErrorKind::Contract, "save_dataset: non-uniform sample dims");
    buf.resize(2 * s.data().size());
    for (std::size_t i = 0; i < s.data().size(); ++i) {
      buf[2 * i] = to_le(std::bit_cast<std::uint32_t>(s.data()[i].real()));
      buf[2 * i + 1] = to_le(std::bit_cast<std::uint32_t>(s.data()[i].imag()));
    }
    bin.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
  }
  if (!bin) fail(ErrorKind::Io, "write failed: " + bin_path.string());

  nlohmann::json j;
  j["version"] = kDatasetVersion;
  j["name"] = ds.name;
  j["T"] = ds.dims.T;
  j["K"] = ds.dims.K;
  j["N"] = ds.dims.N;
  j["count"] = ds.samples.size();
  nlohmann::json splits = {{"train", ds.indices(Split::Train)},
                           {"val", ds.indices(Split::Val)},
                           {"test", ds.indices(Split::Test)}};
  j["splits"] = splits;
  j["gen_config"] = ds.gen;
  j["seed"] = ds.seed;
  j["normalization"] = {{"mode", to_string(ds.norm_mode)}, {"scales", ds.scales}};
  j["fingerprint"] = ds.fingerprint;
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) fail(ErrorKind::Io, "cannot open " + json_path.string() + " for writing");
  js << j.dump(2) << "\n";
  if (!js) fail(ErrorKind::Io, "write failed: " + json_path.string());
}

Dataset load_dataset(const std::filesystem::path& prefix) {
  const auto bin_path = with_ext(prefix, ".csi");
  const auto json_path = with_ext(prefix, ".json");
  std::ifstream js(json_path);
  if (!js) fail(ErrorKind::Io, "cannot open " + json_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(js);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Format, json_path.string() + ": malformed sidecar at byte offset " +
                                std::to_string(e.byte) + ": " + e.what());
  }

  Dataset ds;
  std::size_t count = 0;
  try {
    const int version = j.at("version").get<int>();
    if (version != kDatasetVersion)
      fail(ErrorKind::Format, json_path.string() + ": dataset version " +
                                  std::to_string(version) + " unsupported (expected " +
                                  std::to_string(kDatasetVersion) + ")");
    ds.name = j.value("name", std::string("dataset"));
    ds.dims = {j.at("T").get<int>(), j.at("K").get<int>(), j.at("N").get<int>()};
    count = j.at("count").get<std::size_t>();
    ds.gen = j.at("gen_config").get<ChannelGenConfig>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.norm_mode = norm_mode_from_string(j.at("normalization").at("mode").get<std::string>());
    ds.scales = j.at("normalization").at("scales").get<std::vector<double>>();
    ds.fingerprint = j.value("fingerprint", std::string());
    ds.splits.assign(count, Split::Train);
    std::vector<bool> seen(count, false);
    for (auto [name, tag] : {std::pair{"train", Split::Train}, std::pair{"val", Split::Val},
                             std::pair{"test", Split::Test}}) {
      for (auto idx : j.at("splits").at(name).get<std::vector<std::size_t>>()) {
        if (idx >= count || seen[idx])
          fail(ErrorKind::Format, json_path.string() + ": split index " + std::to_string(idx) +
                                      " out of range or duplicated");
        seen[idx] = true;
        ds.splits[idx] = tag;
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      fail(ErrorKind::Format, json_path.string() + ": splits do not cover all samples");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, json_path.string() + ": " + e.what());
  }
  if (ds.dims.T <= 0 || ds.dims.K <= 0 || ds.dims.N <= 0)
    fail(ErrorKind::Format, json_path.string() + ": non-positive dims");
  if (ds.dims != ds.gen.dims())
    fail(ErrorKind::Format, json_path.string() + ": dims do not match gen_config");
  if (ds.scales.size() != count)
    fail(ErrorKind::Format, json_path.string() + ": normalization scale count mismatch");

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) fail(ErrorKind::Io, "cannot open " + bin_path.string());
  const std::size_t per_sample = ds.dims.size();
  const std::size_t expected_bytes = count * per_sample * 2 * sizeof(float);
  bin.seekg(0, std::ios::end);
  const auto actual_bytes = static_cast<std::size_t>(bin.tellg());
  bin.seekg(0, std::ios::beg);
  if (actual_bytes != expected_bytes)
    fail(ErrorKind::Format, bin_path.string() + ": payload is " + std::to_string(actual_bytes) +
                                " bytes, expected " + std::to_string(expected_bytes) +
                                " (mismatch at byte offset " +
                                std::to_string(std::min(actual_bytes, expected_bytes)) + ")");

  std::vector<std::uint32_t> buf(2 * per_sample);
  ds.samples.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    bin.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
    if (!bin)
      fail(ErrorKind::Format, bin_path.string() + ": truncated at byte offset " +
                                  std::to_string(s * per_sample * 2 * sizeof(float)));
    std::vector<cfloat> data(per_sample);
    for (std::size_t i = 0; i < per_sample; ++i)
      data[i] = {std::bit_cast<float>(to_le(buf[2 * i])),
                 std::bit_cast<float>(to_le(buf[2 * i + 1]))};
    ds.samples.emplace_back(ds.dims, std::move(data));
  }
  return ds;
}

}  // namespace mcakd
