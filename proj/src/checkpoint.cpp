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

#include <bit>
#include <cstring>
#include <fstream>

#include "mcakd/error.hpp"
#include "mcakd/json_io.hpp"
#include "mcakd/model.hpp"

namespace mcakd {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'A', 'K', 'D', 'C', 'K', 'P'};

template <class T>
void write_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& is, const std::string& path) {
  T v{};
  const auto offset = static_cast<long long>(is.tellg());
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    fail(ErrorKind::Format, path + ": truncated at byte offset " + std::to_string(offset));
  return v;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& path,
                     const std::string& fingerprint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::json header;
  header["config"] = state.config;
  header["role"] = to_string(state.role);
  header["fingerprint"] = fingerprint;
  header["tensors"] = nlohmann::json::array();
  state.params.for_each([&](const std::string& name, const Mat& m) {
    header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(os, kCheckpointVersion);
  write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  state.params.for_each([&](const std::string&, const Mat& m) {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(float)));
  });
  if (!os) fail(ErrorKind::Io, "write failed: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path, std::string* fingerprint) {
  const std::string p = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open " + p);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorKind::Format, p + ": bad magic at byte offset 0");
  const auto version = read_le<std::uint32_t>(is, p);
  if (version != kCheckpointVersion)
    fail(ErrorKind::Format, p + ": checkpoint version " + std::to_string(version) +
                                " unsupported at byte offset 8");
  const auto header_len = read_le<std::uint64_t>(is, p);
  if (header_len > (1u << 26)) fail(ErrorKind::Format, p + ": implausible header length");
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len)))
    fail(ErrorKind::Format, p + ": truncated header at byte offset 20");

  ModelState state;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    state.config = header.at("config").get<ModelConfig>();
    state.role = role_from_string(header.at("role").get<std::string>());
    if (fingerprint) *fingerprint = header.value("fingerprint", std::string());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, p + ": malformed header: " + e.what());
  }
  try {
    state.params = ModelParams<float>::zeros(state.config);
  } catch (const Error& e) {
    fail(ErrorKind::Format, p + ": invalid model config: " + e.what());
  }

  const auto& tensors = header["tensors"];
  std::size_t i = 0;
  state.params.for_each([&](const std::string& name, Mat& m) {
    if (i >= tensors.size() || tensors[i].value("name", "") != name ||
        tensors[i].value("rows", -1) != m.rows() || tensors[i].value("cols", -1) != m.cols())
      fail(ErrorKind::Format, p + ": tensor table does not match config at entry " +
                                  std::to_string(i) + " (" + name + ")");
    const auto offset = static_cast<long long>(is.tellg());
    if (!is.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(m.size() * sizeof(float))))
      fail(ErrorKind::Format, p + ": truncated tensor " + name + " at byte offset " +
                                  std::to_string(offset));
    ++i;
  });
  if (i != tensors.size()) fail(ErrorKind::Format, p + ": extra tensors in table");
  if (is.peek() != std::char_traits<char>::eof())
    fail(ErrorKind::Format, p + ": trailing bytes at offset " + std::to_string(is.tellg()));
  return state;
}

}  // namespace mcakd
