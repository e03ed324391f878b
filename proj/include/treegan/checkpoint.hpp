// Copyright 2026 The TreeGAN Authors.
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

// Parameter checkpoint file, little-endian throughout:
//
//   magic      4 bytes "TGCK"
//   version    u32 (= 1)
//   metadata   u32 length + UTF-8 JSON (architecture manifest, may be "{}")
//   count      u32 number of tensors
//   tensors    count x { u32 name length, name bytes, u32 rank,
//                        rank x u64 dims, prod(dims) x f64 values }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "treegan/autodiff.hpp"
#include "treegan/io.hpp"

namespace treegan {

inline constexpr char kCheckpointMagic[4] = {'T', 'G', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata = "{}";
  std::vector<Parameter> tensors;

  const Parameter* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  const Tensor& get(const std::string& name) const {
    if (const auto* t = find(name)) return t->value;
    throw CorruptFileError("checkpoint has no tensor '" + name + "'");
  }
};

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(ck.metadata);
  w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) w.u64(d);
    for (double v : t.value.data()) w.f64(v);
  }
  return std::move(w.buffer());
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                    const std::string& what = "checkpoint") {
  ByteReader r(bytes.data(), bytes.size(), what);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw CorruptFileError(what + ": not a checkpoint file (bad magic)");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CorruptFileError(what + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.metadata = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name = r.str();
    const auto rank = r.u32();
    if (rank > 8) throw CorruptFileError(what + ": implausible tensor rank");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > (1u << 28)) throw CorruptFileError(what + ": implausible tensor dim");
      n *= d;
    }
    if (n * sizeof(double) > r.remaining()) throw CorruptFileError(what + ": truncated file");
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    p.value = Tensor(std::move(shape), std::move(data));
    ck.tensors.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw CorruptFileError(what + ": trailing bytes after tensors");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  write_file(path, bytes.data(), bytes.size());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace treegan
