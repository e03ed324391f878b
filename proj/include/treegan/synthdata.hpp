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

// Synthetic hierarchical image data. Every class owns a blob prototype
// (center x/y, log radius, log elongation, orientation, intensity); a child's
// prototype is its parent's plus level-scaled Gaussian drift, so siblings
// look alike by construction. Samples jitter the leaf prototype and render an
// anisotropic Gaussian blob at 16x16, with an exact 2x2 mean-pooled 8x8 copy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "treegan/hierarchy.hpp"
#include "treegan/io.hpp"
#include "treegan/rng.hpp"
#include "treegan/tensor.hpp"

namespace treegan {

inline constexpr std::size_t kHiSide = 16;
inline constexpr std::size_t kLoSide = 8;
inline constexpr std::size_t kHiPixels = kHiSide * kHiSide;
inline constexpr std::size_t kLoPixels = kLoSide * kLoSide;

using HiImage = std::array<double, kHiPixels>;
using LoImage = std::array<double, kLoPixels>;

enum class Resolution { kLow = 8, kHigh = 16 };

inline std::size_t pixels(Resolution r) { return r == Resolution::kLow ? kLoPixels : kHiPixels; }

inline Resolution parse_resolution(int side) {
  if (side == 8) return Resolution::kLow;
  if (side == 16) return Resolution::kHigh;
  throw std::invalid_argument("resolution must be 8 or 16, got " + std::to_string(side));
}

inline LoImage downsample(std::span<const double> hi) {
  if (hi.size() != kHiPixels) {
    throw std::invalid_argument("downsample expects a 16x16 image, got " +
                                std::to_string(hi.size()) + " pixels");
  }
  LoImage lo{};
  for (std::size_t r = 0; r < kLoSide; ++r)
    for (std::size_t c = 0; c < kLoSide; ++c) {
      const std::size_t y = 2 * r, x = 2 * c;
      lo[r * kLoSide + c] = (hi[y * kHiSide + x] + hi[y * kHiSide + x + 1] +
                             hi[(y + 1) * kHiSide + x] + hi[(y + 1) * kHiSide + x + 1]) /
                            4.0;
    }
  return lo;
}

// Blob parameters in rendering units.
struct BlobParams {
  static constexpr std::size_t kCount = 6;
  std::array<double, kCount> v{};  // cx, cy, log_radius, log_elongation, angle, intensity

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

// Per-parameter step sizes applied to unit Gaussian drift.
inline constexpr std::array<double, BlobParams::kCount> kBlobScale = {2.0, 2.0, 0.25, 0.3, 0.6, 0.12};
inline constexpr std::array<double, BlobParams::kCount> kBlobBase = {
    7.5, 7.5, 1.0986122886681098 /* log 3 */, 0.0, 0.0, 0.8};

// Clamp bounds applied before rendering; angle is periodic and unclamped.
inline constexpr std::array<double, BlobParams::kCount> kBlobMin = {
    3.0, 3.0, 0.18232155679395462 /* log 1.2 */, -0.6931471805599453 /* log 0.5 */, -1e300, 0.3};
inline constexpr std::array<double, BlobParams::kCount> kBlobMax = {
    12.0, 12.0, 1.6094379124341003 /* log 5 */, 0.6931471805599453 /* log 2 */, 1e300, 1.0};

inline BlobParams clamp_blob(BlobParams p) {
  for (std::size_t i = 0; i < BlobParams::kCount; ++i) p[i] = std::clamp(p[i], kBlobMin[i], kBlobMax[i]);
  return p;
}

// Pixel centers sit at (x + 0.5, y + 0.5). Values lie in [0, intensity].
inline HiImage render_blob(const BlobParams& raw) {
  const BlobParams p = clamp_blob(raw);
  const double radius = std::exp(p[2]);
  const double elong = std::exp(p[3]);
  const double sx = radius * elong, sy = radius / elong;
  const double ca = std::cos(p[4]), sa = std::sin(p[4]);
  HiImage img{};
  for (std::size_t y = 0; y < kHiSide; ++y)
    for (std::size_t x = 0; x < kHiSide; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - p[0];
      const double dy = static_cast<double>(y) + 0.5 - p[1];
      const double u = dx * ca + dy * sa;
      const double v = -dx * sa + dy * ca;
      img[y * kHiSide + x] = p[5] * std::exp(-0.5 * (u * u / (sx * sx) + v * v / (sy * sy)));
    }
  return img;
}

struct DatasetSpec {
  ClassHierarchy hierarchy = parse_hierarchy(kAnimalHierarchyText);
  std::size_t samples_per_leaf = 200;
  // Drift scale per level 0..K (entry 0 moves the root off the base blob).
  std::vector<double> level_noise = {0.5, 1.5, 0.9};
  double observation_noise = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (samples_per_leaf == 0) throw std::invalid_argument("samples_per_leaf must be positive");
    if (level_noise.size() != static_cast<std::size_t>(hierarchy.depth()) + 1) {
      throw std::invalid_argument("level_noise needs " + std::to_string(hierarchy.depth() + 1) +
                                  " entries (levels 0..K), got " +
                                  std::to_string(level_noise.size()));
    }
    for (double v : level_noise)
      if (!(v >= 0)) throw std::invalid_argument("level_noise entries must be non-negative");
    if (!(observation_noise >= 0)) throw std::invalid_argument("observation_noise must be non-negative");
    if (hierarchy.leaves().empty()) throw std::invalid_argument("hierarchy has no leaves");
  }

  nlohmann::json to_json() const {
    return {{"hierarchy", hierarchy.serialize()},
            {"samples_per_leaf", samples_per_leaf},
            {"level_noise", level_noise},
            {"observation_noise", observation_noise},
            {"seed", seed}};
  }

  static DatasetSpec from_json(const nlohmann::json& j) {
    DatasetSpec s;
    s.hierarchy = parse_hierarchy(j.at("hierarchy").get<std::string>());
    s.samples_per_leaf = j.at("samples_per_leaf").get<std::size_t>();
    s.level_noise = j.at("level_noise").get<std::vector<double>>();
    s.observation_noise = j.at("observation_noise").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  }

  bool operator==(const DatasetSpec& o) const {
    return hierarchy == o.hierarchy && samples_per_leaf == o.samples_per_leaf &&
           level_noise == o.level_noise && observation_noise == o.observation_noise &&
           seed == o.seed;
  }
};

struct Sample {
  HiImage hi{};
  LoImage lo{};
  ClassId leaf = 0;

  bool operator==(const Sample&) const = default;
};

enum class Split { kTrain, kTest };

struct Dataset {
  DatasetSpec spec;
  std::vector<BlobParams> prototypes;  // indexed by class id
  std::vector<Sample> train;
  std::vector<Sample> test;

  const std::vector<Sample>& split(Split s) const { return s == Split::kTrain ? train : test; }

  // Indices of samples in `s` with the given leaf.
  std::vector<std::size_t> indices_of(Split s, ClassId leaf) const {
    std::vector<std::size_t> out;
    const auto& v = split(s);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i].leaf == leaf) out.push_back(i);
    return out;
  }
};

inline HiImage render_sample(const BlobParams& proto, double noise, Rng& rng) {
  BlobParams p = proto;
  for (std::size_t i = 0; i < BlobParams::kCount; ++i) p[i] += noise * kBlobScale[i] * rng.normal();
  return render_blob(p);
}

// Prototype per class id: root drifts from the base blob, each child from
// its parent. Pure function of the spec.
inline std::vector<BlobParams> class_prototypes(const DatasetSpec& spec) {
  const auto& h = spec.hierarchy;
  Rng rng(spec.seed);
  std::vector<BlobParams> protos(h.size());
  for (const auto& node : h.nodes()) {
    BlobParams base;
    if (node.parent) {
      base = protos[*node.parent];
    } else {
      base.v = kBlobBase;
    }
    const double s = spec.level_noise[static_cast<std::size_t>(node.level)];
    for (std::size_t i = 0; i < BlobParams::kCount; ++i) base[i] += s * kBlobScale[i] * rng.normal();
    protos[node.id] = base;
  }
  return protos;
}

// Stratified 80/20 split: for each leaf (id order) the first
// floor(0.8 n) samples train, the rest test.
inline Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset d;
  d.spec = spec;
  d.prototypes = class_prototypes(spec);
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t n_train = spec.samples_per_leaf * 4 / 5;
  for (auto leaf : spec.hierarchy.leaves()) {
    for (std::size_t i = 0; i < spec.samples_per_leaf; ++i) {
      Sample s;
      s.hi = render_sample(d.prototypes[leaf], spec.observation_noise, rng);
      s.lo = downsample(s.hi);
      s.leaf = leaf;
      (i < n_train ? d.train : d.test).push_back(s);
    }
  }
  return d;
}

// Dataset file, little-endian:
//   "TGDS", u32 version (=1), u32 length + spec JSON (hierarchy text
//   embedded), u64 train count, u64 test count, then per sample u32 leaf id
//   and 256 f64 high-resolution pixels (train first), then a CRC-32 of every
//   preceding byte. Low-resolution images are recomputed on load.
inline constexpr char kDatasetMagic[4] = {'T', 'G', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  ByteWriter w;
  w.bytes(kDatasetMagic, 4);
  w.u32(kDatasetVersion);
  w.str(d.spec.to_json().dump());
  w.u64(d.train.size());
  w.u64(d.test.size());
  for (const auto* split : {&d.train, &d.test})
    for (const auto& s : *split) {
      w.u32(static_cast<std::uint32_t>(s.leaf));
      for (double v : s.hi) w.f64(v);
    }
  const auto crc = crc32_of(w.buffer().data(), w.buffer().size());
  w.u32(crc);
  return std::move(w.buffer());
}

inline Dataset decode_dataset(const std::vector<std::uint8_t>& bytes,
                              const std::string& what = "dataset") {
  ByteReader r(bytes.data(), bytes.size(), what);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kDatasetMagic, 4) != 0) throw CorruptFileError(what + ": not a dataset file (bad magic)");
  const auto version = r.u32();
  if (version != kDatasetVersion) {
    throw CorruptFileError(what + ": dataset version " + std::to_string(version) +
                           " does not match supported version " + std::to_string(kDatasetVersion));
  }
  const std::string spec_text = r.str();
  const auto n_train = r.u64();
  const auto n_test = r.u64();
  constexpr std::size_t kRecord = 4 + kHiPixels * 8;
  if (n_train + n_test > (r.remaining() / kRecord) + 1) {
    throw CorruptFileError(what + ": truncated file (header promises " +
                           std::to_string(n_train + n_test) + " samples)");
  }
  const std::size_t expected = r.position() + (n_train + n_test) * kRecord + 4;
  if (bytes.size() < expected) throw CorruptFileError(what + ": truncated file");
  if (bytes.size() > expected) throw CorruptFileError(what + ": trailing bytes after CRC");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (crc32_of(bytes.data(), bytes.size() - 4) != stored) {
    throw CorruptFileError(what + ": CRC-32 checksum mismatch");
  }
  Dataset d;
  try {
    d.spec = DatasetSpec::from_json(nlohmann::json::parse(spec_text));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(what + ": bad spec block: " + e.what());
  }
  d.prototypes = class_prototypes(d.spec);
  for (auto [split, n] : {std::pair{&d.train, n_train}, std::pair{&d.test, n_test}}) {
    split->reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      Sample s;
      s.leaf = r.u32();
      if (!d.spec.hierarchy.is_leaf(s.leaf)) throw CorruptFileError(what + ": sample with non-leaf label");
      for (auto& v : s.hi) v = r.f64();
      s.lo = downsample(s.hi);
      split->push_back(s);
    }
  }
  return d;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  const auto bytes = encode_dataset(d);
  write_file(path, bytes.data(), bytes.size());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path), path.string());
}

// Seeded shuffled index batches over n items; each epoch reshuffles and the
// final short batch is kept.
class BatchStream {
 public:
  BatchStream() = default;
  BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed)
      : order_(n), batch_(batch_size), rng_(seed) {
    if (n == 0) throw std::invalid_argument("batch stream over an empty split");
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (pos_ >= order_.size()) {
      ++epoch_;
      reshuffle();
    }
    const std::size_t end = std::min(order_.size(), pos_ + batch_);
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
    pos_ = end;
    return out;
  }

  std::size_t epoch() const { return epoch_; }
  std::size_t batches_per_epoch() const { return (order_.size() + batch_ - 1) / batch_; }

 private:
  void reshuffle() {
    shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_ = 1;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
  Rng rng_;
};

inline BatchStream batch_iter(const Dataset& d, Split split, std::size_t batch_size,
                              std::uint64_t seed) {
  return BatchStream(d.split(split).size(), batch_size, seed);
}

inline std::span<const double> pixels_of(const Sample& s, Resolution r) {
  if (r == Resolution::kLow) return s.lo;
  return s.hi;
}

// Stacks the chosen samples into an [n x pixels] tensor.
inline Tensor images_tensor(const std::vector<Sample>& samples, std::span<const std::size_t> idx,
                            Resolution r) {
  const auto p = pixels(r);
  Tensor t({idx.size(), p});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto px = pixels_of(samples[idx[i]], r);
    std::copy(px.begin(), px.end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * p));
  }
  return t;
}

inline Tensor images_tensor(const std::vector<Sample>& samples, Resolution r) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return images_tensor(samples, idx, r);
}

}  // namespace treegan
