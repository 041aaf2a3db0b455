// Copyright 2026-present the appmorph project
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
#include "appmorph/embed_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "appmorph/catalog.hpp"
#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"
#include "binary_io.hpp"
#include "json.hpp"

namespace appmorph {

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("read failure on " + path);
  return std::move(ss).str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failure on " + path);
}

}  // namespace detail

namespace {
constexpr std::string_view kEmbMagic = "EMB1";
}

std::string_view modality_name(ModalityKind m) {
  switch (m) {
    case ModalityKind::IconContent: return "icon_content";
    case ModalityKind::IconStyle: return "icon_style";
    case ModalityKind::Description: return "description";
    case ModalityKind::AppName: return "app_name";
    case ModalityKind::DeveloperName: return "developer_name";
  }
  return "unknown";
}

ModalityKind parse_modality(std::string_view name) {
  for (auto m : kAllModalities) {
    if (modality_name(m) == name) return m;
  }
  throw DataError("unknown modality '" + std::string(name) + "'");
}

ModalityKind modality_from_tag(std::uint8_t tag) {
  if (tag > 4) throw DataError("invalid modality tag " + std::to_string(tag));
  return static_cast<ModalityKind>(tag);
}

std::size_t default_dim(ModalityKind m) {
  switch (m) {
    case ModalityKind::IconContent:
    case ModalityKind::IconStyle: return 512;
    case ModalityKind::Description: return 768;
    case ModalityKind::AppName:
    case ModalityKind::DeveloperName: return 4096;
  }
  return 0;
}

float dot(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = a.size();
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

EmbeddingSet::EmbeddingSet(ModalityKind modality, std::size_t dim)
    : modality_(modality), dim_(dim) {
  if (dim_ == 0) throw DataError("embedding dimension must be positive");
}

void EmbeddingSet::reserve(std::size_t n) {
  ids_.reserve(n);
  data_.reserve(n * dim_);
  row_of_.reserve(n);
}

void EmbeddingSet::add(std::string id, std::span<const float> row) {
  if (row.size() != dim_) {
    throw DataError("row for '" + id + "' has " + std::to_string(row.size()) +
                    " values, expected " + std::to_string(dim_));
  }
  if (!row_of_.emplace(id, ids_.size()).second) throw DataError("duplicate id '" + id + "'");
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), row.begin(), row.end());
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view id) const {
  auto it = row_of_.find(std::string(id));
  if (it == row_of_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::span<const float>> EmbeddingSet::find_row(std::string_view id) const {
  if (auto i = find(id)) return row(*i);
  return std::nullopt;
}

std::string encode_embeddings(const EmbeddingSet& set) {
  detail::ByteWriter w;
  w.bytes(kEmbMagic);
  w.u8(static_cast<std::uint8_t>(set.modality()));
  w.u32(static_cast<std::uint32_t>(set.dim()));
  w.u64(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.id(set.id(i));
    w.f32s(set.row(i));
  }
  return std::move(w.str());
}

EmbeddingSet decode_embeddings(std::string_view bytes) {
  detail::ByteReader r(bytes, "EMB1");
  if (bytes.size() < kEmbMagic.size() || r.bytes(kEmbMagic.size()) != kEmbMagic) {
    throw DataError("EMB1: bad magic");
  }
  const auto modality = modality_from_tag(r.u8());
  const auto dim = r.u32();
  const auto count = r.u64();
  if (dim == 0) throw DataError("EMB1: zero dimension");
  // Every record needs at least 2 + 4*dim bytes.
  const std::uint64_t min_record = 2 + 4ull * dim;
  if (count > r.remaining() / min_record) throw DataError("EMB1: truncated payload");

  EmbeddingSet set(modality, dim);
  set.reserve(count);
  std::vector<float> row(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = r.id();
    r.f32s(row);
    set.add(std::move(id), row);
  }
  if (!r.done()) {
    throw DataError("EMB1: " + std::to_string(r.remaining()) + " trailing bytes after " +
                    std::to_string(count) + " records");
  }
  return set;
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  try {
    return decode_embeddings(detail::read_file(path.string()));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  detail::write_file(path.string(), encode_embeddings(set));
}

EmbeddingSet read_embeddings_jsonl(const std::filesystem::path& path, ModalityKind modality) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::optional<EmbeddingSet> set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto vec = j.at("vec").get<std::vector<float>>();
      if (!set) set.emplace(modality, vec.size());
      set->add(j.at("app_id").get<std::string>(), vec);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!set) return EmbeddingSet(modality, default_dim(modality));
  return std::move(*set);
}

EmbeddingSet normalize(EmbeddingSet set, std::vector<std::string>* zero_rows) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto row = set.mutable_row(i);
    double sq = 0.0;
    for (float x : row) sq += static_cast<double>(x) * x;
    if (sq == 0.0) {
      if (zero_rows) zero_rows->push_back(set.id(i));
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : row) x = static_cast<float>(x * inv);
  }
  return set;
}

EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::string> ids) {
  EmbeddingSet out(set.modality(), set.dim());
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto row = set.find_row(id);
    if (!row) {
      throw DataError("no " + std::string(modality_name(set.modality())) + " embedding for '" +
                      id + "'");
    }
    out.add(id, *row);
  }
  return out;
}

namespace {

void fill_unit_gaussian(Rng& rng, std::span<double> out) {
  double sq = 0.0;
  for (auto& x : out) {
    x = rng.normal();
    sq += x * x;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : out) x *= inv;
}

}  // namespace

EmbeddingSet synth_embeddings(const Catalog& catalog, ModalityKind modality, std::size_t dim,
                              std::uint64_t seed, double drift) {
  if (dim < 2) throw DataError("synth_embeddings: dim must be >= 2");
  if (!(drift >= 0.0 && drift <= 1.0)) throw DataError("synth_embeddings: drift must be in [0,1]");
  EmbeddingSet set(modality, dim);
  set.reserve(catalog.size());
  std::vector<double> base(dim), noise(dim);
  std::vector<float> row(dim);
  const auto tag = static_cast<std::uint64_t>(modality);
  for (const auto& r : catalog.records()) {
    const std::uint64_t app_seed = hash_combine(hash_string(r.app_id, seed), tag);
    Rng base_rng(app_seed);
    fill_unit_gaussian(base_rng, base);
    Rng noise_rng(hash_combine(app_seed, static_cast<std::uint64_t>(r.snapshot_year) + 1));
    fill_unit_gaussian(noise_rng, noise);
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      base[d] = (1.0 - drift) * base[d] + drift * noise[d];
      sq += base[d] * base[d];
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t d = 0; d < dim; ++d) row[d] = static_cast<float>(base[d] * inv);
    set.add(r.app_id, row);
  }
  return set;
}

}  // namespace appmorph
