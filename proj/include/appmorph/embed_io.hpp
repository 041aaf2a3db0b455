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
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace appmorph {

class Catalog;

/// One matching signal. The numeric values are the EMB1/IVF1 modality tags.
enum class ModalityKind : std::uint8_t {
  IconContent = 0,
  IconStyle = 1,
  Description = 2,
  AppName = 3,
  DeveloperName = 4,
};

inline constexpr std::array<ModalityKind, 5> kAllModalities = {
    ModalityKind::IconContent, ModalityKind::IconStyle, ModalityKind::Description,
    ModalityKind::AppName, ModalityKind::DeveloperName};

/// "icon_content", "icon_style", "description", "app_name", "developer_name".
std::string_view modality_name(ModalityKind m);
/// Inverse of modality_name. Throws DataError for unknown names.
ModalityKind parse_modality(std::string_view name);
/// Throws DataError for tags outside 0..4.
ModalityKind modality_from_tag(std::uint8_t tag);
/// 512 for icons, 768 for descriptions, 4096 (TF-IDF vocabulary) for names.
std::size_t default_dim(ModalityKind m);

/// Inner product with eight independent accumulators so the loop vectorizes.
/// Every similarity in the index and exact search goes through this function,
/// which keeps their scores bit-identical.
float dot(std::span<const float> a, std::span<const float> b);

/// Row-major N x dim float32 matrix keyed by app id.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(ModalityKind modality, std::size_t dim);

  ModalityKind modality() const { return modality_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  /// Throws DataError on a duplicate id or wrong row length.
  void add(std::string id, std::span<const float> row);
  void reserve(std::size_t n);

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<float> mutable_row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> find(std::string_view id) const;
  std::optional<std::span<const float>> find_row(std::string_view id) const;
  const std::vector<float>& data() const { return data_; }

  bool operator==(const EmbeddingSet& o) const {
    return modality_ == o.modality_ && dim_ == o.dim_ && ids_ == o.ids_ && data_ == o.data_;
  }

 private:
  ModalityKind modality_ = ModalityKind::IconContent;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> row_of_;
};

/// One set per modality, indexed by the modality tag.
using ModalitySets = std::array<EmbeddingSet, 5>;

inline const EmbeddingSet& for_modality(const ModalitySets& sets, ModalityKind m) {
  return sets[static_cast<std::size_t>(m)];
}

/// EMB1 encoding: "EMB1", u8 modality tag, u32 dim, u64 count, then count
/// records of [u16 id length, id bytes, dim x f32], all little-endian.
std::string encode_embeddings(const EmbeddingSet& set);
EmbeddingSet decode_embeddings(std::string_view bytes);

EmbeddingSet read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

/// Hand-written fixture form: one {"app_id": ..., "vec": [...]} per line.
EmbeddingSet read_embeddings_jsonl(const std::filesystem::path& path, ModalityKind modality);

/// Divides each nonzero row by its L2 norm. Zero rows stay zero and their ids
/// are appended to `zero_rows` when given.
EmbeddingSet normalize(EmbeddingSet set, std::vector<std::string>* zero_rows = nullptr);

/// Rows of `set` for `ids`, in that order. Throws DataError for missing ids.
EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::string> ids);

/// Deterministic unit vectors for fixtures. Each app gets a base direction
/// from hash(app_id, seed, modality); `drift` blends in a second direction
/// keyed additionally by the record's snapshot year, so the same app id in two
/// snapshots has cosine close to 1 - O(drift) and distinct ids are nearly
/// orthogonal.
EmbeddingSet synth_embeddings(const Catalog& catalog, ModalityKind modality, std::size_t dim,
                              std::uint64_t seed, double drift);

}  // namespace appmorph
