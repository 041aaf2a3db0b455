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

/**
 * Inverted-file (IVF) index over unit vectors with inner-product scoring.
 *
 * A spherical k-means coarse quantizer partitions the vectors; each vector is
 * stored verbatim in the list of its highest-scoring centroid. A query scans
 * the nprobe lists whose centroids score highest against it. With
 * nprobe == nlist the result equals exact_search exactly, because both paths
 * score with the same dot() and break ties by ascending app id.
 *
 * Indexes are built as self-describing shard files (IVF1) that carry a
 * SHA-256 of their centroid block. Shards trained against the same centroids
 * merge by list-wise concatenation.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "appmorph/embed_io.hpp"
#include "appmorph/sha256.hpp"

namespace appmorph {

struct IvfParams {
  /// 0 selects max(1, floor(sqrt(N))).
  std::size_t nlist = 0;
  /// 0 selects min(16, nlist).
  std::size_t nprobe = 0;
  int kmeans_iters = 25;
  std::uint64_t seed = 0;
  /// k-means trains on at most this many seeded-sampled rows; 0 selects
  /// 256 * nlist.
  std::size_t max_train_points = 0;

  /// Copy with every 0 ("auto") field filled in for a corpus of n rows.
  IvfParams resolved(std::size_t n) const;
};

/// nlist x dim unit-norm float32 centroids.
struct Centroids {
  std::size_t dim = 0;
  std::size_t nlist = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t c) const { return {data.data() + c * dim, dim}; }
  /// SHA-256 over the little-endian centroid block.
  Sha256Digest checksum() const;
  bool operator==(const Centroids&) const = default;
};

/// Seeded spherical k-means with k-means++ style seeding. Empty clusters are
/// re-seeded from the worst-fitting row of the largest cluster. Throws
/// DataError when the set has fewer rows than nlist.
Centroids train(const EmbeddingSet& set, const IvfParams& params);

/// Index of the highest-scoring centroid (lowest index on ties).
std::size_t assign(const Centroids& centroids, std::span<const float> v);

struct Neighbor {
  std::string app_id;
  float similarity = 0.0f;
  bool operator==(const Neighbor&) const = default;
};

/// Similarity non-increasing; equal similarities ordered by ascending app id.
using NeighborList = std::vector<Neighbor>;

class IvfIndex {
 public:
  struct List {
    std::vector<std::uint32_t> rows;
    std::vector<float> vectors;  // rows.size() x dim
  };

  IvfIndex() = default;
  IvfIndex(ModalityKind modality, Centroids centroids, IvfParams params);

  /// Appends every row of `set` to its assigned list. Throws DataError on a
  /// dimension mismatch or an id already present.
  void add(const EmbeddingSet& set);

  ModalityKind modality() const { return modality_; }
  std::size_t dim() const { return centroids_.dim; }
  std::size_t nlist() const { return centroids_.nlist; }
  std::size_t size() const { return ids_.size(); }
  const IvfParams& params() const { return params_; }
  const Centroids& centroids() const { return centroids_; }
  const Sha256Digest& checksum() const { return checksum_; }
  const List& list(std::size_t c) const { return lists_[c]; }
  const std::string& id(std::uint32_t row) const { return ids_[row]; }
  bool contains(std::string_view app_id) const;

  /// Top-k by inner product over the nprobe best lists. nprobe == 0 uses the
  /// index default; values above nlist are clamped.
  NeighborList query(std::span<const float> q, std::size_t k, std::size_t nprobe = 0) const;

  std::string encode() const;
  static IvfIndex decode(std::string_view bytes);

  /// List-wise concatenation of indexes sharing one centroid checksum.
  static IvfIndex merge(std::span<const IvfIndex> parts);

 private:
  ModalityKind modality_ = ModalityKind::IconContent;
  Centroids centroids_;
  IvfParams params_;
  Sha256Digest checksum_{};
  std::vector<List> lists_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> row_of_;
};

inline constexpr std::size_t kDefaultShardRows = 100'000;

/// Trains centroids on `set` and indexes every row.
IvfIndex build_index(const EmbeddingSet& set, const IvfParams& params);

/// Indexes `set` against fixed centroids and writes the shard file.
void build_shard(const EmbeddingSet& set, const Centroids& centroids, const IvfParams& params,
                 const std::filesystem::path& shard_path);

IvfIndex read_index(const std::filesystem::path& path);
void write_index(const IvfIndex& index, const std::filesystem::path& path);

/// Reads and merges shard files, writes the result to out_path, returns it.
/// Throws DataError on a centroid checksum mismatch or a duplicate id.
IvfIndex merge_shards(std::span<const std::filesystem::path> shard_paths,
                      const std::filesystem::path& out_path);

/// Brute-force top-k by inner product; same ordering rule as IvfIndex::query.
NeighborList exact_search(const EmbeddingSet& set, std::span<const float> q, std::size_t k);

/// |got ∩ truth| / |truth| over app ids (1 when truth is empty).
double recall(const NeighborList& got, const NeighborList& truth);

}  // namespace appmorph
