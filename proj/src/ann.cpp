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
#include "appmorph/ann.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"
#include "binary_io.hpp"

namespace appmorph {

namespace {

constexpr std::string_view kIvfMagic = "IVF1";

struct Scored {
  float sim;
  std::uint32_t row;
};

std::string encode_centroid_block(const Centroids& c) {
  detail::ByteWriter w;
  w.f32s(c.data);
  return std::move(w.str());
}

void renormalize(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : v) x = static_cast<float>(x * inv);
}

// Sorts candidates by (similarity desc, app id asc) and keeps the first k.
NeighborList top_k_by_similarity(std::vector<Scored>& cand, std::size_t k,
                                 const std::vector<std::string>& ids) {
  auto better = [&](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return ids[a.row] < ids[b.row];
  };
  const std::size_t n = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n), cand.end(),
                    better);
  NeighborList out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({ids[cand[i].row], cand[i].sim});
  return out;
}

}  // namespace

IvfParams IvfParams::resolved(std::size_t n) const {
  IvfParams p = *this;
  if (p.nlist == 0) {
    p.nlist = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
  }
  if (p.nprobe == 0) p.nprobe = std::min<std::size_t>(16, p.nlist);
  p.nprobe = std::min(p.nprobe, p.nlist);
  if (p.max_train_points == 0) p.max_train_points = 256 * p.nlist;
  return p;
}

Sha256Digest Centroids::checksum() const {
  const std::string block = encode_centroid_block(*this);
  return sha256({reinterpret_cast<const std::uint8_t*>(block.data()), block.size()});
}

std::size_t assign(const Centroids& centroids, std::span<const float> v) {
  std::size_t best = 0;
  float best_sim = dot(centroids.row(0), v);
  for (std::size_t c = 1; c < centroids.nlist; ++c) {
    const float s = dot(centroids.row(c), v);
    if (s > best_sim) {
      best_sim = s;
      best = c;
    }
  }
  return best;
}

Centroids train(const EmbeddingSet& set, const IvfParams& raw) {
  const IvfParams params = raw.resolved(set.size());
  const std::size_t nlist = params.nlist;
  const std::size_t dim = set.dim();
  if (set.size() < nlist) {
    throw DataError("ivf train: " + std::to_string(set.size()) + " rows < nlist " +
                    std::to_string(nlist));
  }
  Rng rng(params.seed);

  // Training sample: all rows, or a seeded subset when the corpus is large.
  std::vector<std::size_t> sample(set.size());
  std::iota(sample.begin(), sample.end(), 0);
  if (sample.size() > params.max_train_points) {
    for (std::size_t i = 0; i < params.max_train_points; ++i) {
      std::swap(sample[i], sample[i + rng.uniform(sample.size() - i)]);
    }
    sample.resize(params.max_train_points);
    std::sort(sample.begin(), sample.end());
  }
  const std::size_t n = sample.size();
  auto point = [&](std::size_t i) { return set.row(sample[i]); };

  Centroids cent;
  cent.dim = dim;
  cent.nlist = nlist;
  cent.data.resize(nlist * dim);
  auto set_centroid = [&](std::size_t c, std::span<const float> v) {
    std::copy(v.begin(), v.end(), cent.data.begin() + static_cast<std::ptrdiff_t>(c * dim));
  };

  // k-means++ seeding. On the unit sphere |x-c|^2 = 2 - 2 x.c, so the
  // sampling weight is proportional to 1 - best similarity.
  std::vector<bool> chosen(n, false);
  std::vector<double> gap(n, 0.0);
  std::size_t first = rng.uniform(n);
  chosen[first] = true;
  set_centroid(0, point(first));
  for (std::size_t i = 0; i < n; ++i) gap[i] = std::max(0.0, 1.0 - dot(point(i), point(first)));
  for (std::size_t c = 1; c < nlist; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i]) total += gap[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform01() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || gap[i] <= 0.0) continue;
        acc += gap[i];
        pick = i;
        if (acc > r) break;
      }
    } else {
      // Every remaining row duplicates a chosen centroid.
      std::size_t offset = rng.uniform(n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = (offset + j) % n;
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    APPMORPH_CHECK(pick < n, "k-means++ seeding found no candidate");
    chosen[pick] = true;
    set_centroid(c, point(pick));
    for (std::size_t i = 0; i < n; ++i) {
      gap[i] = std::min(gap[i], std::max(0.0, 1.0 - dot(point(i), point(pick))));
    }
  }

  std::vector<std::size_t> label(n);
  std::vector<float> fit(n);
  std::vector<double> sums(nlist * dim);
  std::vector<std::size_t> counts(nlist);
  for (int iter = 0; iter < params.kmeans_iters; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      label[i] = assign(cent, point(i));
      fit[i] = dot(cent.row(label[i]), point(i));
      ++counts[label[i]];
    }
    for (std::size_t c = 0; c < nlist; ++c) {
      if (counts[c] != 0) continue;
      const auto largest = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t worst = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (label[i] == largest && (worst == n || fit[i] < fit[worst])) worst = i;
      }
      set_centroid(c, point(worst));
      label[worst] = c;
      fit[worst] = 1.0f;
      --counts[largest];
      ++counts[c];
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = point(i);
      double* s = sums.data() + label[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += p[d];
    }
    for (std::size_t c = 0; c < nlist; ++c) {
      const double* s = sums.data() + c * dim;
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) sq += s[d] * s[d];
      if (sq == 0.0) continue;  // antipodal members cancel; keep the old centroid
      const double inv = 1.0 / std::sqrt(sq);
      for (std::size_t d = 0; d < dim; ++d) cent.data[c * dim + d] = static_cast<float>(s[d] * inv);
    }
  }
  for (std::size_t c = 0; c < nlist; ++c) {
    renormalize({cent.data.data() + c * dim, dim});
  }
  return cent;
}

IvfIndex::IvfIndex(ModalityKind modality, Centroids centroids, IvfParams params)
    : modality_(modality), centroids_(std::move(centroids)), params_(params) {
  if (centroids_.nlist == 0 || centroids_.dim == 0 ||
      centroids_.data.size() != centroids_.nlist * centroids_.dim) {
    throw DataError("ivf: malformed centroid block");
  }
  params_.nlist = centroids_.nlist;
  params_ = params_.resolved(0);
  checksum_ = centroids_.checksum();
  lists_.resize(centroids_.nlist);
}

bool IvfIndex::contains(std::string_view app_id) const {
  return row_of_.count(std::string(app_id)) != 0;
}

void IvfIndex::add(const EmbeddingSet& set) {
  if (set.dim() != dim()) {
    throw DataError("ivf add: dimension " + std::to_string(set.dim()) + " != index dimension " +
                    std::to_string(dim()));
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto row = static_cast<std::uint32_t>(ids_.size());
    if (!row_of_.emplace(set.id(i), row).second) {
      throw DataError("ivf add: duplicate app_id '" + set.id(i) + "'");
    }
    ids_.push_back(set.id(i));
    auto v = set.row(i);
    List& l = lists_[assign(centroids_, v)];
    l.rows.push_back(row);
    l.vectors.insert(l.vectors.end(), v.begin(), v.end());
  }
}

NeighborList IvfIndex::query(std::span<const float> q, std::size_t k, std::size_t nprobe) const {
  APPMORPH_CHECK(q.size() == dim(), "ivf query: dimension mismatch");
  APPMORPH_CHECK(k >= 1, "ivf query: k must be >= 1");
  if (nprobe == 0) nprobe = params_.nprobe;
  nprobe = std::min(nprobe, nlist());

  std::vector<std::pair<float, std::size_t>> order(nlist());
  for (std::size_t c = 0; c < nlist(); ++c) order[c] = {dot(centroids_.row(c), q), c};
  auto closer = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nprobe),
                    order.end(), closer);

  std::vector<Scored> cand;
  for (std::size_t p = 0; p < nprobe; ++p) {
    const List& l = lists_[order[p].second];
    for (std::size_t j = 0; j < l.rows.size(); ++j) {
      cand.push_back({dot({l.vectors.data() + j * dim(), dim()}, q), l.rows[j]});
    }
  }
  return top_k_by_similarity(cand, k, ids_);
}

std::string IvfIndex::encode() const {
  detail::ByteWriter w;
  w.bytes(kIvfMagic);
  w.u8(static_cast<std::uint8_t>(modality_));
  w.u32(static_cast<std::uint32_t>(dim()));
  w.u32(static_cast<std::uint32_t>(nlist()));
  w.u64(params_.seed);
  w.u32(static_cast<std::uint32_t>(params_.kmeans_iters));
  w.bytes({reinterpret_cast<const char*>(checksum_.data()), checksum_.size()});
  w.f32s(centroids_.data);
  for (const auto& l : lists_) {
    w.u64(l.rows.size());
    for (std::size_t j = 0; j < l.rows.size(); ++j) {
      w.id(ids_[l.rows[j]]);
      w.f32s({l.vectors.data() + j * dim(), dim()});
    }
  }
  return std::move(w.str());
}

IvfIndex IvfIndex::decode(std::string_view bytes) {
  detail::ByteReader r(bytes, "IVF1");
  if (bytes.size() < kIvfMagic.size() || r.bytes(kIvfMagic.size()) != kIvfMagic) {
    throw DataError("IVF1: bad magic");
  }
  const auto modality = modality_from_tag(r.u8());
  Centroids cent;
  cent.dim = r.u32();
  cent.nlist = r.u32();
  IvfParams params;
  params.seed = r.u64();
  params.kmeans_iters = static_cast<int>(r.u32());
  Sha256Digest stored{};
  auto sum = r.bytes(stored.size());
  std::copy(sum.begin(), sum.end(), stored.begin());
  if (cent.dim == 0 || cent.nlist == 0) throw DataError("IVF1: zero dim or nlist");
  if (cent.nlist * cent.dim > r.remaining() / 4) throw DataError("IVF1: truncated payload");
  cent.data.resize(cent.nlist * cent.dim);
  r.f32s(cent.data);
  IvfIndex index(modality, std::move(cent), params);
  if (index.checksum_ != stored) throw DataError("IVF1: centroid checksum does not match header");

  const std::size_t dim = index.dim();
  std::vector<float> v(dim);
  for (std::size_t c = 0; c < index.nlist(); ++c) {
    const auto count = r.u64();
    if (count > r.remaining() / (2 + 4 * dim)) throw DataError("IVF1: truncated payload");
    List& l = index.lists_[c];
    for (std::uint64_t j = 0; j < count; ++j) {
      std::string id = r.id();
      r.f32s(v);
      const auto row = static_cast<std::uint32_t>(index.ids_.size());
      if (!index.row_of_.emplace(id, row).second) {
        throw DataError("IVF1: duplicate app_id '" + id + "'");
      }
      index.ids_.push_back(std::move(id));
      l.rows.push_back(row);
      l.vectors.insert(l.vectors.end(), v.begin(), v.end());
    }
  }
  if (!r.done()) throw DataError("IVF1: trailing bytes after last list");
  return index;
}

IvfIndex IvfIndex::merge(std::span<const IvfIndex> parts) {
  if (parts.empty()) throw DataError("ivf merge: no inputs");
  const IvfIndex& head = parts.front();
  IvfIndex out(head.modality_, head.centroids_, head.params_);
  for (const auto& part : parts) {
    if (part.checksum_ != head.checksum_) {
      throw DataError("ivf merge: centroid checksum mismatch (" + to_hex(part.checksum_) +
                      " vs " + to_hex(head.checksum_) + ")");
    }
    if (part.modality_ != head.modality_) throw DataError("ivf merge: modality mismatch");
  }
  for (std::size_t c = 0; c < out.nlist(); ++c) {
    List& dst = out.lists_[c];
    for (const auto& part : parts) {
      const List& src = part.lists_[c];
      for (std::size_t j = 0; j < src.rows.size(); ++j) {
        const std::string& id = part.ids_[src.rows[j]];
        const auto row = static_cast<std::uint32_t>(out.ids_.size());
        if (!out.row_of_.emplace(id, row).second) {
          throw DataError("ivf merge: duplicate app_id '" + id + "' across shards");
        }
        out.ids_.push_back(id);
        dst.rows.push_back(row);
        dst.vectors.insert(dst.vectors.end(),
                           src.vectors.begin() + static_cast<std::ptrdiff_t>(j * out.dim()),
                           src.vectors.begin() + static_cast<std::ptrdiff_t>((j + 1) * out.dim()));
      }
    }
  }
  return out;
}

IvfIndex build_index(const EmbeddingSet& set, const IvfParams& params) {
  const IvfParams p = params.resolved(set.size());
  IvfIndex index(set.modality(), train(set, p), p);
  index.add(set);
  return index;
}

void build_shard(const EmbeddingSet& set, const Centroids& centroids, const IvfParams& params,
                 const std::filesystem::path& shard_path) {
  IvfIndex index(set.modality(), centroids, params);
  index.add(set);
  write_index(index, shard_path);
}

IvfIndex read_index(const std::filesystem::path& path) {
  try {
    return IvfIndex::decode(detail::read_file(path.string()));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_index(const IvfIndex& index, const std::filesystem::path& path) {
  detail::write_file(path.string(), index.encode());
}

IvfIndex merge_shards(std::span<const std::filesystem::path> shard_paths,
                      const std::filesystem::path& out_path) {
  std::vector<IvfIndex> parts;
  parts.reserve(shard_paths.size());
  for (const auto& p : shard_paths) parts.push_back(read_index(p));
  IvfIndex merged = IvfIndex::merge(parts);
  write_index(merged, out_path);
  return merged;
}

NeighborList exact_search(const EmbeddingSet& set, std::span<const float> q, std::size_t k) {
  APPMORPH_CHECK(q.size() == set.dim(), "exact_search: dimension mismatch");
  APPMORPH_CHECK(k >= 1, "exact_search: k must be >= 1");
  std::vector<Scored> cand(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    cand[i] = {dot(set.row(i), q), static_cast<std::uint32_t>(i)};
  }
  return top_k_by_similarity(cand, k, set.ids());
}

double recall(const NeighborList& got, const NeighborList& truth) {
  if (truth.empty()) return 1.0;
  std::unordered_set<std::string> want;
  for (const auto& n : truth) want.insert(n.app_id);
  std::size_t hit = 0;
  for (const auto& n : got) hit += want.count(n.app_id);
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace appmorph
