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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "appmorph/ann.hpp"
#include "appmorph/catalog.hpp"
#include "appmorph/embed_io.hpp"

namespace appmorph {

/// Modalities that vote, in list order. Developer name is handled separately.
inline constexpr std::array<ModalityKind, 4> kVotingModalities = {
    ModalityKind::IconContent, ModalityKind::IconStyle, ModalityKind::AppName,
    ModalityKind::Description};

struct VotedCandidate {
  std::string app_id;
  int occurrence_count = 0;
  bool dev_bonus = false;
  std::size_t position = 0;  // 1-based
  bool operator==(const VotedCandidate&) const = default;
};

struct VotedCandidates {
  std::vector<VotedCandidate> items;
  std::uint64_t rng_seed = 0;
  bool operator==(const VotedCandidates&) const = default;
};

struct MatchConfig {
  std::size_t k = 5;
  int alpha = 3;
  std::uint64_t seed = 0;
  /// 0 uses each index's default.
  std::size_t nprobe = 0;
};

/// Throws DataError unless 1 <= alpha <= 5 and k >= 1.
void validate(const MatchConfig& cfg);

struct Match {
  std::string app_id;
  int occurrence_count = 0;
  std::int64_t rating_delta = 0;
  bool fallback_used = false;
  bool operator==(const Match&) const = default;
};

/// nullopt is a no-match.
using MatchVerdict = std::optional<Match>;

/// Case-folded developer-name equality used by the voting bonus.
bool same_developer(std::string_view a, std::string_view b);

/// Looks up the developer of an app id; nullopt when unknown.
using DeveloperLookup = std::function<std::optional<std::string>(std::string_view)>;

/// Developer lookup over a catalog.
DeveloperLookup developer_lookup(const Catalog& catalog);

/// Row-wise majority voting over four ranked neighbor lists.
///
/// At each row i, every unselected app seen in rows 1..i of the four lists is
/// live; its count is the number of those appearances. The live app with the
/// highest count is selected, ties drawn uniformly by a generator seeded with
/// `seed`. Live apps that were not selected carry forward with their counts.
/// After each selection, if the developer-name list's row-i app shares a
/// developer with the selected app, the selected app's occurrence count gets
/// +1; this never changes which app is selected. Voting stops when the live
/// pool is empty.
///
/// With `apply_dev_bonus` false the developer step is skipped.
VotedCandidates majority_vote(std::span<const NeighborList, 4> lists, const NeighborList& dev_list,
                              const DeveloperLookup& dev_of, std::uint64_t seed,
                              bool apply_dev_bonus = true);

/// First candidate (in position order) with occurrence count >= alpha and a
/// strictly positive rating-count change. If no candidate at all has a
/// positive change, the first with count >= alpha is taken and flagged as a
/// fallback. Throws DataError if a candidate id is missing from new_catalog.
MatchVerdict decide(const VotedCandidates& cands, const AppRecord& query,
                    const Catalog& new_catalog, const MatchConfig& cfg);

/// Five gallery indexes indexed by modality tag.
using ModalityIndexes = std::array<const IvfIndex*, 5>;

struct QueryResult {
  std::string query_id;
  VotedCandidates voted;
  MatchVerdict verdict;
};

struct MatchRun {
  /// One entry per query that had every embedding, in query order.
  std::vector<QueryResult> results;
  /// Queries skipped for a missing query-side embedding row.
  std::vector<std::string> skipped;

  std::map<std::string, MatchVerdict> verdicts() const;
};

/// Per-query tie-break seed derived from the run seed.
std::uint64_t query_seed(std::uint64_t seed, std::string_view query_id);

/// Retrieve, vote, and decide for every query. Queries are independent and
/// fan out over `workers` threads (0 = hardware concurrency); output does not
/// depend on the worker count.
MatchRun match_all(std::span<const AppRecord> queries, const ModalityIndexes& indexes,
                   const ModalitySets& query_embeddings, const Catalog& new_catalog,
                   const MatchConfig& cfg, std::size_t workers = 0);

/// Re-runs only `decide` (with cfg) over already-voted results, so an alpha
/// sweep retrieves and votes once per query.
/// Query records are looked up in old_catalog.
MatchRun redecide(const MatchRun& voted, const Catalog& old_catalog, const Catalog& new_catalog,
                  const MatchConfig& cfg);

/// Runs fn(i) for i in [0, n) over a pool of worker threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace appmorph
