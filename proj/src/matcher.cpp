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
#include "appmorph/matcher.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"

namespace appmorph {

void validate(const MatchConfig& cfg) {
  if (cfg.alpha < 1 || cfg.alpha > 5) {
    throw DataError("alpha must be in [1,5], got " + std::to_string(cfg.alpha));
  }
  if (cfg.k < 1) throw DataError("k must be >= 1");
}

namespace {

std::string fold_case(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

}  // namespace

bool same_developer(std::string_view a, std::string_view b) {
  return fold_case(a) == fold_case(b);
}

DeveloperLookup developer_lookup(const Catalog& catalog) {
  return [&catalog](std::string_view id) -> std::optional<std::string> {
    if (const AppRecord* r = catalog.find(id)) return r->developer_name;
    return std::nullopt;
  };
}

VotedCandidates majority_vote(std::span<const NeighborList, 4> lists, const NeighborList& dev_list,
                              const DeveloperLookup& dev_of, std::uint64_t seed,
                              bool apply_dev_bonus) {
  VotedCandidates out;
  out.rng_seed = seed;
  std::size_t depth = 0;
  for (const auto& l : lists) depth = std::max(depth, l.size());

  Rng rng(seed);
  std::set<std::string> selected;
  std::map<std::string, int> live;  // ordered, so ties enumerate by app id
  std::vector<const std::string*> tied;
  for (std::size_t row = 0; row < depth; ++row) {
    for (const auto& l : lists) {
      if (row < l.size() && !selected.count(l[row].app_id)) ++live[l[row].app_id];
    }
    if (live.empty()) break;

    int best = 0;
    for (const auto& [id, count] : live) best = std::max(best, count);
    tied.clear();
    for (const auto& [id, count] : live) {
      if (count == best) tied.push_back(&id);
    }
    const std::string pick = *tied[tied.size() == 1 ? 0 : rng.uniform(tied.size())];

    VotedCandidate cand{pick, best, false, row + 1};
    if (apply_dev_bonus && row < dev_list.size()) {
      const auto picked_dev = dev_of(pick);
      const auto row_dev = dev_of(dev_list[row].app_id);
      if (picked_dev && row_dev && same_developer(*picked_dev, *row_dev)) {
        ++cand.occurrence_count;
        cand.dev_bonus = true;
      }
    }
    live.erase(pick);
    selected.insert(pick);
    out.items.push_back(std::move(cand));
  }
  return out;
}

MatchVerdict decide(const VotedCandidates& cands, const AppRecord& query,
                    const Catalog& new_catalog, const MatchConfig& cfg) {
  std::vector<std::int64_t> delta;
  delta.reserve(cands.items.size());
  bool any_growth = false;
  for (const auto& c : cands.items) {
    const AppRecord* r = new_catalog.find(c.app_id);
    if (!r) {
      throw DataError("candidate '" + c.app_id + "' not in catalog " + new_catalog.label());
    }
    delta.push_back(r->rating_count - query.rating_count);
    any_growth = any_growth || delta.back() > 0;
  }
  for (std::size_t i = 0; i < cands.items.size(); ++i) {
    const auto& c = cands.items[i];
    if (c.occurrence_count < cfg.alpha) continue;
    if (!any_growth) return Match{c.app_id, c.occurrence_count, delta[i], true};
    if (delta[i] > 0) return Match{c.app_id, c.occurrence_count, delta[i], false};
  }
  return std::nullopt;
}

std::map<std::string, MatchVerdict> MatchRun::verdicts() const {
  std::map<std::string, MatchVerdict> out;
  for (const auto& r : results) out.emplace(r.query_id, r.verdict);
  return out;
}

std::uint64_t query_seed(std::uint64_t seed, std::string_view query_id) {
  return hash_string(query_id, seed);
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

MatchRun match_all(std::span<const AppRecord> queries, const ModalityIndexes& indexes,
                   const ModalitySets& query_embeddings, const Catalog& new_catalog,
                   const MatchConfig& cfg, std::size_t workers) {
  validate(cfg);
  for (auto m : kAllModalities) {
    const IvfIndex* index = indexes[static_cast<std::size_t>(m)];
    if (!index) throw DataError("no index for modality " + std::string(modality_name(m)));
    if (for_modality(query_embeddings, m).dim() != index->dim()) {
      throw DataError("query embedding dimension does not match the " +
                      std::string(modality_name(m)) + " index");
    }
  }
  const auto dev_of = developer_lookup(new_catalog);

  std::vector<std::optional<QueryResult>> slots(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t qi) {
    const AppRecord& query = queries[qi];
    std::array<std::span<const float>, 5> vecs;
    for (auto m : kAllModalities) {
      auto row = for_modality(query_embeddings, m).find_row(query.app_id);
      if (!row) return;
      vecs[static_cast<std::size_t>(m)] = *row;
    }
    auto search = [&](ModalityKind m) {
      const auto t = static_cast<std::size_t>(m);
      return indexes[t]->query(vecs[t], cfg.k, cfg.nprobe);
    };
    std::array<NeighborList, 4> lists;
    for (std::size_t j = 0; j < kVotingModalities.size(); ++j) lists[j] = search(kVotingModalities[j]);
    const NeighborList dev_list = search(ModalityKind::DeveloperName);

    QueryResult res;
    res.query_id = query.app_id;
    res.voted = majority_vote(lists, dev_list, dev_of, query_seed(cfg.seed, query.app_id));
    res.verdict = decide(res.voted, query, new_catalog, cfg);
    slots[qi] = std::move(res);
  });

  MatchRun run;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    if (slots[qi]) {
      run.results.push_back(std::move(*slots[qi]));
    } else {
      run.skipped.push_back(queries[qi].app_id);
    }
  }
  return run;
}

MatchRun redecide(const MatchRun& voted, const Catalog& old_catalog, const Catalog& new_catalog,
                  const MatchConfig& cfg) {
  validate(cfg);
  MatchRun run;
  run.skipped = voted.skipped;
  run.results.reserve(voted.results.size());
  for (const auto& r : voted.results) {
    const AppRecord* query = old_catalog.find(r.query_id);
    if (!query) throw DataError("query '" + r.query_id + "' not in catalog " + old_catalog.label());
    run.results.push_back({r.query_id, r.voted, decide(r.voted, *query, new_catalog, cfg)});
  }
  return run;
}

}  // namespace appmorph
