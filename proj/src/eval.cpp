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
#include "appmorph/eval.hpp"

#include <algorithm>
#include <sstream>

#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"
#include "json.hpp"

namespace appmorph {

using json = nlohmann::ordered_json;

MatchMetrics metrics(const ConfusionCounts& c) {
  MatchMetrics m;
  const std::size_t total = c.total();
  m.accuracy = total ? static_cast<double>(c.tp) / static_cast<double>(total) : 0.0;
  if (c.tp + c.fp) {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    m.empty = true;
  }
  if (c.tp + c.fn) {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    m.empty = true;
  }
  return m;
}

ConfusionCounts score_match_scenario(const std::map<std::string, MatchVerdict>& verdicts,
                                     const std::map<std::string, std::string>& truth) {
  ConfusionCounts c;
  for (const auto& [query, target] : truth) {
    auto it = verdicts.find(query);
    if (it == verdicts.end() || !it->second) {
      ++c.fn;
    } else if (it->second->app_id == target) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  return c;
}

double NoMatchCounts::recall() const {
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
}

NoMatchCounts score_no_match_scenario(const std::map<std::string, MatchVerdict>& verdicts,
                                      std::span<const std::string> query_ids) {
  NoMatchCounts c;
  for (const auto& q : query_ids) {
    ++c.total;
    auto it = verdicts.find(q);
    if (it == verdicts.end() || !it->second) ++c.correct;
  }
  return c;
}

double harmonic_mean(double a, double b) {
  APPMORPH_CHECK(a >= 0.0 && b >= 0.0, "harmonic_mean: arguments must be non-negative");
  return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
}

EvalReport make_report(const ConfusionCounts& confusion, const NoMatchCounts& no_match) {
  EvalReport r;
  r.confusion = confusion;
  r.match = metrics(confusion);
  r.no_match = no_match;
  r.harmonic_mean = harmonic_mean(r.match.accuracy, no_match.recall());
  return r;
}

std::string report_json(const EvalReport& r) {
  json j;
  j["confusion"] = {{"tp", r.confusion.tp},
                    {"fp", r.confusion.fp},
                    {"fn", r.confusion.fn},
                    {"total", r.confusion.total()}};
  j["match"] = {{"accuracy_at_1", r.match.accuracy},
                {"precision_at_1", r.match.precision},
                {"recall_at_1", r.match.recall},
                {"empty", r.match.empty}};
  j["no_match"] = {{"correct", r.no_match.correct},
                   {"total", r.no_match.total},
                   {"recall_at_1", r.no_match.recall()}};
  j["harmonic_mean"] = r.harmonic_mean;
  return j.dump(2);
}

std::pair<std::size_t, std::size_t> AblationTable::best() const {
  std::pair<std::size_t, std::size_t> at{0, 0};
  double top = -1.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].cells.size(); ++c) {
      if (rows[r].cells[c].harmonic_mean > top) {
        top = rows[r].cells[c].harmonic_mean;
        at = {r, c};
      }
    }
  }
  return at;
}

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << v;
  return out.str();
}

}  // namespace

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << "variant";
  for (int a : alphas) out << ",alpha=" << a;
  out << '\n';
  for (const auto& row : rows) {
    out << row.variant;
    for (const auto& c : row.cells) out << ',' << fmt(c.harmonic_mean);
    out << '\n';
  }
  return out.str();
}

std::string AblationTable::to_long_csv() const {
  std::ostringstream out;
  out << "variant,alpha,match_accuracy,no_match_recall,harmonic_mean\n";
  for (const auto& row : rows) {
    for (const auto& c : row.cells) {
      out << row.variant << ',' << c.alpha << ',' << fmt(c.match_accuracy) << ','
          << fmt(c.no_match_recall) << ',' << fmt(c.harmonic_mean) << '\n';
    }
  }
  return out.str();
}

std::vector<AppRecord> gather(const Catalog& catalog, std::span<const std::string> ids) {
  std::vector<AppRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const AppRecord* r = catalog.find(id);
    if (!r) throw DataError("'" + id + "' not in catalog " + catalog.label());
    out.push_back(*r);
  }
  return out;
}

std::array<IvfIndex, 5> build_gallery_indexes(const ModalitySets& new_sets,
                                              std::span<const std::string> gallery_ids,
                                              const IvfParams& params) {
  std::array<IvfIndex, 5> out;
  for (auto m : kAllModalities) {
    const auto t = static_cast<std::size_t>(m);
    out[t] = build_index(subset(new_sets[t], gallery_ids), params);
  }
  return out;
}

AblationTable ablate(const Catalog& old_catalog, const Catalog& new_catalog,
                     const EvalSplit& match_split, const EvalSplit& no_match_split,
                     std::span<const EmbeddingVariant> variants, std::span<const int> alphas,
                     const AblationOptions& options) {
  if (alphas.empty()) throw DataError("ablate: no alpha values");
  AblationTable table;
  table.alphas.assign(alphas.begin(), alphas.end());
  const auto match_queries = gather(old_catalog, match_split.query_ids);
  const auto no_match_queries = gather(old_catalog, no_match_split.query_ids);

  MatchConfig vote_cfg = options.match;
  vote_cfg.alpha = 1;
  for (const auto& variant : variants) {
    if (!variant.old_sets || !variant.new_sets) {
      throw DataError("ablate: variant '" + variant.name + "' has no embeddings");
    }
    auto run_split = [&](const EvalSplit& split, const std::vector<AppRecord>& queries) {
      const auto indexes = build_gallery_indexes(*variant.new_sets, split.gallery_ids, options.ivf);
      return match_all(queries, index_pointers(indexes), *variant.old_sets, new_catalog, vote_cfg,
                       options.workers);
    };
    const MatchRun voted_match = run_split(match_split, match_queries);
    const MatchRun voted_none = run_split(no_match_split, no_match_queries);

    AblationRow row;
    row.variant = variant.name;
    for (int alpha : alphas) {
      MatchConfig cfg = options.match;
      cfg.alpha = alpha;
      const auto m = redecide(voted_match, old_catalog, new_catalog, cfg).verdicts();
      const auto n = redecide(voted_none, old_catalog, new_catalog, cfg).verdicts();
      AblationCell cell;
      cell.alpha = alpha;
      cell.match_accuracy = metrics(score_match_scenario(m, match_split.truth)).accuracy;
      cell.no_match_recall = score_no_match_scenario(n, no_match_split.query_ids).recall();
      cell.harmonic_mean = harmonic_mean(cell.match_accuracy, cell.no_match_recall);
      row.cells.push_back(cell);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

double baseline_score(const BaselineWeights& w, const ModalitySims& s) {
  return w.w_content * s.content + w.w_style * s.style + w.w_dev * s.dev + w.w_desc * s.desc +
         w.w_name * s.name;
}

namespace {

struct Best {
  const BaselineCandidate* cand = nullptr;
  double score = 0.0;
};

Best argmax(const BaselineQuery& q, const BaselineWeights& w) {
  Best best;
  for (const auto& c : q.candidates) {
    const double s = baseline_score(w, c.sims);
    if (!best.cand || s > best.score || (s == best.score && c.app_id < best.cand->app_id)) {
      best = {&c, s};
    }
  }
  return best;
}

}  // namespace

MatchVerdict baseline_match(const BaselineQuery& q, const BaselineWeights& w) {
  const Best best = argmax(q, w);
  if (!best.cand || best.score < w.threshold) return std::nullopt;
  return Match{best.cand->app_id, 0, 0, false};
}

BaselineQuery baseline_candidates(const std::string& query_id, const ModalitySets& old_sets,
                                  const ModalitySets& new_sets,
                                  std::span<const std::string> gallery_ids) {
  std::array<std::span<const float>, 5> q;
  for (auto m : kAllModalities) {
    const auto row = for_modality(old_sets, m).find_row(query_id);
    if (!row) {
      throw DataError("no " + std::string(modality_name(m)) + " embedding for '" + query_id + "'");
    }
    q[static_cast<std::size_t>(m)] = *row;
  }
  auto sim = [&](ModalityKind m, const std::string& id) -> double {
    const auto row = for_modality(new_sets, m).find_row(id);
    if (!row) throw DataError("no " + std::string(modality_name(m)) + " embedding for '" + id + "'");
    return dot(q[static_cast<std::size_t>(m)], *row);
  };
  BaselineQuery out;
  out.query_id = query_id;
  out.candidates.reserve(gallery_ids.size());
  for (const auto& id : gallery_ids) {
    ModalitySims s;
    s.content = sim(ModalityKind::IconContent, id);
    s.style = sim(ModalityKind::IconStyle, id);
    s.dev = sim(ModalityKind::DeveloperName, id);
    s.desc = sim(ModalityKind::Description, id);
    s.name = sim(ModalityKind::AppName, id);
    out.candidates.push_back({id, s});
  }
  return out;
}

TunedBaseline tune_baseline(std::span<const BaselineQuery> match_queries,
                            const std::map<std::string, std::string>& truth,
                            std::span<const BaselineQuery> no_match_queries, std::size_t budget,
                            std::uint64_t seed) {
  if (budget == 0) throw DataError("tune_baseline: budget must be >= 1");
  constexpr int kGrid = 21;
  Rng rng(seed);
  TunedBaseline out;
  bool have = false;
  while (out.evaluations < budget) {
    BaselineWeights w;
    for (int* f : {&w.w_content, &w.w_style, &w.w_dev, &w.w_desc, &w.w_name}) {
      *f = 1 + static_cast<int>(rng.uniform(10));
    }
    std::vector<Best> hits, misses;
    hits.reserve(match_queries.size());
    for (const auto& q : match_queries) hits.push_back(argmax(q, w));
    misses.reserve(no_match_queries.size());
    for (const auto& q : no_match_queries) misses.push_back(argmax(q, w));

    for (int g = 0; g < kGrid && out.evaluations < budget; ++g) {
      w.threshold = static_cast<double>(w.sum()) * g / (kGrid - 1);
      std::map<std::string, MatchVerdict> mv, nv;
      for (std::size_t i = 0; i < match_queries.size(); ++i) {
        MatchVerdict v;
        if (hits[i].cand && hits[i].score >= w.threshold) v = Match{hits[i].cand->app_id, 0, 0, false};
        mv.emplace(match_queries[i].query_id, std::move(v));
      }
      std::vector<std::string> none_ids;
      for (std::size_t i = 0; i < no_match_queries.size(); ++i) {
        MatchVerdict v;
        if (misses[i].cand && misses[i].score >= w.threshold) {
          v = Match{misses[i].cand->app_id, 0, 0, false};
        }
        nv.emplace(no_match_queries[i].query_id, std::move(v));
        none_ids.push_back(no_match_queries[i].query_id);
      }
      const double hm = harmonic_mean(metrics(score_match_scenario(mv, truth)).accuracy,
                                      score_no_match_scenario(nv, none_ids).recall());
      ++out.evaluations;
      if (!have || hm > out.harmonic_mean) {
        out.weights = w;
        out.harmonic_mean = hm;
        have = true;
      }
    }
  }
  return out;
}

}  // namespace appmorph
