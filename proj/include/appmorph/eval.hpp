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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "appmorph/ann.hpp"
#include "appmorph/catalog.hpp"
#include "appmorph/embed_io.hpp"
#include "appmorph/matcher.hpp"

namespace appmorph {

// ---------------------------------------------------------------------------
// Metrics

/// Match-scenario outcomes. There are no true negatives: every query has a
/// target, so total = tp + fp + fn.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct MatchMetrics {
  double accuracy = 0.0;
  double precision = 1.0;
  double recall = 1.0;
  /// Set when a denominator was zero and a convention value was used.
  bool empty = false;
};

/// P = tp/(tp+fp), R = tp/(tp+fn), both 1 on a zero denominator;
/// A = tp/total, 0 when total is 0.
MatchMetrics metrics(const ConfusionCounts& c);

/// Scores every query in `truth` (query id -> target id). A query absent from
/// `verdicts` counts as a no-result.
ConfusionCounts score_match_scenario(const std::map<std::string, MatchVerdict>& verdicts,
                                     const std::map<std::string, std::string>& truth);

struct NoMatchCounts {
  std::size_t correct = 0;
  std::size_t total = 0;

  /// correct / total, 1 when total is 0.
  double recall() const;
  bool operator==(const NoMatchCounts&) const = default;
};

/// In the no-match scenario a query is correct when it receives no match.
NoMatchCounts score_no_match_scenario(const std::map<std::string, MatchVerdict>& verdicts,
                                      std::span<const std::string> query_ids);

/// 2ab/(a+b), 0 when a+b is 0.
double harmonic_mean(double a, double b);

struct EvalReport {
  ConfusionCounts confusion;
  MatchMetrics match;
  NoMatchCounts no_match;
  double harmonic_mean = 0.0;
};

EvalReport make_report(const ConfusionCounts& confusion, const NoMatchCounts& no_match);

/// {"confusion": {...}, "match": {...}, "no_match": {...}, "harmonic_mean": x}
std::string report_json(const EvalReport& r);

// ---------------------------------------------------------------------------
// Ablation

/// Old and new snapshots' embeddings for one combination of encoders.
struct EmbeddingVariant {
  std::string name;
  const ModalitySets* old_sets = nullptr;
  const ModalitySets* new_sets = nullptr;
};

struct AblationCell {
  int alpha = 0;
  double match_accuracy = 0.0;
  double no_match_recall = 0.0;
  double harmonic_mean = 0.0;
};

struct AblationRow {
  std::string variant;
  std::vector<AblationCell> cells;  // one per alpha, in input order
};

struct AblationTable {
  std::vector<int> alphas;
  std::vector<AblationRow> rows;

  /// (row, cell) of the highest harmonic mean; first wins on ties.
  std::pair<std::size_t, std::size_t> best() const;
  /// Header "variant,alpha=1,...", then one row of harmonic means per variant.
  std::string to_csv() const;
  /// Long form: variant,alpha,match_accuracy,no_match_recall,harmonic_mean.
  std::string to_long_csv() const;
};

struct AblationOptions {
  IvfParams ivf;
  MatchConfig match;  // alpha is ignored; seed, k and nprobe are used
  std::size_t workers = 0;
};

/// Per-modality gallery indexes over `gallery_ids`.
std::array<IvfIndex, 5> build_gallery_indexes(const ModalitySets& new_sets,
                                              std::span<const std::string> gallery_ids,
                                              const IvfParams& params);

inline ModalityIndexes index_pointers(const std::array<IvfIndex, 5>& indexes) {
  return {&indexes[0], &indexes[1], &indexes[2], &indexes[3], &indexes[4]};
}

/// For each variant, votes once per split and re-decides per alpha.
AblationTable ablate(const Catalog& old_catalog, const Catalog& new_catalog,
                     const EvalSplit& match_split, const EvalSplit& no_match_split,
                     std::span<const EmbeddingVariant> variants, std::span<const int> alphas,
                     const AblationOptions& options);

/// Records of `ids` from `catalog`. Throws DataError for a missing id.
std::vector<AppRecord> gather(const Catalog& catalog, std::span<const std::string> ids);

// ---------------------------------------------------------------------------
// Weighted-sum baseline

struct BaselineWeights {
  int w_content = 1;
  int w_style = 1;
  int w_dev = 1;
  int w_desc = 1;
  int w_name = 1;
  double threshold = 0.0;

  int sum() const { return w_content + w_style + w_dev + w_desc + w_name; }
  bool operator==(const BaselineWeights&) const = default;
};

/// Per-modality cosines between a query and one candidate.
struct ModalitySims {
  double content = 0.0;
  double style = 0.0;
  double dev = 0.0;
  double desc = 0.0;
  double name = 0.0;
};

double baseline_score(const BaselineWeights& w, const ModalitySims& s);

struct BaselineCandidate {
  std::string app_id;
  ModalitySims sims;
};

struct BaselineQuery {
  std::string query_id;
  std::vector<BaselineCandidate> candidates;
};

/// Highest-scoring candidate (ascending app id on ties); a match iff its score
/// reaches the threshold.
MatchVerdict baseline_match(const BaselineQuery& q, const BaselineWeights& w);

/// Cosines of `query_id` in the old sets against every gallery id in the new
/// sets.
BaselineQuery baseline_candidates(const std::string& query_id, const ModalitySets& old_sets,
                                  const ModalitySets& new_sets,
                                  std::span<const std::string> gallery_ids);

struct TunedBaseline {
  BaselineWeights weights;
  double harmonic_mean = 0.0;
  std::size_t evaluations = 0;
};

/// Seeded random search. Each sampled weight vector is paired with thresholds
/// from a 21-point grid over [0, sum of weights]; every (weights, threshold)
/// pair scored is one evaluation, and at most `budget` are scored.
TunedBaseline tune_baseline(std::span<const BaselineQuery> match_queries,
                            const std::map<std::string, std::string>& truth,
                            std::span<const BaselineQuery> no_match_queries, std::size_t budget,
                            std::uint64_t seed);

}  // namespace appmorph
