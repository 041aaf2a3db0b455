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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "appmorph/catalog.hpp"
#include "appmorph/embed_io.hpp"
#include "appmorph/matcher.hpp"
#include "appmorph/textvec.hpp"

namespace appmorph {

/// Verdict crossed with whether the old id survives in the new snapshot.
enum class MappingOutcome {
  MatchSameId,
  MatchDiffId_OldIdPresent,
  MatchDiffId_OldIdAbsent,
  NoMatch_IdPresent,
  NoMatch_IdAbsent,
};

inline constexpr std::array<MappingOutcome, 5> kAllOutcomes = {
    MappingOutcome::MatchSameId, MappingOutcome::MatchDiffId_OldIdPresent,
    MappingOutcome::MatchDiffId_OldIdAbsent, MappingOutcome::NoMatch_IdPresent,
    MappingOutcome::NoMatch_IdAbsent};

std::string_view outcome_name(MappingOutcome o);

enum class MetamorphosisLabel {
  ReBirth,
  ReBrand,
  RePurpose,
  GenreChange,
  ContentRatingChange,
  PaidToFree,
  Transferred,
  DemographyVariant,
  ProgressiveVersion,
  Discontinued,
  Unclassified,
};

using LabelSet = std::set<MetamorphosisLabel>;

std::string_view label_name(MetamorphosisLabel l);
MetamorphosisLabel parse_label(std::string_view name);

// ---------------------------------------------------------------------------
// Growth

/// Compound annual growth rate (n_final / n_initial)^(1/t) - 1. nullopt is the
/// "no baseline" result for n_initial <= 0. Throws InvariantError for t <= 0
/// or negative n_final.
std::optional<double> cagr(double n_initial, double n_final, double t);

struct SuccessParams {
  double years = 5.0;
  double eco_initial = 2.3e9;
  double eco_final = 3.6e9;
};

struct SuccessScore {
  double cagr_downloads = 0.0;
  double cagr_ratings = 0.0;
  double cagr_ecosystem = 0.0;
  double ss = 0.0;
  double t = 0.0;
};

/// ss = cagr_downloads / 2 + cagr_ratings / 2 - cagr_ecosystem.
SuccessScore success_score_from_rates(double cagr_downloads, double cagr_ratings,
                                      double cagr_ecosystem, double t);

/// nullopt when the old record has zero downloads or zero ratings.
std::optional<SuccessScore> success_score(const AppRecord& old_rec, const AppRecord& new_rec,
                                          const SuccessParams& params = {});

/// Recomputes ss from the three rates and compares exactly.
bool ss_identity_holds(const SuccessScore& s);

// ---------------------------------------------------------------------------
// Per-query rules

MappingOutcome map_outcome(const AppRecord& query, const MatchVerdict& verdict,
                           const Catalog& new_catalog);

/// Matched to a different id whose release date is after the query's last
/// update.
bool classify_rebirth(const AppRecord& query, const MatchVerdict& verdict,
                      const Catalog& new_catalog);

struct TaxonomyThresholds {
  double name = 0.7;
  double icon = 0.7;
  double desc_hi = 0.4;
  double desc_lo = 0.2;
  double transfer = 0.5;
  double dev_sim = 0.7;
};

/// Throws DataError if any threshold lies outside [0,1] or desc_lo > desc_hi.
void validate(const TaxonomyThresholds& t);

/// Old-vs-new similarities used by the re-brand / re-purpose split.
struct IdentitySimilarity {
  double name = 0.0;
  double icon = 0.0;
  double desc = 0.0;
};

/// Name and icon both below their thresholds, then the description band
/// decides: above desc_hi is ReBrand, [desc_lo, desc_hi] is RePurpose, and
/// anything else is Unclassified.
MetamorphosisLabel classify_rebrand_repurpose(const IdentitySimilarity& sim,
                                              const TaxonomyThresholds& t = {});

/// Name cosine from TF-IDF, icon-content and description cosines from the
/// embedding sets. Throws DataError when a side has no embedding row.
IdentitySimilarity identity_similarity(const AppRecord& old_rec, const AppRecord& new_rec,
                                       const TfIdfModel& tfidf, const EmbeddingSet& icon_old,
                                       const EmbeddingSet& icon_new, const EmbeddingSet& desc_old,
                                       const EmbeddingSet& desc_new);

/// GenreChange / ContentRatingChange (case-folded comparison) and PaidToFree.
LabelSet classify_field_changes(const AppRecord& old_rec, const AppRecord& new_rec);

/// TF-IDF cosine of two short strings. When either side has no in-vocabulary
/// n-gram the cosine carries no signal, so the strings are compared after
/// normalization instead (1 if equal and non-empty, else 0).
double text_similarity(const TfIdfModel& tfidf, std::string_view a, std::string_view b);

/// Mean similarity over the developer name, email and website fields present
/// on both sides is below `threshold`. False when no field is comparable.
bool classify_transfer(const AppRecord& old_rec, const AppRecord& new_rec, const TfIdfModel& tfidf,
                       double threshold = 0.5);

/// Name split into a stem and a trailing version token (integer, roman
/// numeral, or v<digits>); version is empty when there is none.
struct NameVersion {
  std::string stem;
  std::string version;
};
NameVersion split_version(std::string_view app_name);

/// Same stem, different version tokens.
bool is_progressive_pair(std::string_view name_a, std::string_view name_b);

/// Heuristic language/region tag from the name's script and from locale words
/// in the name or the last app-id segment. Empty when nothing is detected.
std::string locale_tag(const AppRecord& r);

/// Looks past the top candidate: neighbors whose developer is similar to the
/// query's (>= dev_sim_threshold) are DemographyVariant when their content
/// rating or locale tag differs from the top candidate, and
/// ProgressiveVersion when their name is a versioned form of it.
LabelSet classify_variants(const AppRecord& query, const VotedCandidates& voted,
                           const Catalog& new_catalog, const TfIdfModel& tfidf,
                           double dev_sim_threshold = 0.7);

// ---------------------------------------------------------------------------
// Permissions

class RiskCategoryMap {
 public:
  static constexpr std::string_view kDefaultTiers[] = {"normal", "low",      "medium",
                                                       "high",   "critical", "astronomical"};

  RiskCategoryMap();
  /// Throws DataError when a permission maps to an undeclared tier.
  RiskCategoryMap(std::vector<std::string> tier_order, std::map<std::string, std::string> permissions,
                  std::string default_tier = "unknown");

  static RiskCategoryMap from_json(std::string_view text);
  static RiskCategoryMap load(const std::filesystem::path& path);

  /// Declared tiers in order, then the default tier if it is not one of them.
  const std::vector<std::string>& tiers() const { return tiers_; }
  const std::string& tier_of(const std::string& permission) const;

 private:
  std::vector<std::string> tiers_;
  std::map<std::string, std::string> permissions_;
  std::string default_tier_;
};

struct TierDelta {
  std::string tier;
  std::int64_t before = 0;
  std::int64_t after = 0;
  /// 100 * (after - before) / before, and 0 when both are 0. Empty for a tier
  /// that goes from 0 to a positive count, which sets new_tier instead.
  std::optional<double> pct_change;
  bool new_tier = false;
};

using RecordPair = std::pair<AppRecord, AppRecord>;

std::vector<TierDelta> permission_risk_delta(std::span<const RecordPair> cohort,
                                             const RiskCategoryMap& risk);

// ---------------------------------------------------------------------------
// Whole-query classification

struct ClassifyContext {
  const Catalog* new_catalog = nullptr;
  const TfIdfModel* tfidf = nullptr;
  const EmbeddingSet* icon_old = nullptr;
  const EmbeddingSet* icon_new = nullptr;
  const EmbeddingSet* desc_old = nullptr;
  const EmbeddingSet* desc_new = nullptr;
  TaxonomyThresholds thresholds;
  SuccessParams success;
};

struct QueryClassification {
  std::string query_id;
  MappingOutcome outcome = MappingOutcome::NoMatch_IdAbsent;
  LabelSet labels;
  /// Matched app, or the same-id app for unmatched queries whose id survives.
  std::optional<std::string> counterpart_id;
  std::optional<SuccessScore> success;
};

/// Applies every rule that fits the query's outcome. `voted` may be null,
/// which skips the variant rules.
QueryClassification classify_query(const AppRecord& query, const MatchVerdict& verdict,
                                   const VotedCandidates* voted, const ClassifyContext& ctx);

/// {query_id, outcome, labels, counterpart_id?, ss?, cagr_downloads?, cagr_ratings?}
std::string to_json_line(const QueryClassification& c);
QueryClassification classification_from_json(std::string_view line);

/// outcome name -> count, over every outcome (zeros included).
std::map<std::string, std::size_t> outcome_census(std::span<const QueryClassification> rows);

/// "label,ss" rows, grouped by label and sorted ascending within each label.
std::string success_cdf_csv(std::span<const QueryClassification> rows);

}  // namespace appmorph
