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
#include "appmorph/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "appmorph/error.hpp"
#include "json.hpp"

namespace appmorph {

using json = nlohmann::ordered_json;

std::string_view outcome_name(MappingOutcome o) {
  switch (o) {
    case MappingOutcome::MatchSameId: return "match_same_id";
    case MappingOutcome::MatchDiffId_OldIdPresent: return "match_diff_id_old_id_present";
    case MappingOutcome::MatchDiffId_OldIdAbsent: return "match_diff_id_old_id_absent";
    case MappingOutcome::NoMatch_IdPresent: return "no_match_id_present";
    case MappingOutcome::NoMatch_IdAbsent: return "no_match_id_absent";
  }
  return "unknown";
}

namespace {

constexpr std::pair<MetamorphosisLabel, std::string_view> kLabelNames[] = {
    {MetamorphosisLabel::ReBirth, "rebirth"},
    {MetamorphosisLabel::ReBrand, "rebrand"},
    {MetamorphosisLabel::RePurpose, "repurpose"},
    {MetamorphosisLabel::GenreChange, "genre_change"},
    {MetamorphosisLabel::ContentRatingChange, "content_rating_change"},
    {MetamorphosisLabel::PaidToFree, "paid_to_free"},
    {MetamorphosisLabel::Transferred, "transferred"},
    {MetamorphosisLabel::DemographyVariant, "demography_variant"},
    {MetamorphosisLabel::ProgressiveVersion, "progressive_version"},
    {MetamorphosisLabel::Discontinued, "discontinued"},
    {MetamorphosisLabel::Unclassified, "unclassified"},
};

MappingOutcome parse_outcome(std::string_view name) {
  for (auto o : kAllOutcomes) {
    if (outcome_name(o) == name) return o;
  }
  throw DataError("unknown outcome '" + std::string(name) + "'");
}

std::string fold(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

}  // namespace

std::string_view label_name(MetamorphosisLabel l) {
  for (const auto& [label, name] : kLabelNames) {
    if (label == l) return name;
  }
  return "unknown";
}

MetamorphosisLabel parse_label(std::string_view name) {
  for (const auto& [label, n] : kLabelNames) {
    if (n == name) return label;
  }
  throw DataError("unknown label '" + std::string(name) + "'");
}

std::optional<double> cagr(double n_initial, double n_final, double t) {
  APPMORPH_CHECK(t > 0.0, "cagr: t must be positive");
  APPMORPH_CHECK(n_final >= 0.0, "cagr: n_final must be non-negative");
  if (!(n_initial > 0.0)) return std::nullopt;
  return std::pow(n_final / n_initial, 1.0 / t) - 1.0;
}

SuccessScore success_score_from_rates(double cagr_downloads, double cagr_ratings,
                                      double cagr_ecosystem, double t) {
  SuccessScore s;
  s.cagr_downloads = cagr_downloads;
  s.cagr_ratings = cagr_ratings;
  s.cagr_ecosystem = cagr_ecosystem;
  s.t = t;
  s.ss = 0.5 * cagr_downloads + 0.5 * cagr_ratings - cagr_ecosystem;
  return s;
}

std::optional<SuccessScore> success_score(const AppRecord& old_rec, const AppRecord& new_rec,
                                          const SuccessParams& params) {
  const auto cd = cagr(static_cast<double>(old_rec.downloads),
                       static_cast<double>(new_rec.downloads), params.years);
  const auto cr = cagr(static_cast<double>(old_rec.rating_count),
                       static_cast<double>(new_rec.rating_count), params.years);
  const auto ce = cagr(params.eco_initial, params.eco_final, params.years);
  if (!cd || !cr || !ce) return std::nullopt;
  return success_score_from_rates(*cd, *cr, *ce, params.years);
}

bool ss_identity_holds(const SuccessScore& s) {
  return s.ss == 0.5 * s.cagr_downloads + 0.5 * s.cagr_ratings - s.cagr_ecosystem;
}

MappingOutcome map_outcome(const AppRecord& query, const MatchVerdict& verdict,
                           const Catalog& new_catalog) {
  const bool id_present = new_catalog.contains(query.app_id);
  if (verdict) {
    if (verdict->app_id == query.app_id) return MappingOutcome::MatchSameId;
    return id_present ? MappingOutcome::MatchDiffId_OldIdPresent
                      : MappingOutcome::MatchDiffId_OldIdAbsent;
  }
  return id_present ? MappingOutcome::NoMatch_IdPresent : MappingOutcome::NoMatch_IdAbsent;
}

bool classify_rebirth(const AppRecord& query, const MatchVerdict& verdict,
                      const Catalog& new_catalog) {
  if (!verdict || verdict->app_id == query.app_id) return false;
  const AppRecord* matched = new_catalog.find(verdict->app_id);
  if (!matched) throw DataError("matched app '" + verdict->app_id + "' not in new catalog");
  return std::chrono::sys_days{matched->release_date} >
         std::chrono::sys_days{query.last_update_date};
}

void validate(const TaxonomyThresholds& t) {
  for (double v : {t.name, t.icon, t.desc_hi, t.desc_lo, t.transfer, t.dev_sim}) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("taxonomy thresholds must lie in [0,1]");
  }
  if (t.desc_lo > t.desc_hi) throw DataError("desc_lo must not exceed desc_hi");
}

MetamorphosisLabel classify_rebrand_repurpose(const IdentitySimilarity& sim,
                                              const TaxonomyThresholds& t) {
  if (!(sim.name < t.name && sim.icon < t.icon)) return MetamorphosisLabel::Unclassified;
  if (sim.desc > t.desc_hi) return MetamorphosisLabel::ReBrand;
  if (sim.desc >= t.desc_lo) return MetamorphosisLabel::RePurpose;
  return MetamorphosisLabel::Unclassified;  // too dissimilar to be trusted
}

IdentitySimilarity identity_similarity(const AppRecord& old_rec, const AppRecord& new_rec,
                                       const TfIdfModel& tfidf, const EmbeddingSet& icon_old,
                                       const EmbeddingSet& icon_new, const EmbeddingSet& desc_old,
                                       const EmbeddingSet& desc_new) {
  auto need = [](const EmbeddingSet& set, const std::string& id) {
    auto row = set.find_row(id);
    if (!row) {
      throw DataError("no " + std::string(modality_name(set.modality())) + " embedding for '" +
                      id + "'");
    }
    return *row;
  };
  IdentitySimilarity s;
  s.name = cosine(transform(tfidf, old_rec.app_name), transform(tfidf, new_rec.app_name));
  s.icon = cosine(need(icon_old, old_rec.app_id), need(icon_new, new_rec.app_id));
  s.desc = cosine(need(desc_old, old_rec.app_id), need(desc_new, new_rec.app_id));
  return s;
}

LabelSet classify_field_changes(const AppRecord& old_rec, const AppRecord& new_rec) {
  LabelSet out;
  if (fold(old_rec.genre) != fold(new_rec.genre)) out.insert(MetamorphosisLabel::GenreChange);
  if (fold(old_rec.content_rating) != fold(new_rec.content_rating)) {
    out.insert(MetamorphosisLabel::ContentRatingChange);
  }
  if (old_rec.price > 0.0 && new_rec.price == 0.0) out.insert(MetamorphosisLabel::PaidToFree);
  return out;
}

double text_similarity(const TfIdfModel& tfidf, std::string_view a, std::string_view b) {
  const SparseVector va = transform(tfidf, a);
  const SparseVector vb = transform(tfidf, b);
  if (!va.indices.empty() && !vb.indices.empty()) return cosine(va, vb);
  const std::string na = normalize_text(a);
  return !na.empty() && na == normalize_text(b) ? 1.0 : 0.0;
}

bool classify_transfer(const AppRecord& old_rec, const AppRecord& new_rec, const TfIdfModel& tfidf,
                       double threshold) {
  double sum = 0.0;
  int fields = 0;
  auto field = [&](std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return;
    sum += text_similarity(tfidf, a, b);
    ++fields;
  };
  field(old_rec.developer_name, new_rec.developer_name);
  field(old_rec.developer_email.value_or(""), new_rec.developer_email.value_or(""));
  field(old_rec.developer_website.value_or(""), new_rec.developer_website.value_or(""));
  if (fields == 0) return false;
  return sum / fields < threshold;
}

namespace {

bool is_roman(std::string_view t) {
  static const std::set<std::string_view> kRoman = {
      "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi", "xii", "xiii",
      "xiv", "xv", "xvi", "xvii", "xviii", "xix", "xx"};
  return kRoman.count(t) != 0;
}

bool all_digits(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_version_token(std::string_view t) {
  if (all_digits(t) || is_roman(t)) return true;
  return t.size() >= 2 && t[0] == 'v' && all_digits(t.substr(1));
}

std::string join(const std::vector<std::string>& words, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s.push_back(' ');
    s += words[i];
  }
  return s;
}

// Dominant non-Latin script of a UTF-8 string, as a language-ish tag.
std::string script_tag(std::string_view s) {
  std::map<std::string, int> votes;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6 && i + 1 < s.size()) {
      cp = ((c & 0x1f) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3f);
      len = 2;
    } else if ((c >> 4) == 0xe && i + 2 < s.size()) {
      cp = ((c & 0x0f) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3f) << 6) |
           (static_cast<unsigned char>(s[i + 2]) & 0x3f);
      len = 3;
    } else if ((c >> 3) == 0x1e && i + 3 < s.size()) {
      len = 4;
    }
    i += len;
    if (cp >= 0x3040 && cp <= 0x30ff) ++votes["ja"];
    else if (cp >= 0xac00 && cp <= 0xd7af) ++votes["ko"];
    else if (cp >= 0x4e00 && cp <= 0x9fff) ++votes["zh"];
    else if (cp >= 0x0400 && cp <= 0x04ff) ++votes["ru"];
    else if (cp >= 0x0600 && cp <= 0x06ff) ++votes["ar"];
    else if (cp >= 0x0e00 && cp <= 0x0e7f) ++votes["th"];
  }
  // Kana marks Japanese even when kanji dominate.
  if (votes.count("ja")) return "ja";
  std::string best;
  int best_n = 0;
  for (const auto& [tag, n] : votes) {
    if (n > best_n) {
      best = tag;
      best_n = n;
    }
  }
  return best;
}

const std::unordered_map<std::string, std::string>& locale_words() {
  static const std::unordered_map<std::string, std::string> kWords = {
      {"english", "en"}, {"en", "en"},        {"japan", "ja"},      {"japanese", "ja"},
      {"jp", "ja"},      {"korea", "ko"},     {"korean", "ko"},     {"kr", "ko"},
      {"china", "zh"},   {"chinese", "zh"},   {"cn", "zh"},         {"tw", "zh-tw"},
      {"taiwan", "zh-tw"}, {"russian", "ru"}, {"ru", "ru"},         {"german", "de"},
      {"deutsch", "de"}, {"de", "de"},        {"french", "fr"},     {"fr", "fr"},
      {"spanish", "es"}, {"es", "es"},        {"brazil", "pt"},     {"brasil", "pt"},
      {"portuguese", "pt"}, {"pt", "pt"},     {"indonesia", "id"},  {"vietnam", "vi"},
      {"thai", "th"},    {"arabic", "ar"},    {"global", "global"}, {"asia", "asia"},
      {"sea", "asia"},   {"na", "na"},        {"row", "row"},       {"eu", "eu"},
  };
  return kWords;
}

}  // namespace

NameVersion split_version(std::string_view app_name) {
  auto words = tokenize(app_name);
  if (words.size() >= 2 && is_version_token(words.back())) {
    return {join(words, words.size() - 1), words.back()};
  }
  return {join(words, words.size()), ""};
}

bool is_progressive_pair(std::string_view name_a, std::string_view name_b) {
  const auto a = split_version(name_a);
  const auto b = split_version(name_b);
  return !a.stem.empty() && a.stem == b.stem && a.version != b.version;
}

std::string locale_tag(const AppRecord& r) {
  if (auto s = script_tag(r.app_name); !s.empty()) return s;
  const auto& words = locale_words();
  for (const auto& w : tokenize(r.app_name)) {
    if (auto it = words.find(w); it != words.end() && w.size() > 2) return it->second;
  }
  const auto dot = r.app_id.rfind('.');
  const std::string_view last =
      std::string_view(r.app_id).substr(dot == std::string::npos ? 0 : dot + 1);
  const auto us = last.rfind('_');
  if (us != std::string_view::npos) {
    if (auto it = words.find(fold(last.substr(us + 1))); it != words.end()) return it->second;
  }
  return {};
}

LabelSet classify_variants(const AppRecord& query, const VotedCandidates& voted,
                           const Catalog& new_catalog, const TfIdfModel& tfidf,
                           double dev_sim_threshold) {
  LabelSet out;
  if (voted.items.size() < 2) return out;
  auto lookup = [&](const std::string& id) -> const AppRecord& {
    const AppRecord* r = new_catalog.find(id);
    if (!r) throw DataError("candidate '" + id + "' not in new catalog");
    return *r;
  };
  const AppRecord& top = lookup(voted.items.front().app_id);
  const std::string top_locale = locale_tag(top);
  for (std::size_t i = 1; i < voted.items.size(); ++i) {
    const AppRecord& other = lookup(voted.items[i].app_id);
    if (text_similarity(tfidf, query.developer_name, other.developer_name) < dev_sim_threshold) {
      continue;
    }
    if (fold(other.content_rating) != fold(top.content_rating) || locale_tag(other) != top_locale) {
      out.insert(MetamorphosisLabel::DemographyVariant);
    }
    if (is_progressive_pair(top.app_name, other.app_name)) {
      out.insert(MetamorphosisLabel::ProgressiveVersion);
    }
  }
  return out;
}

RiskCategoryMap::RiskCategoryMap()
    : RiskCategoryMap(std::vector<std::string>(std::begin(kDefaultTiers), std::end(kDefaultTiers)),
                      {}, "unknown") {}

RiskCategoryMap::RiskCategoryMap(std::vector<std::string> tier_order,
                                 std::map<std::string, std::string> permissions,
                                 std::string default_tier)
    : tiers_(std::move(tier_order)),
      permissions_(std::move(permissions)),
      default_tier_(std::move(default_tier)) {
  if (default_tier_.empty()) throw DataError("risk map: default_tier must be non-empty");
  std::set<std::string> seen;
  for (const auto& t : tiers_) {
    if (!seen.insert(t).second) throw DataError("risk map: tier '" + t + "' listed twice");
  }
  if (!seen.count(default_tier_)) {
    tiers_.push_back(default_tier_);
    seen.insert(default_tier_);
  }
  for (const auto& [perm, tier] : permissions_) {
    if (!seen.count(tier)) {
      throw DataError("risk map: permission '" + perm + "' uses undeclared tier '" + tier + "'");
    }
  }
}

RiskCategoryMap RiskCategoryMap::from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    std::vector<std::string> order;
    if (j.contains("tier_order")) {
      order = j.at("tier_order").get<std::vector<std::string>>();
    } else {
      order.assign(std::begin(kDefaultTiers), std::end(kDefaultTiers));
    }
    std::map<std::string, std::string> perms;
    if (j.contains("permissions")) perms = j.at("permissions").get<std::map<std::string, std::string>>();
    return RiskCategoryMap(std::move(order), std::move(perms),
                           j.value("default_tier", std::string("unknown")));
  } catch (const json::exception& e) {
    throw DataError(std::string("risk map: ") + e.what());
  }
}

RiskCategoryMap RiskCategoryMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const std::string& RiskCategoryMap::tier_of(const std::string& permission) const {
  auto it = permissions_.find(permission);
  return it == permissions_.end() ? default_tier_ : it->second;
}

std::vector<TierDelta> permission_risk_delta(std::span<const RecordPair> cohort,
                                             const RiskCategoryMap& risk) {
  std::map<std::string, TierDelta> by_tier;
  for (const auto& t : risk.tiers()) by_tier[t].tier = t;
  for (const auto& [old_rec, new_rec] : cohort) {
    for (const auto& p : old_rec.permissions) ++by_tier[risk.tier_of(p)].before;
    for (const auto& p : new_rec.permissions) ++by_tier[risk.tier_of(p)].after;
  }
  std::vector<TierDelta> out;
  out.reserve(risk.tiers().size());
  for (const auto& t : risk.tiers()) {
    TierDelta d = by_tier[t];
    if (d.before > 0) {
      d.pct_change = 100.0 * static_cast<double>(d.after - d.before) / static_cast<double>(d.before);
    } else if (d.after > 0) {
      d.new_tier = true;
    } else {
      d.pct_change = 0.0;
    }
    out.push_back(std::move(d));
  }
  return out;
}

QueryClassification classify_query(const AppRecord& query, const MatchVerdict& verdict,
                                   const VotedCandidates* voted, const ClassifyContext& ctx) {
  APPMORPH_CHECK(ctx.new_catalog && ctx.tfidf, "classify_query needs a catalog and a TF-IDF model");
  const Catalog& next = *ctx.new_catalog;
  QueryClassification c;
  c.query_id = query.app_id;
  c.outcome = map_outcome(query, verdict, next);

  const AppRecord* counterpart = nullptr;
  if (verdict) {
    counterpart = next.find(verdict->app_id);
    if (!counterpart) throw DataError("matched app '" + verdict->app_id + "' not in new catalog");
  } else {
    counterpart = next.find(query.app_id);
  }
  const AppRecord* same_id = next.find(query.app_id);

  auto rebrand_check = [&] {
    if (!ctx.icon_old || !ctx.icon_new || !ctx.desc_old || !ctx.desc_new) {
      throw DataError("re-brand rules need icon-content and description embeddings for both sides");
    }
    const auto sim = identity_similarity(query, *same_id, *ctx.tfidf, *ctx.icon_old, *ctx.icon_new,
                                         *ctx.desc_old, *ctx.desc_new);
    const auto label = classify_rebrand_repurpose(sim, ctx.thresholds);
    if (label != MetamorphosisLabel::Unclassified) c.labels.insert(label);
  };

  switch (c.outcome) {
    case MappingOutcome::MatchSameId: {
      c.labels.merge(classify_field_changes(query, *counterpart));
      if (classify_transfer(query, *counterpart, *ctx.tfidf, ctx.thresholds.transfer)) {
        c.labels.insert(MetamorphosisLabel::Transferred);
      }
      break;
    }
    case MappingOutcome::MatchDiffId_OldIdPresent:
      if (classify_rebirth(query, verdict, next)) c.labels.insert(MetamorphosisLabel::ReBirth);
      rebrand_check();
      break;
    case MappingOutcome::MatchDiffId_OldIdAbsent:
      if (classify_rebirth(query, verdict, next)) c.labels.insert(MetamorphosisLabel::ReBirth);
      break;
    case MappingOutcome::NoMatch_IdPresent:
      rebrand_check();
      break;
    case MappingOutcome::NoMatch_IdAbsent:
      c.labels.insert(MetamorphosisLabel::Discontinued);
      break;
  }
  if (verdict && voted) {
    c.labels.merge(classify_variants(query, *voted, next, *ctx.tfidf, ctx.thresholds.dev_sim));
  }
  if (c.labels.empty()) c.labels.insert(MetamorphosisLabel::Unclassified);

  if (counterpart) {
    c.counterpart_id = counterpart->app_id;
    c.success = success_score(query, *counterpart, ctx.success);
    if (c.success) APPMORPH_CHECK(ss_identity_holds(*c.success), "success score identity");
  }
  return c;
}

std::string to_json_line(const QueryClassification& c) {
  json j;
  j["query_id"] = c.query_id;
  j["outcome"] = outcome_name(c.outcome);
  j["labels"] = json::array();
  for (auto l : c.labels) j["labels"].push_back(label_name(l));
  if (c.counterpart_id) j["counterpart_id"] = *c.counterpart_id;
  if (c.success) {
    j["ss"] = c.success->ss;
    j["cagr_downloads"] = c.success->cagr_downloads;
    j["cagr_ratings"] = c.success->cagr_ratings;
    j["cagr_ecosystem"] = c.success->cagr_ecosystem;
    j["t"] = c.success->t;
  }
  return j.dump();
}

QueryClassification classification_from_json(std::string_view line) {
  try {
    const auto j = json::parse(line);
    QueryClassification c;
    c.query_id = j.at("query_id").get<std::string>();
    c.outcome = parse_outcome(j.at("outcome").get<std::string>());
    for (const auto& l : j.at("labels")) c.labels.insert(parse_label(l.get<std::string>()));
    if (j.contains("counterpart_id")) c.counterpart_id = j.at("counterpart_id").get<std::string>();
    if (j.contains("ss")) {
      c.success = success_score_from_rates(
          j.at("cagr_downloads").get<double>(), j.at("cagr_ratings").get<double>(),
          j.at("cagr_ecosystem").get<double>(), j.value("t", 5.0));
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("classification record: ") + e.what());
  }
}

std::map<std::string, std::size_t> outcome_census(std::span<const QueryClassification> rows) {
  std::map<std::string, std::size_t> census;
  for (auto o : kAllOutcomes) census[std::string(outcome_name(o))] = 0;
  for (const auto& r : rows) ++census[std::string(outcome_name(r.outcome))];
  return census;
}

std::string success_cdf_csv(std::span<const QueryClassification> rows) {
  std::map<MetamorphosisLabel, std::vector<double>> by_label;
  for (const auto& r : rows) {
    if (!r.success) continue;
    for (auto l : r.labels) by_label[l].push_back(r.success->ss);
  }
  std::ostringstream out;
  out.precision(17);
  out << "label,ss\n";
  for (auto& [label, values] : by_label) {
    std::sort(values.begin(), values.end());
    for (double v : values) out << label_name(label) << ',' << v << '\n';
  }
  return out.str();
}

}  // namespace appmorph
