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
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"
#include "appmorph/taxonomy.hpp"
#include "taxonomy_cases.hpp"
#include "test_support.hpp"

using namespace appmorph;
using testing_support::record;
using L = MetamorphosisLabel;

namespace {

Catalog catalog_of(std::vector<AppRecord> recs) { return Catalog("new", std::move(recs)); }

// Plain exponentiation, kept apart from the library's cagr.
double hand_cagr(double a, double b, double t) { return std::exp(std::log(b / a) / t) - 1.0; }

}  // namespace

TEST(Names, RoundTrip) {
  for (int i = 0; i <= static_cast<int>(L::Unclassified); ++i) {
    const auto l = static_cast<L>(i);
    EXPECT_EQ(parse_label(label_name(l)), l);
  }
  EXPECT_EQ(outcome_name(MappingOutcome::NoMatch_IdAbsent), "no_match_id_absent");
  EXPECT_THROW(parse_label("rebrnad"), DataError);
}

TEST(Cagr, Examples) {
  EXPECT_DOUBLE_EQ(*cagr(123.0, 123.0, 3.0), 0.0);
  EXPECT_NEAR(*cagr(2.3e9, 3.6e9, 5.0), 0.0937, 5e-4);
  EXPECT_NEAR(*cagr(2.3e9, 3.6e9, 5.0), hand_cagr(2.3e9, 3.6e9, 5.0), 1e-12);
  EXPECT_DOUBLE_EQ(*cagr(100.0, 0.0, 5.0), -1.0);
  EXPECT_FALSE(cagr(0.0, 10.0, 5.0));
  EXPECT_THROW(cagr(1.0, 2.0, 0.0), InvariantError);
  EXPECT_THROW(cagr(1.0, -2.0, 1.0), InvariantError);
}

TEST(Cagr, IncreasingAndComposes) {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const double a = 1.0 + rng.uniform01() * 1e6;
    const double b = rng.uniform01() * 1e6;
    const double c = 1.0 + rng.uniform01() * 1e6;
    const double t1 = 0.5 + rng.uniform01() * 9.0;
    const double t2 = 0.5 + rng.uniform01() * 9.0;
    EXPECT_LT(*cagr(a, b, t1), *cagr(a, b * 1.01 + 1.0, t1));
    if (b <= 0.0) continue;
    const double composed = std::pow(1.0 + *cagr(a, b, t1), t1) * std::pow(1.0 + *cagr(b, c, t2), t2);
    EXPECT_NEAR(composed / (c / a), 1.0, 1e-9);
  }
}

TEST(SuccessScore, Examples) {
  const double eco = *cagr(2.3e9, 3.6e9, 5.0);
  EXPECT_NEAR(success_score_from_rates(eco, eco, eco, 5.0).ss, 0.0, 1e-15);

  const auto s = success_score_from_rates(0.202, -0.003, eco, 5.0);
  EXPECT_NEAR(s.ss, 0.0058, 5e-4);
  EXPECT_NEAR(s.ss, 0.007, 0.002);

  AppRecord a = record("a");
  AppRecord b = record("a", 2023);
  b.downloads = 2 * a.downloads;
  b.rating_count = 2 * a.rating_count;
  const auto d = success_score(a, b);
  ASSERT_TRUE(d);
  EXPECT_NEAR(d->ss, 0.0550, 5e-4);
  EXPECT_NEAR(d->ss, std::pow(2.0, 0.2) - 1.0 - hand_cagr(2.3e9, 3.6e9, 5.0), 1e-12);
  EXPECT_TRUE(ss_identity_holds(*d));

  a.downloads = 0;
  EXPECT_FALSE(success_score(a, b));
}

TEST(SuccessScore, IdentityAlwaysHolds) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    AppRecord a = record("a");
    AppRecord b = record("a", 2023);
    a.downloads = 1 + static_cast<std::int64_t>(rng.uniform(1'000'000));
    b.downloads = static_cast<std::int64_t>(rng.uniform(1'000'000));
    a.rating_count = 1 + static_cast<std::int64_t>(rng.uniform(10'000));
    b.rating_count = static_cast<std::int64_t>(rng.uniform(10'000));
    SuccessParams p;
    p.years = 1.0 + rng.uniform01() * 10.0;
    const auto s = success_score(a, b, p);
    ASSERT_TRUE(s);
    EXPECT_TRUE(ss_identity_holds(*s));
    EXPECT_EQ(s->t, p.years);
  }
}

TEST(MapOutcome, Regions) {
  const Catalog next = catalog_of({record("same", 2023), record("other", 2023)});
  EXPECT_EQ(map_outcome(record("same"), Match{"same"}, next), MappingOutcome::MatchSameId);
  EXPECT_EQ(map_outcome(record("same"), Match{"other"}, next), MappingOutcome::MatchDiffId_OldIdPresent);
  EXPECT_EQ(map_outcome(record("gone"), Match{"other"}, next), MappingOutcome::MatchDiffId_OldIdAbsent);
  EXPECT_EQ(map_outcome(record("same"), std::nullopt, next), MappingOutcome::NoMatch_IdPresent);
  EXPECT_EQ(map_outcome(record("gone"), std::nullopt, next), MappingOutcome::NoMatch_IdAbsent);
}

TEST(Rebirth, DateOrder) {
  AppRecord q = record("q");
  q.last_update_date = parse_date("2018-02-01");
  AppRecord later = record("later", 2023);
  later.release_date = parse_date("2020-01-01");
  AppRecord earlier = record("earlier", 2023);
  earlier.release_date = parse_date("2017-06-01");
  AppRecord same = record("q", 2023);
  same.release_date = parse_date("2022-01-01");
  const Catalog next = catalog_of({later, earlier, same});
  EXPECT_TRUE(classify_rebirth(q, Match{"later"}, next));
  EXPECT_FALSE(classify_rebirth(q, Match{"earlier"}, next));
  EXPECT_FALSE(classify_rebirth(q, Match{"q"}, next));
  EXPECT_FALSE(classify_rebirth(q, std::nullopt, next));
}

TEST(RebrandRepurpose, Bands) {
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.5, 0.8}), L::ReBrand);
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.5, 0.3}), L::RePurpose);
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.5, 0.1}), L::Unclassified);
}

TEST(RebrandRepurpose, Boundaries) {
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.5, 0.4}), L::RePurpose);
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.5, std::nextafter(0.4, 1.0)}), L::ReBrand);
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.5, 0.2}), L::RePurpose);
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.5, std::nextafter(0.2, 0.0)}), L::Unclassified);
  EXPECT_EQ(classify_rebrand_repurpose({0.7, 0.5, 0.8}), L::Unclassified);
  EXPECT_EQ(classify_rebrand_repurpose({0.3, 0.7, 0.8}), L::Unclassified);
}

TEST(RebrandRepurpose, ExclusiveAndTotal) {
  Rng rng(8);
  for (int i = 0; i < 5000; ++i) {
    const IdentitySimilarity s{rng.uniform01(), rng.uniform01(), rng.uniform01() * 2.0 - 1.0};
    const L got = classify_rebrand_repurpose(s);
    const bool gate = s.name < 0.7 && s.icon < 0.7;
    EXPECT_EQ(got == L::ReBrand, gate && s.desc > 0.4);
    EXPECT_EQ(got == L::RePurpose, gate && s.desc >= 0.2 && s.desc <= 0.4);
  }
}

TEST(Thresholds, Validate) {
  TaxonomyThresholds t;
  EXPECT_NO_THROW(validate(t));
  t.desc_lo = 0.5;
  EXPECT_THROW(validate(t), DataError);
  t = {};
  t.name = 1.5;
  EXPECT_THROW(validate(t), DataError);
}

TEST(FieldChanges, Examples) {
  AppRecord a = record("a");
  AppRecord b = record("a", 2023);
  EXPECT_TRUE(classify_field_changes(a, b).empty());
  a.genre = "Casual";
  b.genre = "Simulation";
  EXPECT_EQ(classify_field_changes(a, b), LabelSet{L::GenreChange});
  b.genre = "casual";
  EXPECT_TRUE(classify_field_changes(a, b).empty());
  a.price = 6.99;
  b.price = 0.0;
  EXPECT_EQ(classify_field_changes(a, b), LabelSet{L::PaidToFree});
  b.price = 0.99;
  b.content_rating = "Mature";
  EXPECT_EQ(classify_field_changes(a, b), LabelSet{L::ContentRatingChange});
}

TEST(Transfer, Examples) {
  AppRecord a = record("a");
  AppRecord b = record("a", 2023);
  a.developer_name = b.developer_name = "Rovio Entertainment";
  b.developer_website = "https://rovio.example";
  const std::vector<std::string> corpus = {"Rovio Entertainment", "Supercell Oy",
                                           "https://rovio.example", "https://supercell.test"};
  const TfIdfModel m = fit_tfidf(corpus);
  EXPECT_FALSE(classify_transfer(a, b, m));
  b.developer_name = "Supercell Oy";
  EXPECT_TRUE(classify_transfer(a, b, m));
  AppRecord none_a = a;
  none_a.developer_name.clear();
  EXPECT_FALSE(classify_transfer(none_a, b, m));
}

// Name similarity near 0.9, email absent on one side, website disjoint.
TEST(Transfer, MeanOfAvailableFields) {
  const std::vector<std::string> corpus = {
      "north star games studio ltd", "north star games studio ltd intl", "nsg.example",
      "acquirer.test", "filler one", "filler two", "filler three"};
  const TfIdfModel m = fit_tfidf(corpus, 1000, 1);
  AppRecord a = record("a");
  AppRecord b = record("a", 2023);
  a.developer_name = corpus[0];
  b.developer_name = corpus[1];
  a.developer_email = "owner@nsg.example";
  a.developer_website = corpus[2];
  b.developer_website = corpus[3];
  const double name_sim = text_similarity(m, a.developer_name, b.developer_name);
  const double site_sim = text_similarity(m, *a.developer_website, *b.developer_website);
  EXPECT_NEAR(name_sim, 0.9, 0.05);
  EXPECT_DOUBLE_EQ(site_sim, 0.0);
  EXPECT_TRUE(classify_transfer(a, b, m));
  b.developer_website = corpus[2];
  EXPECT_FALSE(classify_transfer(a, b, m));
}

TEST(TextSimilarity, FallsBackToNormalizedEquality) {
  const std::vector<std::string> corpus = {"alpha", "beta"};
  const TfIdfModel m = fit_tfidf(corpus);
  EXPECT_DOUBLE_EQ(text_similarity(m, "Zeta Labs", "zeta  labs"), 1.0);
  EXPECT_DOUBLE_EQ(text_similarity(m, "Zeta Labs", "Omega"), 0.0);
  EXPECT_DOUBLE_EQ(text_similarity(m, "", ""), 0.0);
  EXPECT_NEAR(text_similarity(m, "Alpha", "alpha"), 1.0, 1e-12);
}

TEST(Versions, Split) {
  EXPECT_EQ(split_version("Cut the Rope 2").version, "2");
  EXPECT_EQ(split_version("Cut the Rope 2").stem, "cut the rope");
  EXPECT_EQ(split_version("Hero Run III").version, "iii");
  EXPECT_EQ(split_version("Tank v2").version, "v2");
  EXPECT_EQ(split_version("2048").version, "");
  EXPECT_EQ(split_version("Final Fantasy").version, "");
  EXPECT_TRUE(is_progressive_pair("Cut the Rope", "Cut the Rope 2"));
  EXPECT_TRUE(is_progressive_pair("Hero Run II", "Hero Run III"));
  EXPECT_FALSE(is_progressive_pair("Angry Birds", "Angry Birds"));
  EXPECT_FALSE(is_progressive_pair("Angry Birds", "Bad Piggies 2"));
}

TEST(Locale, Tags) {
  AppRecord r = record("com.game.quest");
  r.app_name = "Puzzle Quest";
  EXPECT_EQ(locale_tag(r), "");
  r.app_name = "\xE3\x83\x91\xE3\x82\xBA\xE3\x83\xAB Quest";
  EXPECT_EQ(locale_tag(r), "ja");
  r.app_name = "\xED\x8D\xBC\xEC\xA6\x90";
  EXPECT_EQ(locale_tag(r), "ko");
  r.app_name = "Puzzle Quest Japan";
  EXPECT_EQ(locale_tag(r), "ja");
  r.app_name = "Puzzle Quest";
  r.app_id = "com.game.quest_kr";
  EXPECT_EQ(locale_tag(r), "ko");
}

TEST(Variants, Examples) {
  AppRecord q = record("q");
  q.developer_name = "ZeptoLab";
  AppRecord top = record("rope", 2023);
  top.app_name = "Cut the Rope";
  top.developer_name = "ZeptoLab";
  AppRecord two = record("rope2", 2023);
  two.app_name = "Cut the Rope 2";
  two.developer_name = "ZeptoLab";
  AppRecord mature = record("rope_m", 2023);
  mature.app_name = "Cut the Rope";
  mature.developer_name = "zeptolab";
  mature.content_rating = "Mature";
  AppRecord stranger = record("other", 2023);
  stranger.app_name = "Cut the Rope 3";
  stranger.developer_name = "Copycat";
  stranger.content_rating = "Mature";
  const Catalog next = catalog_of({top, two, mature, stranger});
  const std::vector<std::string> corpus = {"ZeptoLab", "Copycat"};
  const TfIdfModel m = fit_tfidf(corpus);
  auto voted = [](std::vector<std::string> ids) {
    VotedCandidates v;
    for (std::size_t i = 0; i < ids.size(); ++i) v.items.push_back({ids[i], 3, false, i + 1});
    return v;
  };
  EXPECT_EQ(classify_variants(q, voted({"rope", "rope2"}), next, m), LabelSet{L::ProgressiveVersion});
  EXPECT_EQ(classify_variants(q, voted({"rope", "rope_m"}), next, m), LabelSet{L::DemographyVariant});
  EXPECT_TRUE(classify_variants(q, voted({"rope", "other"}), next, m).empty());
  EXPECT_TRUE(classify_variants(q, voted({"rope"}), next, m).empty());
  EXPECT_THROW(classify_variants(q, voted({"rope", "ghost"}), next, m), DataError);
}

TEST(RiskMap, Loading) {
  const RiskCategoryMap def;
  EXPECT_EQ(def.tiers().size(), 7u);
  EXPECT_EQ(def.tier_of("android.permission.CAMERA"), "unknown");
  const auto m = RiskCategoryMap::from_json(
      R"({"tier_order":["low","high"],"permissions":{"p1":"high"},"default_tier":"low"})");
  EXPECT_EQ(m.tiers(), (std::vector<std::string>{"low", "high"}));
  EXPECT_EQ(m.tier_of("p1"), "high");
  EXPECT_EQ(m.tier_of("p9"), "low");
  EXPECT_THROW(RiskCategoryMap::from_json(R"({"tier_order":["low"],"permissions":{"p":"mid"}})"),
               DataError);
  EXPECT_THROW(RiskCategoryMap::from_json("{"), DataError);
}

TEST(PermissionDelta, Examples) {
  const RiskCategoryMap risk({"normal", "high", "critical"},
                             {{"p1", "high"}, {"p2", "high"}, {"c1", "critical"}, {"c2", "critical"},
                              {"c3", "critical"}, {"n1", "normal"}});
  AppRecord a = record("a");
  AppRecord b = record("a", 2023);
  a.permissions = {"p1", "n1"};
  b.permissions = {"p1", "p2", "n1", "c1", "c2", "c3"};
  const std::vector<RecordPair> cohort{{a, b}};
  const auto d = permission_risk_delta(cohort, risk);
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d[0].tier, "normal");
  EXPECT_EQ(*d[0].pct_change, 0.0);
  EXPECT_EQ(d[1].before, 1);
  EXPECT_EQ(d[1].after, 2);
  EXPECT_DOUBLE_EQ(*d[1].pct_change, 100.0);
  EXPECT_EQ(d[2].after, 3);
  EXPECT_FALSE(d[2].pct_change);
  EXPECT_TRUE(d[2].new_tier);
  EXPECT_EQ(d[3].tier, "unknown");
  EXPECT_EQ(*d[3].pct_change, 0.0);
  EXPECT_FALSE(d[3].new_tier);
}

TEST(PermissionDelta, ConservesTotals) {
  const RiskCategoryMap risk({"low", "high"}, {{"p0", "low"}, {"p1", "high"}, {"p2", "high"}});
  Rng rng(12);
  std::vector<RecordPair> cohort;
  std::int64_t old_total = 0, new_total = 0;
  for (int i = 0; i < 200; ++i) {
    AppRecord a = record("a" + std::to_string(i));
    AppRecord b = a;
    for (int p = 0; p < 6; ++p) {
      if (rng.uniform(2)) a.permissions.insert("p" + std::to_string(p));
      if (rng.uniform(2)) b.permissions.insert("p" + std::to_string(p));
    }
    old_total += static_cast<std::int64_t>(a.permissions.size());
    new_total += static_cast<std::int64_t>(b.permissions.size());
    cohort.emplace_back(a, b);
  }
  std::int64_t before = 0, after = 0;
  for (const auto& d : permission_risk_delta(cohort, risk)) {
    before += d.before;
    after += d.after;
  }
  EXPECT_EQ(before, old_total);
  EXPECT_EQ(after, new_total);
}

class HandCases : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { fx = new taxonomy_cases::Fixture(taxonomy_cases::make()); }
  static void TearDownTestSuite() { delete fx; }
  static taxonomy_cases::Fixture* fx;
};

taxonomy_cases::Fixture* HandCases::fx = nullptr;

TEST_F(HandCases, EveryCaseClassifiedAsLabelled) {
  ASSERT_EQ(fx->cases.size(), 30u);
  for (const auto& c : fx->cases) {
    const auto got = classify_query(c.query, c.verdict, c.voted ? &*c.voted : nullptr, fx->context());
    EXPECT_EQ(got.outcome, c.outcome) << c.query.app_id;
    EXPECT_EQ(got.labels, c.labels) << c.query.app_id << " got " << to_json_line(got);
    if (got.success) {
      EXPECT_TRUE(ss_identity_holds(*got.success));
    }
  }
}

TEST_F(HandCases, CoversEveryOutcomeAndLabel) {
  std::set<MappingOutcome> outcomes;
  std::set<L> labels;
  for (const auto& c : fx->cases) {
    outcomes.insert(c.outcome);
    labels.insert(c.labels.begin(), c.labels.end());
  }
  EXPECT_EQ(outcomes.size(), kAllOutcomes.size());
  EXPECT_EQ(labels.size(), static_cast<std::size_t>(L::Unclassified) + 1);
}

TEST_F(HandCases, LabelsRespectOutcomes) {
  using O = MappingOutcome;
  for (const auto& c : fx->cases) {
    const auto got = classify_query(c.query, c.verdict, c.voted ? &*c.voted : nullptr, fx->context());
    const O o = got.outcome;
    if (got.labels.count(L::ReBirth)) {
      EXPECT_TRUE(o == O::MatchDiffId_OldIdAbsent || o == O::MatchDiffId_OldIdPresent);
    }
    if (got.labels.count(L::ReBrand) || got.labels.count(L::RePurpose)) {
      EXPECT_TRUE(o == O::NoMatch_IdPresent || o == O::MatchDiffId_OldIdPresent);
      EXPECT_FALSE(got.labels.count(L::ReBrand) && got.labels.count(L::RePurpose));
    }
    EXPECT_EQ(got.labels.count(L::Discontinued) == 1, o == O::NoMatch_IdAbsent);
    EXPECT_EQ(got.counterpart_id.has_value(), o != O::NoMatch_IdAbsent);
  }
}

TEST_F(HandCases, JsonRoundTripAndReports) {
  std::vector<QueryClassification> rows;
  for (const auto& c : fx->cases) {
    rows.push_back(classify_query(c.query, c.verdict, c.voted ? &*c.voted : nullptr, fx->context()));
    const std::string line = to_json_line(rows.back());
    EXPECT_EQ(to_json_line(classification_from_json(line)), line);
  }
  const auto census = outcome_census(rows);
  EXPECT_EQ(census.size(), 5u);
  EXPECT_EQ(census.at("match_same_id"), 15u);
  EXPECT_EQ(census.at("no_match_id_present"), 7u);
  EXPECT_EQ(census.at("no_match_id_absent"), 2u);
  const std::string csv = success_cdf_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "label,ss");
  std::string prev_label;
  double prev = -1e300;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const std::string label = line.substr(0, comma);
    const double v = std::stod(line.substr(comma + 1));
    if (label == prev_label) {
      EXPECT_LE(prev, v);
    }
    prev_label = label;
    prev = v;
    ++n;
  }
  EXPECT_GT(n, 0u);
}

TEST_F(HandCases, MissingEmbeddingsAreDataErrors) {
  ClassifyContext ctx = fx->context();
  ctx.icon_old = nullptr;
  const auto& rebrand = fx->cases[15];
  ASSERT_EQ(rebrand.outcome, MappingOutcome::NoMatch_IdPresent);
  EXPECT_THROW(classify_query(rebrand.query, rebrand.verdict, nullptr, ctx), DataError);
  EmbeddingSet empty(ModalityKind::IconContent, 2);
  ctx = fx->context();
  ctx.icon_new = &empty;
  EXPECT_THROW(classify_query(rebrand.query, rebrand.verdict, nullptr, ctx), DataError);
}
