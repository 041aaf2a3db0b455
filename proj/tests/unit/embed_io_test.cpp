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

#include <algorithm>
#include <cmath>
#include <cstring>

#include "appmorph/embed_io.hpp"
#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"
#include "test_support.hpp"

using namespace appmorph;
using testing_support::record;
using testing_support::TempDir;

namespace {

EmbeddingSet sample(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingSet set(ModalityKind::Description, dim);
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : row) x = static_cast<float>(rng.normal());
    set.add("app." + std::to_string(i), row);
  }
  return set;
}

Catalog numbered(const std::string& prefix, std::size_t n, int year) {
  std::vector<AppRecord> recs;
  for (std::size_t i = 0; i < n; ++i) recs.push_back(record(prefix + std::to_string(i), year));
  return Catalog("c", recs);
}

}  // namespace

TEST(Modality, NamesAndTags) {
  for (auto m : kAllModalities) {
    EXPECT_EQ(parse_modality(modality_name(m)), m);
    EXPECT_EQ(modality_from_tag(static_cast<std::uint8_t>(m)), m);
  }
  EXPECT_EQ(static_cast<int>(ModalityKind::IconContent), 0);
  EXPECT_EQ(static_cast<int>(ModalityKind::DeveloperName), 4);
  EXPECT_EQ(default_dim(ModalityKind::Description), 768u);
  EXPECT_EQ(default_dim(ModalityKind::AppName), 4096u);
  EXPECT_THROW(parse_modality("audio"), DataError);
  EXPECT_THROW(modality_from_tag(5), DataError);
}

TEST(Dot, MatchesNaiveSum) {
  Rng rng(1);
  for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 512u}) {
    std::vector<float> a(n), b(n);
    double naive = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<float>(rng.normal());
      b[i] = static_cast<float>(rng.normal());
      naive += static_cast<double>(a[i]) * b[i];
    }
    EXPECT_NEAR(dot(a, b), naive, 1e-4 * std::max(1.0, std::abs(naive))) << n;
  }
}

TEST(EmbeddingSet, AddRejectsBadRows) {
  EmbeddingSet set(ModalityKind::IconStyle, 3);
  const std::vector<float> ok{1, 2, 3}, short_row{1, 2};
  set.add("a", ok);
  EXPECT_THROW(set.add("a", ok), DataError);
  EXPECT_THROW(set.add("b", short_row), DataError);
  EXPECT_EQ(set.size(), 1u);
  EXPECT_EQ(set.find("a"), 0u);
  EXPECT_FALSE(set.find("b"));
}

TEST(Emb1, RoundTripIsBitExact) {
  const EmbeddingSet set = sample(3, 4, 7);
  const EmbeddingSet back = decode_embeddings(encode_embeddings(set));
  EXPECT_EQ(back, set);
  EXPECT_EQ(std::memcmp(back.data().data(), set.data().data(), set.data().size() * sizeof(float)), 0);
  TempDir dir("emb");
  write_embeddings(set, dir / "x.emb1");
  EXPECT_EQ(read_embeddings(dir / "x.emb1"), set);
}

TEST(Emb1, RoundTripProperty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const EmbeddingSet set = sample(rng.uniform(30), 1 + rng.uniform(40), seed);
    const std::string bytes = encode_embeddings(set);
    EXPECT_EQ(decode_embeddings(bytes), set);
    EXPECT_EQ(encode_embeddings(decode_embeddings(bytes)), bytes);
  }
}

TEST(Emb1, HeaderLayout) {
  const EmbeddingSet set = sample(2, 3, 1);
  const std::string b = encode_embeddings(set);
  EXPECT_EQ(b.substr(0, 4), "EMB1");
  EXPECT_EQ(static_cast<std::uint8_t>(b[4]), static_cast<std::uint8_t>(ModalityKind::Description));
  EXPECT_EQ(static_cast<std::uint8_t>(b[5]), 3);  // dim, little-endian u32
  EXPECT_EQ(static_cast<std::uint8_t>(b[9]), 2);  // count, little-endian u64
  EXPECT_EQ(b.size(), 4u + 1 + 4 + 8 + 2 * (2 + 5 + 3 * 4));
}

TEST(Emb1, EmptySet) {
  const EmbeddingSet set(ModalityKind::AppName, 16);
  const EmbeddingSet back = decode_embeddings(encode_embeddings(set));
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(back.dim(), 16u);
  EXPECT_EQ(back.modality(), ModalityKind::AppName);
}

TEST(Emb1, TruncatedPayload) {
  // Header claims 5 rows but carries 4.
  std::string b = encode_embeddings(sample(4, 4, 2));
  b[9] = 5;
  try {
    decode_embeddings(b);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos) << e.what();
  }
  std::string cut = encode_embeddings(sample(4, 4, 2));
  cut.pop_back();
  EXPECT_THROW(decode_embeddings(cut), DataError);
}

TEST(Emb1, BadMagicTrailingBytesDuplicates) {
  std::string b = encode_embeddings(sample(2, 2, 3));
  std::string magic = b;
  magic[0] = 'X';
  EXPECT_THROW(decode_embeddings(magic), DataError);
  EXPECT_THROW(decode_embeddings(b + "zz"), DataError);
  EXPECT_THROW(decode_embeddings("EM"), DataError);
  // Rename row 1 to row 0's id.
  const auto pos = b.rfind("app.1");
  b.replace(pos, 5, "app.0");
  EXPECT_THROW(decode_embeddings(b), DataError);
}

TEST(Emb1, JsonlFixtureForm) {
  TempDir dir("emb");
  testing_support::spit(dir / "f.jsonl", "{\"app_id\":\"a\",\"vec\":[1,0,0]}\n\n{\"app_id\":\"b\",\"vec\":[0,1,0]}\n");
  const EmbeddingSet set = read_embeddings_jsonl(dir / "f.jsonl", ModalityKind::IconContent);
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.dim(), 3u);
  testing_support::spit(dir / "g.jsonl", "{\"app_id\":\"a\",\"vec\":[1,0,0]}\n{\"app_id\":\"b\",\"vec\":[0,1]}\n");
  EXPECT_THROW(read_embeddings_jsonl(dir / "g.jsonl", ModalityKind::IconContent), DataError);
}

TEST(Normalize, ThreeFourFive) {
  EmbeddingSet set(ModalityKind::IconContent, 2);
  set.add("a", std::vector<float>{3, 4});
  set.add("z", std::vector<float>{0, 0});
  std::vector<std::string> zeros;
  const EmbeddingSet n = normalize(set, &zeros);
  EXPECT_NEAR(n.row(0)[0], 0.6f, 1e-7);
  EXPECT_NEAR(n.row(0)[1], 0.8f, 1e-7);
  EXPECT_EQ(n.row(1)[0], 0.0f);
  EXPECT_EQ(zeros, std::vector<std::string>{"z"});
}

TEST(Normalize, Idempotent) {
  const EmbeddingSet once = normalize(sample(50, 16, 4));
  const EmbeddingSet twice = normalize(once);
  for (std::size_t i = 0; i < once.size(); ++i) {
    double sq = 0;
    for (std::size_t d = 0; d < 16; ++d) {
      EXPECT_NEAR(twice.row(i)[d], once.row(i)[d], 1e-6);
      sq += once.row(i)[d] * once.row(i)[d];
    }
    EXPECT_NEAR(sq, 1.0, 1e-5);
  }
}

TEST(Subset, OrderAndMissing) {
  const EmbeddingSet set = sample(5, 3, 5);
  const std::vector<std::string> ids{"app.3", "app.0"};
  const EmbeddingSet s = subset(set, ids);
  EXPECT_EQ(s.ids(), ids);
  EXPECT_TRUE(std::equal(s.row(0).begin(), s.row(0).end(), set.row(3).begin()));
  const std::vector<std::string> missing{"nope"};
  EXPECT_THROW(subset(set, missing), DataError);
}

TEST(Synth, ZeroDriftSameIdIsIdentical) {
  const Catalog a = numbered("x", 20, 2018);
  const Catalog b = numbered("x", 20, 2023);
  const EmbeddingSet ea = synth_embeddings(a, ModalityKind::IconContent, 512, 9, 0.0);
  const EmbeddingSet eb = synth_embeddings(b, ModalityKind::IconContent, 512, 9, 0.0);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(dot(ea.row(i), eb.row(i)), 1.0, 1e-5);
}

TEST(Synth, DeterministicBytes) {
  const Catalog a = numbered("x", 30, 2018);
  EXPECT_EQ(encode_embeddings(synth_embeddings(a, ModalityKind::Description, 64, 3, 0.1)),
            encode_embeddings(synth_embeddings(a, ModalityKind::Description, 64, 3, 0.1)));
  EXPECT_NE(encode_embeddings(synth_embeddings(a, ModalityKind::Description, 64, 3, 0.1)),
            encode_embeddings(synth_embeddings(a, ModalityKind::IconStyle, 64, 3, 0.1)));
}

TEST(Synth, UnitNorm) {
  const EmbeddingSet e = synth_embeddings(numbered("x", 10, 2018), ModalityKind::AppName, 33, 1, 0.3);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(dot(e.row(i), e.row(i)), 1.0, 1e-5);
}

TEST(Synth, Errors) {
  const Catalog a = numbered("x", 2, 2018);
  EXPECT_THROW(synth_embeddings(a, ModalityKind::AppName, 1, 1, 0.0), DataError);
  EXPECT_THROW(synth_embeddings(a, ModalityKind::AppName, 8, 1, 1.5), DataError);
}

// Distinct ids at dim 512, drift 0, 10^4 disjoint pairs. The observed 99.9th
// percentile of |cos| was 0.14224 (max 0.17231); the value is pinned here as a
// regression check and must stay below 0.2.
TEST(Synth, DistinctIdsNearlyOrthogonal) {
  const EmbeddingSet e = synth_embeddings(numbered("id", 20000, 2018), ModalityKind::IconContent, 512, 1, 0.0);
  std::vector<double> c;
  for (std::size_t i = 0; i < 10000; ++i) c.push_back(std::abs(dot(e.row(2 * i), e.row(2 * i + 1))));
  std::sort(c.begin(), c.end());
  const double p999 = c[9989];
  EXPECT_NEAR(p999, 0.14224, 5e-5);
  EXPECT_LT(p999, 0.2);
}

TEST(Synth, PlantedPairsDominateDistractors) {
  for (double drift : {0.0, 0.05, 0.1, 0.2}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Catalog old_cat = numbered("p", 40, 2018);
      std::vector<AppRecord> next = old_cat.records();
      for (auto& r : next) r.snapshot_year = 2023;
      for (int i = 0; i < 200; ++i) next.push_back(record("d" + std::to_string(i), 2023));
      const Catalog new_cat("n", next);
      const auto eo = synth_embeddings(old_cat, ModalityKind::IconContent, 512, seed, drift);
      const auto en = synth_embeddings(new_cat, ModalityKind::IconContent, 512, seed, drift);
      double worst_planted = 2, best_distractor = -2;
      for (std::size_t q = 0; q < eo.size(); ++q) {
        for (std::size_t g = 0; g < en.size(); ++g) {
          const double s = dot(eo.row(q), en.row(g));
          if (eo.id(q) == en.id(g)) {
            worst_planted = std::min(worst_planted, s);
          } else {
            best_distractor = std::max(best_distractor, s);
          }
        }
      }
      EXPECT_GT(worst_planted, best_distractor) << "drift " << drift << " seed " << seed;
    }
  }
}
