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
#include <map>
#include <set>

#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"
#include "appmorph/textvec.hpp"
#include "test_support.hpp"

using namespace appmorph;

namespace {

std::vector<std::string> corpus(std::initializer_list<const char*> docs) {
  return {docs.begin(), docs.end()};
}

std::set<std::string> vocab(const TfIdfModel& m) { return {m.terms().begin(), m.terms().end()}; }

}  // namespace

TEST(Normalize, CaseAndPunctuation) {
  EXPECT_EQ(normalize_text("  Hello,   WORLD!! "), "hello world");
  EXPECT_EQ(normalize_text("Don't Stop"), "dont stop");
  EXPECT_EQ(normalize_text("Plants vs Zombies\xE2\x84\xA2 2"), "plants vs zombies 2");
  EXPECT_EQ(normalize_text("Caf\xC3\x89"), "caf\xC3\xA9");
  EXPECT_EQ(normalize_text("a\xC2\xA0" "b"), "a b");
  EXPECT_EQ(normalize_text(""), "");
}

TEST(Normalize, Idempotent) {
  for (const char* s : {"Hello, World", "X-Men: Origins II", "  \t multi   space ", "ÀÉÎ õü"}) {
    const std::string once = normalize_text(s);
    EXPECT_EQ(normalize_text(once), once) << s;
  }
}

TEST(Ngrams, UpToMax) {
  const auto g = word_ngrams({"a", "b", "c"}, 2);
  EXPECT_EQ(g, (std::vector<std::string>{"a", "a b", "b", "b c", "c"}));
  EXPECT_EQ(word_ngrams({"a", "b", "c"}, 4).size(), 6u);
}

TEST(FitTfidf, LexicographicTieBreakUnigrams) {
  const auto m = fit_tfidf(corpus({"a b", "a c"}), 2, 1);
  EXPECT_EQ(vocab(m), (std::set<std::string>{"a", "b"}));
}

TEST(FitTfidf, BigramsEnterTheTie) {
  // With bigrams, "a b" sorts before "b" among df-1 terms.
  const auto m = fit_tfidf(corpus({"a b", "a c"}), 2, 2);
  EXPECT_EQ(vocab(m), (std::set<std::string>{"a", "a b"}));
}

TEST(FitTfidf, VocabularySmallerThanCap) {
  const auto m = fit_tfidf(corpus({"x"}), 10, 4);
  EXPECT_EQ(m.terms(), std::vector<std::string>{"x"});
  EXPECT_EQ(m.capacity(), 10u);
}

TEST(FitTfidf, IdfFloorIsOne) {
  const auto m = fit_tfidf(corpus({"k a", "k b", "k c"}), 10, 1);
  const auto col = m.column("k");
  ASSERT_TRUE(col);
  EXPECT_DOUBLE_EQ(m.idf()[*col], 1.0);
  EXPECT_NEAR(m.idf()[*m.column("a")], std::log(4.0 / 2.0) + 1.0, 1e-12);
  for (double v : m.idf()) EXPECT_GT(v, 0.0);
}

TEST(FitTfidf, ColumnsAreRanks) {
  const auto m = fit_tfidf(corpus({"z y", "z x", "z"}), 10, 1);
  EXPECT_EQ(m.terms(), (std::vector<std::string>{"z", "x", "y"}));
  for (std::size_t i = 0; i < m.terms().size(); ++i) EXPECT_EQ(*m.column(m.terms()[i]), i);
}

TEST(FitTfidf, Errors) {
  EXPECT_THROW(fit_tfidf({}, 10, 1), DataError);
  EXPECT_THROW(fit_tfidf(corpus({"a"}), 0, 1), DataError);
}

TEST(FitTfidf, DeterministicJson) {
  const auto docs = corpus({"Cut the Rope", "Cut the Rope 2", "Angry Birds", "Angry Birds Rio"});
  EXPECT_EQ(fit_tfidf(docs, 16, 4).to_json(), fit_tfidf(docs, 16, 4).to_json());
}

TEST(TfidfModel, JsonRoundTrip) {
  const auto m = fit_tfidf(corpus({"alpha beta", "beta gamma", "gamma"}), 8, 2);
  const auto back = TfIdfModel::from_json(m.to_json());
  EXPECT_EQ(back, m);
  testing_support::TempDir dir("tfidf");
  m.save(dir / "m.json");
  EXPECT_EQ(TfIdfModel::load(dir / "m.json"), m);
}

TEST(TfidfModel, RejectsBadJson) {
  EXPECT_THROW(TfIdfModel::from_json("{"), DataError);
  EXPECT_THROW(TfIdfModel::from_json(
                   R"({"V":2,"ngram_max":1,"idf_formula":"ln((1+N)/(1+df))+1","vocabulary":[["a",0],["b",0]],"idf":[1,1]})"),
               DataError);
}

TEST(Transform, OutOfVocabularyIsZero) {
  const auto m = fit_tfidf(corpus({"a b"}), 4, 1);
  const auto v = transform(m, "zzz qqq");
  EXPECT_TRUE(v.indices.empty());
  EXPECT_EQ(v.norm(), 0.0);
  EXPECT_EQ(v.dim, 4u);
}

TEST(Transform, SingleTermIsUnit) {
  const auto m = fit_tfidf(corpus({"a"}), 4, 1);
  const auto v = transform(m, "a");
  ASSERT_EQ(v.indices.size(), 1u);
  EXPECT_EQ(v.indices[0], *m.column("a"));
  EXPECT_FLOAT_EQ(v.weights[0], 1.0f);
}

TEST(Transform, WeightsMatchHandComputation) {
  // df: a=2, b=1, c=1, N=2.
  const auto m = fit_tfidf(corpus({"a b", "a c"}), 3, 1);
  const auto v = transform(m, "a b b");
  const double wa = 1.0 * (std::log(3.0 / 3.0) + 1.0);
  const double wb = 2.0 * (std::log(3.0 / 2.0) + 1.0);
  const double n = std::hypot(wa, wb);
  const auto d = v.to_dense();
  EXPECT_NEAR(d[*m.column("a")], wa / n, 1e-6);
  EXPECT_NEAR(d[*m.column("b")], wb / n, 1e-6);
  EXPECT_EQ(d[*m.column("c")], 0.0f);
}

TEST(Transform, NormIsZeroOrOne) {
  std::vector<std::string> docs;
  appmorph::Rng rng(5);
  const char* words[] = {"cut", "the", "rope", "angry", "birds", "2", "pro", "free", "hd", "lite"};
  for (int i = 0; i < 50; ++i) {
    std::string d;
    for (std::size_t w = 0, n = 1 + rng.uniform(5); w < n; ++w) d += std::string(words[rng.uniform(10)]) + " ";
    docs.push_back(d);
  }
  const auto m = fit_tfidf(docs, 12, 3);
  for (const auto& d : docs) {
    const auto v = transform(m, d);
    const double n = v.norm();
    EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) < 1e-6) << d << " norm " << n;
    EXPECT_EQ(transform(m, d), v);
    for (std::size_t i = 1; i < v.indices.size(); ++i) EXPECT_LT(v.indices[i - 1], v.indices[i]);
  }
}

TEST(Cosine, Examples) {
  const std::vector<float> u{1, 0}, v{1, 1}, w{0, 1}, z{0, 0};
  EXPECT_NEAR(cosine(u, v), 1.0 / std::sqrt(2.0), 1e-7);
  EXPECT_DOUBLE_EQ(cosine(u, w), 0.0);
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-7);
  EXPECT_EQ(cosine(u, z), 0.0);
  const std::vector<float> three{1, 2, 3};
  EXPECT_THROW(cosine(u, three), InvariantError);
}

TEST(Cosine, SymmetricAndScaleInvariant) {
  appmorph::Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    std::vector<float> a(8), b(8), a3(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = static_cast<float>(rng.normal());
      b[i] = static_cast<float>(rng.normal());
      a3[i] = 3.0f * a[i];
    }
    EXPECT_NEAR(cosine(a, b), cosine(b, a), 1e-12);
    EXPECT_NEAR(cosine(a3, b), cosine(a, b), 1e-6);
  }
}

TEST(Cosine, SparseMatchesDense) {
  const auto m = fit_tfidf(corpus({"cut the rope", "cut the rope 2", "rope burn"}), 16, 2);
  const auto a = transform(m, "cut the rope");
  const auto b = transform(m, "cut the rope 2");
  EXPECT_NEAR(cosine(a, b), cosine(a.to_dense(), b.to_dense()), 1e-6);
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-6);
}
