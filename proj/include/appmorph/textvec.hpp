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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace appmorph {

inline constexpr std::size_t kDefaultVocabularySize = 4096;
inline constexpr int kDefaultNgramMax = 4;

/// Lowercases (ASCII and Latin-1 letters), turns punctuation into word breaks,
/// drops apostrophes and trademark signs, and collapses whitespace runs
/// (including the common Unicode spaces) to a single ' '.
std::string normalize_text(std::string_view text);

/// Words of normalize_text(text).
std::vector<std::string> tokenize(std::string_view text);

/// All contiguous word n-grams for n in [1, ngram_max], joined by ' '.
std::vector<std::string> word_ngrams(const std::vector<std::string>& words, int ngram_max);

/// Sparse L2-normalized TF-IDF vector. Indices strictly increasing.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::uint32_t> indices;
  std::vector<float> weights;

  double norm() const;
  std::vector<float> to_dense() const;
  bool operator==(const SparseVector&) const = default;
};

class TfIdfModel {
 public:
  TfIdfModel() = default;
  /// `terms[i]` owns column i. Throws DataError if the columns or idf values
  /// are inconsistent.
  TfIdfModel(std::size_t capacity, int ngram_max, std::vector<std::string> terms,
             std::vector<double> idf);

  /// Maximum vocabulary size V; also the vector dimension.
  std::size_t capacity() const { return capacity_; }
  int ngram_max() const { return ngram_max_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  std::optional<std::uint32_t> column(std::string_view term) const;

  std::string to_json() const;
  static TfIdfModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TfIdfModel load(const std::filesystem::path& path);

  bool operator==(const TfIdfModel& o) const {
    return capacity_ == o.capacity_ && ngram_max_ == o.ngram_max_ && terms_ == o.terms_ &&
           idf_ == o.idf_;
  }

 private:
  std::size_t capacity_ = 0;
  int ngram_max_ = kDefaultNgramMax;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> column_;
};

/// Keeps the `capacity` n-grams with the highest document frequency (ties
/// lexicographic); column i is the i-th kept n-gram.
/// idf(t) = ln((1 + N) / (1 + df(t))) + 1.
TfIdfModel fit_tfidf(std::span<const std::string> corpus,
                     std::size_t capacity = kDefaultVocabularySize,
                     int ngram_max = kDefaultNgramMax);

/// Raw in-vocabulary n-gram counts times idf, L2-normalized. Text with no
/// vocabulary n-gram maps to the zero vector.
SparseVector transform(const TfIdfModel& model, std::string_view text);

/// u.v / (|u| |v|), or 0 when either norm is 0. Throws InvariantError on a
/// dimension mismatch.
double cosine(std::span<const float> u, std::span<const float> v);
double cosine(const SparseVector& u, const SparseVector& v);

}  // namespace appmorph
