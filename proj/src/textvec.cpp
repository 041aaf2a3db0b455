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
#include "appmorph/textvec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "appmorph/error.hpp"
#include "json.hpp"

namespace appmorph {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kIdfFormula = "ln((1+N)/(1+df))+1";

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
         (c >= 0x7b && c <= 0x7e);
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  auto brk = [&] {
    if (!out.empty() && out.back() != ' ') out.push_back(' ');
  };
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n;) {
    const auto c = static_cast<unsigned char>(text[i]);
    const auto c1 = i + 1 < n ? static_cast<unsigned char>(text[i + 1]) : 0;
    const auto c2 = i + 2 < n ? static_cast<unsigned char>(text[i + 2]) : 0;
    if (c < 0x80) {
      if (c >= 'A' && c <= 'Z') {
        out.push_back(static_cast<char>(c + 32));
      } else if (c == '\'') {
        // dropped so "don't" stays one word
      } else if (is_ascii_space(c) || is_ascii_punct(c)) {
        brk();
      } else {
        out.push_back(static_cast<char>(c));
      }
      ++i;
      continue;
    }
    if (c == 0xc2 && (c1 == 0xa0)) {  // no-break space
      brk();
      i += 2;
      continue;
    }
    if (c == 0xc2 && (c1 == 0xae || c1 == 0xa9)) {  // (R) (C)
      i += 2;
      continue;
    }
    if (c == 0xc3 && c1 >= 0x80 && c1 <= 0x9e && c1 != 0x97) {  // Latin-1 capitals
      out.push_back(static_cast<char>(c));
      out.push_back(static_cast<char>(c1 + 0x20));
      i += 2;
      continue;
    }
    if (c == 0xe2 && c1 == 0x84 && c2 == 0xa2) {  // trademark sign
      i += 3;
      continue;
    }
    if (c == 0xe2 && c1 == 0x80 && c2 == 0x99) {  // right single quote
      i += 3;
      continue;
    }
    if ((c == 0xe2 && c1 == 0x80 && (c2 <= 0x8b || c2 == 0xaf)) ||
        (c == 0xe2 && c1 == 0x81 && c2 == 0x9f) || (c == 0xe3 && c1 == 0x80 && c2 == 0x80)) {
      brk();
      i += 3;
      continue;
    }
    out.push_back(static_cast<char>(c));
    ++i;
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  const std::string norm = normalize_text(text);
  std::size_t start = 0;
  while (start < norm.size()) {
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    if (end > start) words.emplace_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

std::vector<std::string> word_ngrams(const std::vector<std::string>& words, int ngram_max) {
  std::vector<std::string> grams;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string g;
    for (int n = 1; n <= ngram_max && i + static_cast<std::size_t>(n) <= words.size(); ++n) {
      if (n > 1) g.push_back(' ');
      g += words[i + static_cast<std::size_t>(n) - 1];
      grams.push_back(g);
    }
  }
  return grams;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (float w : weights) s += static_cast<double>(w) * w;
  return std::sqrt(s);
}

std::vector<float> SparseVector::to_dense() const {
  std::vector<float> v(dim, 0.0f);
  for (std::size_t i = 0; i < indices.size(); ++i) v[indices[i]] = weights[i];
  return v;
}

TfIdfModel::TfIdfModel(std::size_t capacity, int ngram_max, std::vector<std::string> terms,
                       std::vector<double> idf)
    : capacity_(capacity), ngram_max_(ngram_max), terms_(std::move(terms)), idf_(std::move(idf)) {
  if (capacity_ < 1) throw DataError("tfidf: vocabulary capacity must be >= 1");
  if (ngram_max_ < 1) throw DataError("tfidf: ngram_max must be >= 1");
  if (terms_.size() > capacity_) throw DataError("tfidf: vocabulary exceeds capacity");
  if (terms_.size() != idf_.size()) throw DataError("tfidf: idf/vocabulary size mismatch");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!(idf_[i] > 0.0) || !std::isfinite(idf_[i])) throw DataError("tfidf: idf must be positive");
    if (!column_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second) {
      throw DataError("tfidf: duplicate vocabulary term '" + terms_[i] + "'");
    }
  }
}

std::optional<std::uint32_t> TfIdfModel::column(std::string_view term) const {
  auto it = column_.find(std::string(term));
  if (it == column_.end()) return std::nullopt;
  return it->second;
}

std::string TfIdfModel::to_json() const {
  json j;
  j["V"] = capacity_;
  j["ngram_max"] = ngram_max_;
  j["idf_formula"] = kIdfFormula;
  j["vocabulary"] = json::array();
  for (std::size_t i = 0; i < terms_.size(); ++i) j["vocabulary"].push_back({terms_[i], i});
  j["idf"] = idf_;
  return j.dump();
}

TfIdfModel TfIdfModel::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.value("idf_formula", std::string()) != kIdfFormula) {
      throw DataError("tfidf: unsupported idf_formula");
    }
    const auto entries = j.at("vocabulary");
    std::vector<std::string> terms(entries.size());
    std::vector<bool> seen(entries.size(), false);
    for (const auto& e : entries) {
      const auto idx = e.at(1).get<std::size_t>();
      if (idx >= terms.size() || seen[idx]) throw DataError("tfidf: vocabulary indices not a bijection");
      seen[idx] = true;
      terms[idx] = e.at(0).get<std::string>();
    }
    return TfIdfModel(j.at("V").get<std::size_t>(), j.at("ngram_max").get<int>(), std::move(terms),
                      j.at("idf").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("tfidf: malformed model: ") + e.what());
  }
}

void TfIdfModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json() << '\n';
}

TfIdfModel TfIdfModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

TfIdfModel fit_tfidf(std::span<const std::string> corpus, std::size_t capacity, int ngram_max) {
  if (corpus.empty()) throw DataError("tfidf: empty corpus");
  if (capacity < 1) throw DataError("tfidf: vocabulary capacity must be >= 1");

  std::unordered_map<std::string, std::uint32_t> df;
  for (const auto& doc : corpus) {
    auto grams = word_ngrams(tokenize(doc), ngram_max);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[std::move(g)];
  }

  std::vector<std::pair<std::uint32_t, std::string>> ranked;
  ranked.reserve(df.size());
  for (auto& [term, count] : df) ranked.emplace_back(count, term);
  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  const std::size_t keep = std::min(capacity, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), better);

  const double n_docs = static_cast<double>(corpus.size());
  std::vector<std::string> terms;
  std::vector<double> idf;
  terms.reserve(keep);
  idf.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    terms.push_back(std::move(ranked[i].second));
    idf.push_back(std::log((1.0 + n_docs) / (1.0 + ranked[i].first)) + 1.0);
  }
  return TfIdfModel(capacity, ngram_max, std::move(terms), std::move(idf));
}

SparseVector transform(const TfIdfModel& model, std::string_view text) {
  std::map<std::uint32_t, double> counts;
  for (const auto& g : word_ngrams(tokenize(text), model.ngram_max())) {
    if (auto col = model.column(g)) counts[*col] += 1.0;
  }
  SparseVector v;
  v.dim = model.capacity();
  double sq = 0.0;
  for (auto& [col, tf] : counts) {
    tf *= model.idf()[col];
    sq += tf * tf;
  }
  if (sq == 0.0) return v;
  const double inv = 1.0 / std::sqrt(sq);
  v.indices.reserve(counts.size());
  v.weights.reserve(counts.size());
  for (const auto& [col, w] : counts) {
    v.indices.push_back(col);
    v.weights.push_back(static_cast<float>(w * inv));
  }
  return v;
}

double cosine(std::span<const float> u, std::span<const float> v) {
  APPMORPH_CHECK(u.size() == v.size(), "cosine: dimension mismatch " + std::to_string(u.size()) +
                                           " vs " + std::to_string(v.size()));
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double cosine(const SparseVector& u, const SparseVector& v) {
  APPMORPH_CHECK(u.dim == v.dim, "cosine: dimension mismatch " + std::to_string(u.dim) + " vs " +
                                     std::to_string(v.dim));
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  double uv = 0.0;
  std::size_t i = 0, j = 0;
  while (i < u.indices.size() && j < v.indices.size()) {
    if (u.indices[i] < v.indices[j]) {
      ++i;
    } else if (u.indices[i] > v.indices[j]) {
      ++j;
    } else {
      uv += static_cast<double>(u.weights[i++]) * v.weights[j++];
    }
  }
  return std::clamp(uv / (nu * nv), -1.0, 1.0);
}

}  // namespace appmorph
