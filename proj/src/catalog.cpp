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
#include "appmorph/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"
#include "json.hpp"

namespace appmorph {

using json = nlohmann::ordered_json;

Date parse_date(std::string_view s) {
  auto bad = [&] { return DataError("invalid date '" + std::string(s) + "'"); };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse = [&](std::string_view part, auto& out) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc{} || p != part.data() + part.size()) throw bad();
  };
  parse(s.substr(0, 4), y);
  parse(s.substr(5, 2), m);
  parse(s.substr(8, 2), d);
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw bad();
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::int64_t parse_download_bucket(std::string_view s) {
  std::string digits;
  double scale = 1.0;
  bool seen_suffix = false;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '+' || c == '_') continue;
    if (seen_suffix) throw DataError("invalid download bucket '" + std::string(s) + "'");
    switch (c) {
      case 'k': case 'K': scale = 1e3; seen_suffix = true; break;
      case 'm': case 'M': scale = 1e6; seen_suffix = true; break;
      case 'b': case 'B': scale = 1e9; seen_suffix = true; break;
      default:
        if ((c >= '0' && c <= '9') || c == '.') {
          digits.push_back(c);
        } else {
          throw DataError("invalid download bucket '" + std::string(s) + "'");
        }
    }
  }
  if (digits.empty()) throw DataError("invalid download bucket '" + std::string(s) + "'");
  double value = 0.0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || p != digits.data() + digits.size()) {
    throw DataError("invalid download bucket '" + std::string(s) + "'");
  }
  return static_cast<std::int64_t>(std::llround(value * scale));
}

std::string validate_record(const AppRecord& r) {
  if (r.app_id.empty()) return "empty app_id";
  if (r.downloads < 0) return "negative downloads";
  if (r.rating_count < 0) return "negative rating_count";
  if (!(r.avg_stars >= 0.0 && r.avg_stars <= 5.0)) return "avg_stars outside [0,5]";
  if (!(r.price >= 0.0) || !std::isfinite(r.price)) return "negative or non-finite price";
  if (!r.release_date.ok() || !r.last_update_date.ok()) return "invalid date";
  if (std::chrono::sys_days{r.last_update_date} < std::chrono::sys_days{r.release_date}) {
    return "last_update_date precedes release_date";
  }
  return {};
}

Catalog::Catalog(std::string label, std::vector<AppRecord> records)
    : label_(std::move(label)), records_(std::move(records)) {
  if (label_.empty()) throw DataError("catalog label must be non-empty");
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(records_[i].app_id, i);
    if (!inserted) {
      throw DataError("duplicate app_id '" + records_[i].app_id + "' at records " +
                      std::to_string(it->second + 1) + " and " + std::to_string(i + 1));
    }
  }
}

const AppRecord* Catalog::find(std::string_view app_id) const {
  auto it = by_id_.find(std::string(app_id));
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

namespace {

std::string get_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<std::string> get_optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string or null");
  return it->get<std::string>();
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw DataError(std::string("missing field '") + key + "'");
  return *it;
}

double get_number(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw DataError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& j, const char* key) {
  const json& v = require(j, key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d != std::floor(d)) throw DataError(std::string("field '") + key + "' must be an integer");
    return static_cast<std::int64_t>(d);
  }
  throw DataError(std::string("field '") + key + "' must be an integer");
}

AppRecord record_from_json(const json& j) {
  if (!j.is_object()) throw DataError("line is not a JSON object");
  AppRecord r;
  r.app_id = get_string(j, "app_id");
  r.app_name = get_string(j, "app_name");
  r.description = get_string(j, "description");
  r.developer_name = get_string(j, "developer_name");
  r.developer_email = get_optional_string(j, "developer_email");
  r.developer_website = get_optional_string(j, "developer_website");
  r.genre = get_string(j, "genre");
  r.content_rating = get_string(j, "content_rating");
  r.price = get_number(j, "price");

  const json& dl = require(j, "downloads");
  if (dl.is_string()) {
    r.downloads = parse_download_bucket(dl.get<std::string>());
  } else {
    r.downloads = get_integer(j, "downloads");
  }
  r.rating_count = get_integer(j, "rating_count");
  r.avg_stars = get_number(j, "avg_stars");

  const json& rel = require(j, "release_date");
  if (!rel.is_string()) throw DataError("field 'release_date' must be a string");
  r.release_date = parse_date(rel.get<std::string>());
  auto upd = j.find("last_update_date");
  if (upd == j.end() || upd->is_null()) {
    r.last_update_date = r.release_date;
    r.last_update_defaulted = true;
  } else {
    if (!upd->is_string()) throw DataError("field 'last_update_date' must be a string");
    r.last_update_date = parse_date(upd->get<std::string>());
    auto flag = j.find("last_update_defaulted");
    r.last_update_defaulted = flag != j.end() && flag->is_boolean() && flag->get<bool>();
  }

  auto perms = j.find("permissions");
  if (perms != j.end() && !perms->is_null()) {
    if (!perms->is_array()) throw DataError("field 'permissions' must be an array");
    for (const auto& p : *perms) {
      if (!p.is_string()) throw DataError("permission entries must be strings");
      r.permissions.insert(p.get<std::string>());
    }
  }
  r.snapshot_year = static_cast<int>(get_integer(j, "snapshot_year"));
  return r;
}

json record_to_json(const AppRecord& r) {
  json j;
  j["app_id"] = r.app_id;
  j["app_name"] = r.app_name;
  j["description"] = r.description;
  j["developer_name"] = r.developer_name;
  j["developer_email"] = r.developer_email ? json(*r.developer_email) : json(nullptr);
  j["developer_website"] = r.developer_website ? json(*r.developer_website) : json(nullptr);
  j["genre"] = r.genre;
  j["content_rating"] = r.content_rating;
  j["price"] = r.price;
  j["downloads"] = r.downloads;
  j["rating_count"] = r.rating_count;
  j["avg_stars"] = r.avg_stars;
  j["release_date"] = format_date(r.release_date);
  j["last_update_date"] = format_date(r.last_update_date);
  j["permissions"] = json::array();
  for (const auto& p : r.permissions) j["permissions"].push_back(p);
  j["snapshot_year"] = r.snapshot_year;
  if (r.last_update_defaulted) j["last_update_defaulted"] = true;
  return j;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

std::string record_to_json_line(const AppRecord& r) { return record_to_json(r).dump(); }

Catalog load_catalog(const std::filesystem::path& path, std::string label,
                     std::vector<RejectedRecord>* rejected) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open catalog " + path.string());

  std::vector<AppRecord> records;
  std::unordered_map<std::string, std::size_t> line_of;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    AppRecord r;
    try {
      r = record_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (auto why = validate_record(r); !why.empty()) {
      if (rejected) rejected->push_back({lineno, r.app_id, why});
      continue;
    }
    auto [it, inserted] = line_of.emplace(r.app_id, lineno);
    if (!inserted) {
      throw DataError(path.string() + ": duplicate app_id '" + r.app_id + "' on lines " +
                      std::to_string(it->second) + " and " + std::to_string(lineno));
    }
    records.push_back(std::move(r));
  }
  if (in.bad()) throw DataError("read failure on " + path.string());
  return Catalog(std::move(label), std::move(records));
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write catalog " + path.string());
  for (const auto& r : catalog.records()) out << record_to_json(r).dump() << '\n';
  if (!out) throw DataError("write failure on " + path.string());
}

std::vector<AppRecord> top_k(const Catalog& catalog, std::size_t k) {
  APPMORPH_CHECK(k >= 1, "top_k requires k >= 1");
  std::vector<const AppRecord*> order;
  order.reserve(catalog.size());
  for (const auto& r : catalog.records()) order.push_back(&r);
  auto before = [](const AppRecord* a, const AppRecord* b) {
    if (a->downloads != b->downloads) return a->downloads > b->downloads;
    if (a->rating_count != b->rating_count) return a->rating_count > b->rating_count;
    if (a->avg_stars != b->avg_stars) return a->avg_stars > b->avg_stars;
    return a->app_id < b->app_id;
  };
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    before);
  std::vector<AppRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(*order[i]);
  return out;
}

bool EvalSplit::in_gallery(std::string_view id) const {
  return std::binary_search(gallery_ids.begin(), gallery_ids.end(), id);
}

EvalSplit build_eval_split(const Catalog& old_catalog, const Catalog& new_catalog,
                           const std::vector<std::pair<std::string, std::string>>& truth_pairs,
                           std::size_t distractor_count, std::uint64_t seed,
                           bool drop_truth_gallery) {
  EvalSplit split;
  std::set<std::string> targets;
  for (const auto& [query, target] : truth_pairs) {
    if (!old_catalog.contains(query)) {
      throw DataError("truth query '" + query + "' not in catalog " + old_catalog.label());
    }
    if (!new_catalog.contains(target)) {
      throw DataError("truth target '" + target + "' not in catalog " + new_catalog.label());
    }
    if (split.truth.count(query)) throw DataError("truth query '" + query + "' listed twice");
    split.query_ids.push_back(query);
    split.truth.emplace(query, target);
    targets.insert(target);
  }

  std::vector<std::string> pool;
  for (const auto& r : new_catalog.records()) {
    if (!targets.count(r.app_id)) pool.push_back(r.app_id);
  }
  std::sort(pool.begin(), pool.end());
  if (distractor_count > pool.size()) {
    throw DataError("requested " + std::to_string(distractor_count) + " distractors but only " +
                    std::to_string(pool.size()) + " non-target apps are available");
  }
  // Partial Fisher-Yates: the first distractor_count slots are the draw.
  Rng rng(seed);
  for (std::size_t i = 0; i < distractor_count; ++i) {
    std::swap(pool[i], pool[i + rng.uniform(pool.size() - i)]);
  }
  pool.resize(distractor_count);

  split.gallery_ids = std::move(pool);
  if (drop_truth_gallery) {
    split.truth.clear();
  } else {
    split.gallery_ids.insert(split.gallery_ids.end(), targets.begin(), targets.end());
  }
  std::sort(split.gallery_ids.begin(), split.gallery_ids.end());
  return split;
}

}  // namespace appmorph
