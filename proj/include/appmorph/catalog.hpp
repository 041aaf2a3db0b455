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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace appmorph {

using Date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DD". Throws DataError on anything else.
Date parse_date(std::string_view s);
std::string format_date(const Date& d);

/// Parses a Play Store download bucket into its lower bound:
/// "100k+" -> 100000, "1,000,000+" -> 1000000, "5M" -> 5000000.
/// Throws DataError if the text is not a bucket.
std::int64_t parse_download_bucket(std::string_view s);

/// One app's metadata in one snapshot.
struct AppRecord {
  std::string app_id;
  std::string app_name;
  std::string description;
  std::string developer_name;
  std::optional<std::string> developer_email;
  std::optional<std::string> developer_website;
  std::string genre;
  std::string content_rating;
  double price = 0.0;
  std::int64_t downloads = 0;
  std::int64_t rating_count = 0;
  double avg_stars = 0.0;
  Date release_date{};
  Date last_update_date{};
  std::set<std::string> permissions;
  int snapshot_year = 0;

  /// Set when the source had no last_update_date and release_date was used.
  bool last_update_defaulted = false;

  bool operator==(const AppRecord&) const = default;
};

/// Returns an empty string when the record satisfies its invariants,
/// otherwise a description of the first violation.
std::string validate_record(const AppRecord& r);

/// Immutable snapshot of app records, addressable by id and by position.
class Catalog {
 public:
  Catalog() = default;
  /// Throws DataError on duplicate app_id or an empty label.
  Catalog(std::string label, std::vector<AppRecord> records);

  const std::string& label() const { return label_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::vector<AppRecord>& records() const { return records_; }
  const AppRecord& at(std::size_t i) const { return records_.at(i); }

  /// nullptr when absent.
  const AppRecord* find(std::string_view app_id) const;
  bool contains(std::string_view app_id) const { return find(app_id) != nullptr; }

 private:
  std::string label_;
  std::vector<AppRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// A record dropped by load_catalog because it violated an invariant.
struct RejectedRecord {
  std::size_t line = 0;
  std::string app_id;
  std::string reason;
};

/// Reads a JSON-Lines catalog. Records failing invariants are skipped and,
/// if `rejected` is given, reported there. Malformed lines and duplicate ids
/// throw DataError naming the line number(s).
Catalog load_catalog(const std::filesystem::path& path, std::string label,
                     std::vector<RejectedRecord>* rejected = nullptr);

/// Writes one canonical JSON object per record, in catalog order.
void save_catalog(const Catalog& catalog, const std::filesystem::path& path);

std::string record_to_json_line(const AppRecord& r);

/// Records sorted by downloads, rating count, then average stars (all
/// descending) with ascending app_id as the final tie-break; first k kept.
std::vector<AppRecord> top_k(const Catalog& catalog, std::size_t k);

/// Query/gallery construction for match and no-match evaluation.
struct EvalSplit {
  std::vector<std::string> query_ids;
  std::vector<std::string> gallery_ids;  // sorted ascending
  std::map<std::string, std::string> truth;

  bool in_gallery(std::string_view id) const;
};

/// `truth_pairs` are (old id, new id). The gallery is every truth target plus
/// `distractor_count` seeded draws from the remaining new-catalog ids. With
/// `drop_truth_gallery` the targets are removed and the truth map is emptied.
EvalSplit build_eval_split(const Catalog& old_catalog, const Catalog& new_catalog,
                           const std::vector<std::pair<std::string, std::string>>& truth_pairs,
                           std::size_t distractor_count, std::uint64_t seed,
                           bool drop_truth_gallery);

}  // namespace appmorph
