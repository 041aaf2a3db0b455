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
#include "appmorph/fixture.hpp"

#include <cstdio>

#include "appmorph/error.hpp"
#include "appmorph/rng.hpp"

namespace appmorph {

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

AppRecord base_record(std::string id, std::size_t i, int year) {
  AppRecord r;
  r.app_id = std::move(id);
  r.app_name = numbered("Fixture App ", i);
  r.description = "Synthetic fixture application number " + std::to_string(i) + ".";
  r.genre = "Tools";
  r.content_rating = "Everyone";
  r.release_date = Date{std::chrono::year{year - 3}, std::chrono::January, std::chrono::day{1}};
  r.last_update_date = Date{std::chrono::year{year}, std::chrono::January, std::chrono::day{1}};
  r.snapshot_year = year;
  return r;
}

}  // namespace

Fixture make_fixture(const FixtureSpec& spec) {
  if (spec.pairs == 0) throw DataError("fixture: pairs must be >= 1");
  if (spec.new_year <= spec.old_year) throw DataError("fixture: new_year must follow old_year");
  Rng rng(spec.seed);
  std::vector<AppRecord> old_recs, new_recs;
  Fixture f;
  for (std::size_t i = 0; i < spec.pairs; ++i) {
    const std::string id = numbered("com.fixture.planted", i);
    AppRecord o = base_record(id, i, spec.old_year);
    o.developer_name = numbered("Planted Studio ", i);
    o.downloads = 10'000;
    o.rating_count = 100 + static_cast<std::int64_t>(rng.uniform(900));
    o.avg_stars = 4.0;
    AppRecord n = o;
    n.snapshot_year = spec.new_year;
    n.last_update_date = Date{std::chrono::year{spec.new_year}, std::chrono::January,
                              std::chrono::day{1}};
    n.downloads = 100'000;
    n.rating_count = o.rating_count + 1 + static_cast<std::int64_t>(rng.uniform(1000));
    old_recs.push_back(std::move(o));
    new_recs.push_back(std::move(n));
    f.truth_pairs.emplace_back(id, id);
  }
  for (std::size_t i = 0; i < spec.distractors; ++i) {
    AppRecord d = base_record(numbered("com.fixture.other", i), spec.pairs + i, spec.new_year);
    d.developer_name = numbered("Other Studio ", i);
    d.downloads = 1'000;
    d.rating_count = static_cast<std::int64_t>(rng.uniform(5000));
    d.avg_stars = 3.5;
    new_recs.push_back(std::move(d));
  }
  f.old_catalog = Catalog("old", std::move(old_recs));
  f.new_catalog = Catalog("new", std::move(new_recs));
  for (auto m : kAllModalities) {
    const auto t = static_cast<std::size_t>(m);
    f.old_sets[t] = synth_embeddings(f.old_catalog, m, spec.dims[t], spec.seed, spec.drift);
    f.new_sets[t] = synth_embeddings(f.new_catalog, m, spec.dims[t], spec.seed, spec.drift);
  }
  return f;
}

}  // namespace appmorph
