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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "appmorph/catalog.hpp"
#include "appmorph/embed_io.hpp"

namespace appmorph {

struct FixtureSpec {
  std::size_t pairs = 500;
  std::size_t distractors = 4500;
  double drift = 0.05;
  std::uint64_t seed = 7;
  int old_year = 2018;
  int new_year = 2023;
  /// Per-modality dimensions, indexed by modality tag.
  std::array<std::size_t, 5> dims = {512, 512, 768, 4096, 4096};
};

/// Planted-match corpus. Each planted app keeps its id across snapshots and
/// grows its rating count; distractors exist only in the new snapshot. All
/// developer names are distinct.
struct Fixture {
  Catalog old_catalog;
  Catalog new_catalog;
  ModalitySets old_sets;
  ModalitySets new_sets;
  /// (old id, new id) for every planted pair.
  std::vector<std::pair<std::string, std::string>> truth_pairs;
};

Fixture make_fixture(const FixtureSpec& spec);

}  // namespace appmorph
