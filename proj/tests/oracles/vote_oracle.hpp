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

// Brute-force trace interpreter for row-wise majority voting. It shares no
// code with the library: counts are recomputed from scratch at every row and
// every tie is expanded into its own branch, so the result is the full
// distribution of possible outputs rather than one seeded draw.

#include <cctype>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

struct Step {
  std::string app;
  int count = 0;
  bool bonus = false;
  std::size_t position = 0;
  bool operator<(const Step& o) const {
    return std::tie(app, count, bonus, position) < std::tie(o.app, o.count, o.bonus, o.position);
  }
  bool operator==(const Step& o) const {
    return std::tie(app, count, bonus, position) == std::tie(o.app, o.count, o.bonus, o.position);
  }
};

using Trace = std::vector<Step>;

struct Instance {
  std::vector<std::vector<std::string>> lists;  // four voting lists
  std::vector<std::string> dev_list;
  std::map<std::string, std::string> developer;
};

inline std::string lower(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

inline bool same_dev(const Instance& in, const std::string& a, const std::string& b) {
  auto ia = in.developer.find(a);
  auto ib = in.developer.find(b);
  if (ia == in.developer.end() || ib == in.developer.end()) return false;
  return lower(ia->second) == lower(ib->second);
}

namespace detail {

inline void expand(const Instance& in, std::size_t depth, std::size_t row, Trace& trace,
                   double p, std::map<Trace, double>& out) {
  if (row == depth) {
    out[trace] += p;
    return;
  }
  // Count appearances of every not-yet-chosen app in rows 0..row.
  std::map<std::string, int> count;
  for (const auto& list : in.lists) {
    for (std::size_t r = 0; r <= row && r < list.size(); ++r) {
      bool chosen = false;
      for (const auto& s : trace) chosen = chosen || s.app == list[r];
      if (!chosen) count[list[r]] += 1;
    }
  }
  if (count.empty()) {
    out[trace] += p;
    return;
  }
  int top = 0;
  for (const auto& kv : count) top = top < kv.second ? kv.second : top;
  std::vector<std::string> tied;
  for (const auto& kv : count) {
    if (kv.second == top) tied.push_back(kv.first);
  }
  for (const auto& app : tied) {
    Step s{app, top, false, row + 1};
    if (row < in.dev_list.size() && same_dev(in, app, in.dev_list[row])) {
      s.count += 1;
      s.bonus = true;
    }
    trace.push_back(s);
    expand(in, depth, row + 1, trace, p / static_cast<double>(tied.size()), out);
    trace.pop_back();
  }
}

}  // namespace detail

/// Every possible output trace with its probability.
inline std::map<Trace, double> vote_distribution(const Instance& in) {
  std::size_t depth = 0;
  for (const auto& l : in.lists) depth = depth < l.size() ? l.size() : depth;
  std::map<Trace, double> out;
  Trace trace;
  detail::expand(in, depth, 0, trace, 1.0, out);
  return out;
}

}  // namespace oracle
