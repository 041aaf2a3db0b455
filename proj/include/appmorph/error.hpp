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

#include <stdexcept>
#include <string>

namespace appmorph {

/// Bad or inconsistent input data: malformed files, duplicate ids,
/// checksum mismatches. The CLI maps this to exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant failed. The CLI maps this to exit status 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace appmorph

#define APPMORPH_CHECK(cond, msg)                                          \
  do {                                                                     \
    if (!(cond)) {                                                         \
      throw ::appmorph::InvariantError(std::string("check failed: " #cond \
                                                   ": ") +                 \
                                       (msg));                             \
    }                                                                      \
  } while (false)
