// Copyright 2026 The PixLift Authors.
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

#include <random>
#include <string>
#include <vector>

namespace pixlift::testing {

struct GeneratedUrl {
  std::string pattern_id;
  std::string url;
  int width = 0;
};

// Random absolute image URLs in the shape each shipped rewritable pattern
// expects, cycling through the patterns.
std::vector<GeneratedUrl> generate_url_corpus(std::size_t count,
                                              std::uint32_t seed);

}  // namespace pixlift::testing
