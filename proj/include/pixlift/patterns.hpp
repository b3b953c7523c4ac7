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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pixlift/http.hpp"

namespace pixlift::patterns {

// A URL convention through which an origin serves size variants.
//
// match_expr is an ECMAScript regex with exactly one capture group holding
// the width token. rewrite_template may use {prefix} (URL text before the
// capture), {width} and {suffix} (text after it). A template of "-" marks a
// detection-only pattern whose token is not a pixel width.
struct ResizePattern {
  std::string id;
  std::string match_expr;
  std::string rewrite_template;
  std::optional<double> prevalence;

  bool rewritable() const { return rewrite_template != "-"; }
};

struct PatternMatch {
  std::string pattern_id;
  std::optional<int> original_width;
  // Byte offsets [begin, end) of the width token within the URL.
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Ordered, immutable set of compiled patterns. File order is match priority.
// Safe to share across threads once constructed.
class Registry {
 public:
  // Line format: id <TAB> match_expr <TAB> rewrite_template [<TAB> prevalence].
  // Blank lines and lines starting with '#' are ignored. Throws ConfigError
  // naming the pattern id and line on malformed input or duplicate ids.
  static Registry load(std::string_view config_text);
  static Registry load_file(const std::string& path);
  // Built-in patterns; see default_registry_text().
  static Registry defaults();

  std::optional<PatternMatch> detect(std::string_view url) const;

  // Substitutes target_width into the width token. Throws NoReductionError
  // when the original width is unknown or target_width >= original width.
  std::string rewrite(std::string_view url, const PatternMatch& match,
                      int target_width) const;

  // Template substitution without the reduction check. Idempotent.
  std::string substitute(std::string_view url, const PatternMatch& match,
                         int width) const;

  const std::vector<ResizePattern>& patterns() const { return patterns_; }
  const ResizePattern* find(std::string_view id) const;
  std::size_t size() const { return patterns_.size(); }
  bool empty() const { return patterns_.empty(); }

 private:
  std::vector<ResizePattern> patterns_;
  std::vector<std::regex> compiled_;
};

std::string_view default_registry_text();

enum class ProbeStatus { kSupported, kUnsupported, kInconclusive };

std::string to_string(ProbeStatus status);
std::optional<ProbeStatus> parse_probe_status(std::string_view text);

struct SupportProbe {
  std::string url;
  std::string rewritten_url;
  std::string pattern_id;
  ProbeStatus status = ProbeStatus::kInconclusive;
  std::optional<std::uint64_t> original_bytes;
  std::optional<std::uint64_t> rewritten_bytes;
  std::optional<int> original_width;
  std::optional<int> rewritten_width;
  std::string note;
};

// Fetches the original and the rewritten variant once each (one retry on
// timeout). Supported iff both are images, the variant is at most
// target_width + 1 pixels wide and has fewer bytes. Transport failures and
// non-image originals are Inconclusive; never throws for network problems.
SupportProbe probe(std::string_view url, const Registry& registry,
                   http::Fetcher& fetcher, int target_width);

// Probes every URL with at most `parallelism` requests in flight; results
// keep input order.
std::vector<SupportProbe> probe_all(std::span<const std::string> urls,
                                    const Registry& registry,
                                    http::Fetcher& fetcher, int target_width,
                                    int parallelism);

enum class SupportClass { kNone, kPartial, kFull };

struct PageSupportClass {
  SupportClass kind = SupportClass::kNone;
  double resizable_fraction = 0.0;
};

std::string to_string(SupportClass kind);

PageSupportClass classify_page(std::span<const bool> supported);

// CSV columns: domain,url,pattern_id,status,orig_bytes,new_bytes
void write_probe_csv(std::ostream& out, std::span<const SupportProbe> probes);
std::vector<SupportProbe> read_probe_csv(std::istream& in);

}  // namespace pixlift::patterns
