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

#include "pixlift/patterns.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "pixlift/codec.hpp"
#include "pixlift/csv.hpp"
#include "pixlift/errors.hpp"

namespace pixlift::patterns {
namespace {

// Documented patterns first (by reported prevalence), then generic forms.
constexpr std::string_view kDefaultRegistry =
    "# id\tmatch_expr\trewrite_template\tprevalence\n"
    "width_query\t[?&]width=(\\d+)\t{prefix}{width}{suffix}\t0.465\n"
    "q_w\t[?&]q=w_(\\d+)\t{prefix}{width}{suffix}\t0.213\n"
    "dw_suffix\t[?&]_(\\d+)w(?=$|&)\t{prefix}{width}{suffix}\t0.174\n"
    "w_query\t[?&]w=(\\d+)\t{prefix}{width}{suffix}\n"
    "imwidth_query\t[?&]imwidth=(\\d+)\t{prefix}{width}{suffix}\n"
    "width_param\twidth=(\\d+)\t{prefix}{width}{suffix}\n"
    "dims_pair\t/(\\d+)x\\d+/\t{prefix}{width}{suffix}\n"
    "resize_named\t/resize/(large|small|medium)/\t-\n";

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<int> parse_width(std::string_view token) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || value <= 0) {
    return std::nullopt;
  }
  return value;
}

std::string domain_of(std::string_view url) {
  const auto parsed = http::Url::parse(url);
  return parsed ? parsed->host : std::string();
}

http::FetchResponse fetch_with_retry(http::Fetcher& fetcher,
                                     const std::string& url) {
  http::FetchRequest req;
  req.url = url;
  req.headers = {{"Accept", "image/*"}};
  auto res = fetcher.fetch(req);
  if (res.transport == http::FetchResponse::Transport::kTimeout) {
    res = fetcher.fetch(req);
  }
  return res;
}

std::optional<int> image_width(const std::string& body) {
  if (const auto info = image::read_info(body)) return info->width;
  try {
    return image::decode(body).width();
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

bool looks_like_image(const http::FetchResponse& res) {
  return res.is_image() ||
         image::sniff_format(res.body) != image::Format::kUnknown;
}

}  // namespace

std::string_view default_registry_text() { return kDefaultRegistry; }

Registry Registry::load(std::string_view config_text) {
  Registry reg;
  std::set<std::string, std::less<>> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= config_text.size()) {
    const auto nl = config_text.find('\n', pos);
    const auto raw = config_text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? config_text.size() + 1 : nl + 1;
    ++line_no;

    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto where = " (line " + std::to_string(line_no) + ")";

    const auto fields = split_tabs(line);
    if (fields.size() < 3 || fields.size() > 4) {
      throw ConfigError("pattern line needs id, match_expr and template" +
                        where);
    }
    ResizePattern pat;
    pat.id = std::string(trim(fields[0]));
    pat.match_expr = std::string(fields[1]);
    pat.rewrite_template = std::string(trim(fields[2]));
    const auto named = "pattern '" + pat.id + "'" + where;
    if (pat.id.empty()) throw ConfigError("empty pattern id" + where);
    if (!ids.insert(pat.id).second) {
      throw ConfigError("duplicate pattern id '" + pat.id + "'" + where);
    }
    if (fields.size() == 4 && !trim(fields[3]).empty()) {
      double prevalence = 0;
      std::istringstream in{std::string(trim(fields[3]))};
      if (!(in >> prevalence) || prevalence < 0 || prevalence > 1) {
        throw ConfigError(named + ": prevalence must be in [0,1]");
      }
      pat.prevalence = prevalence;
    }

    std::regex compiled;
    try {
      compiled = std::regex(pat.match_expr, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError(named + ": malformed expression: " + e.what());
    }
    if (compiled.mark_count() != 1) {
      throw ConfigError(named + ": expression needs exactly one capture group, has " +
                        std::to_string(compiled.mark_count()));
    }
    if (pat.rewritable() &&
        pat.rewrite_template.find("{width}") == std::string::npos) {
      throw ConfigError(named + ": template lacks {width}");
    }
    reg.patterns_.push_back(std::move(pat));
    reg.compiled_.push_back(std::move(compiled));
  }
  return reg;
}

Registry Registry::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pattern file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return load(text.str());
}

Registry Registry::defaults() { return load(kDefaultRegistry); }

const ResizePattern* Registry::find(std::string_view id) const {
  for (const auto& p : patterns_) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

std::optional<PatternMatch> Registry::detect(std::string_view url) const {
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(url.begin(), url.end(), m, compiled_[i])) continue;
    if (!m[1].matched) continue;
    PatternMatch match;
    match.pattern_id = patterns_[i].id;
    match.begin = static_cast<std::size_t>(m.position(1));
    match.end = match.begin + static_cast<std::size_t>(m.length(1));
    match.original_width =
        parse_width(url.substr(match.begin, match.end - match.begin));
    return match;
  }
  return std::nullopt;
}

std::string Registry::substitute(std::string_view url,
                                 const PatternMatch& match, int width) const {
  const auto* pat = find(match.pattern_id);
  if (!pat) throw ConfigError("unknown pattern id '" + match.pattern_id + "'");
  if (!pat->rewritable()) {
    throw NoReductionError("pattern '" + pat->id + "' is detection-only");
  }
  if (match.begin > match.end || match.end > url.size()) {
    throw ConfigError("match span lies outside the URL");
  }
  const auto prefix = url.substr(0, match.begin);
  const auto suffix = url.substr(match.end);
  std::string out;
  const std::string_view tpl = pat->rewrite_template;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl.compare(i, 8, "{prefix}") == 0) {
      out += prefix;
      i += 8;
    } else if (tpl.compare(i, 7, "{width}") == 0) {
      out += std::to_string(width);
      i += 7;
    } else if (tpl.compare(i, 8, "{suffix}") == 0) {
      out += suffix;
      i += 8;
    } else {
      out += tpl[i++];
    }
  }
  return out;
}

std::string Registry::rewrite(std::string_view url, const PatternMatch& match,
                              int target_width) const {
  if (target_width <= 0) throw ConfigError("target width must be positive");
  if (!match.original_width) {
    throw NoReductionError("original width unknown for pattern '" +
                           match.pattern_id + "'");
  }
  if (target_width >= *match.original_width) {
    throw NoReductionError("target width " + std::to_string(target_width) +
                           " does not reduce " +
                           std::to_string(*match.original_width));
  }
  return substitute(url, match, target_width);
}

std::string to_string(ProbeStatus status) {
  switch (status) {
    case ProbeStatus::kSupported: return "supported";
    case ProbeStatus::kUnsupported: return "unsupported";
    case ProbeStatus::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::optional<ProbeStatus> parse_probe_status(std::string_view text) {
  if (text == "supported") return ProbeStatus::kSupported;
  if (text == "unsupported") return ProbeStatus::kUnsupported;
  if (text == "inconclusive") return ProbeStatus::kInconclusive;
  return std::nullopt;
}

SupportProbe probe(std::string_view url, const Registry& registry,
                   http::Fetcher& fetcher, int target_width) {
  SupportProbe result;
  result.url = std::string(url);
  const auto match = registry.detect(url);
  if (!match) {
    result.note = "no pattern matched";
    return result;
  }
  result.pattern_id = match->pattern_id;
  result.original_width = match->original_width;
  try {
    result.rewritten_url = registry.rewrite(url, *match, target_width);
  } catch (const NoReductionError& e) {
    result.note = e.what();
    return result;
  }

  const auto original = fetch_with_retry(fetcher, result.url);
  if (!original.transport_ok()) {
    result.note = "original fetch failed: " + original.error;
    return result;
  }
  if (!original.success() || !looks_like_image(original)) {
    result.note = "original is not an image (status " +
                  std::to_string(original.status) + ")";
    return result;
  }
  result.original_bytes = original.body.size();
  if (const auto w = image_width(original.body)) result.original_width = w;

  const auto variant = fetch_with_retry(fetcher, result.rewritten_url);
  if (!variant.transport_ok()) {
    result.note = "variant fetch failed: " + variant.error;
    return result;
  }
  if (!variant.success()) {
    result.status = ProbeStatus::kUnsupported;
    result.note = "variant rejected with status " + std::to_string(variant.status);
    return result;
  }
  if (!looks_like_image(variant)) {
    result.note = "variant is not an image";
    return result;
  }
  result.rewritten_bytes = variant.body.size();
  result.rewritten_width = image_width(variant.body);
  if (!result.rewritten_width) {
    result.note = "variant does not decode";
    return result;
  }

  const bool smaller = *result.rewritten_bytes < *result.original_bytes;
  const bool width_ok = *result.rewritten_width <= target_width + 1;
  result.status = smaller && width_ok ? ProbeStatus::kSupported
                                      : ProbeStatus::kUnsupported;
  if (!smaller) result.note = "variant is not smaller";
  else if (!width_ok) result.note = "variant width ignores the request";
  return result;
}

std::vector<SupportProbe> probe_all(std::span<const std::string> urls,
                                    const Registry& registry,
                                    http::Fetcher& fetcher, int target_width,
                                    int parallelism) {
  std::vector<SupportProbe> results(urls.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < urls.size(); i = next++) {
      results[i] = probe(urls[i], registry, fetcher, target_width);
    }
  };
  const auto n = static_cast<std::size_t>(std::max(parallelism, 1));
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < std::min(n, urls.size()); ++t) {
    threads.emplace_back(worker);
  }
  worker();
  return results;
}

std::string to_string(SupportClass kind) {
  switch (kind) {
    case SupportClass::kNone: return "none";
    case SupportClass::kPartial: return "partial";
    case SupportClass::kFull: return "full";
  }
  return "none";
}

PageSupportClass classify_page(std::span<const bool> supported) {
  if (supported.empty()) return {};
  const auto count = std::count(supported.begin(), supported.end(), true);
  PageSupportClass out;
  out.resizable_fraction = static_cast<double>(count) / supported.size();
  if (count == 0) {
    out.kind = SupportClass::kNone;
  } else if (static_cast<std::size_t>(count) == supported.size()) {
    out.kind = SupportClass::kFull;
  } else {
    out.kind = SupportClass::kPartial;
  }
  return out;
}

void write_probe_csv(std::ostream& out, std::span<const SupportProbe> probes) {
  out << "domain,url,pattern_id,status,orig_bytes,new_bytes\n";
  for (const auto& p : probes) {
    out << csv::escape(domain_of(p.url)) << ',' << csv::escape(p.url) << ','
        << csv::escape(p.pattern_id) << ',' << to_string(p.status) << ',';
    if (p.original_bytes) out << *p.original_bytes;
    out << ',';
    if (p.rewritten_bytes) out << *p.rewritten_bytes;
    out << '\n';
  }
}

std::vector<SupportProbe> read_probe_csv(std::istream& in) {
  std::vector<SupportProbe> probes;
  std::string line;
  std::size_t row = 0;
  bool header = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = csv::split_line(line);
    if (fields.size() != 6) {
      throw IngestError("probe csv row needs 6 fields", row);
    }
    SupportProbe p;
    p.url = fields[1];
    p.pattern_id = fields[2];
    const auto status = parse_probe_status(fields[3]);
    if (!status) throw IngestError("bad probe status '" + fields[3] + "'", row);
    p.status = *status;
    auto parse_bytes = [&](const std::string& f) -> std::optional<std::uint64_t> {
      if (f.empty()) return std::nullopt;
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw IngestError("bad byte count '" + f + "'", row);
      }
      return v;
    };
    p.original_bytes = parse_bytes(fields[4]);
    p.rewritten_bytes = parse_bytes(fields[5]);
    if (p.status == ProbeStatus::kSupported &&
        (!p.original_bytes || !p.rewritten_bytes ||
         *p.rewritten_bytes >= *p.original_bytes)) {
      throw IngestError("supported probe without a byte reduction", row);
    }
    probes.push_back(std::move(p));
    ++row;
  }
  return probes;
}

}  // namespace pixlift::patterns
