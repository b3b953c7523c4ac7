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

#include "pixlift/analyzer.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pixlift/codec.hpp"
#include "pixlift/csv.hpp"
#include "pixlift/errors.hpp"

namespace pixlift::analyzer {
namespace {

using json = nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool has_image_extension(std::string_view url) {
  const auto path = url.substr(0, url.find_first_of("?#"));
  const auto dot = path.rfind('.');
  if (dot == std::string_view::npos) return false;
  const auto ext = lower(path.substr(dot + 1));
  for (std::string_view known : {"jpg", "jpeg", "png", "webp", "gif", "avif"}) {
    if (ext == known) return true;
  }
  return false;
}

bool is_image(std::string_view content_type, std::string_view url) {
  const auto type = lower(trim(content_type.substr(0, content_type.find(';'))));
  if (!type.empty()) return type.rfind("image/", 0) == 0;
  return has_image_extension(url);
}

std::string base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  }
  if (clean.size() % 4 != 0) return {};
  std::string out(clean.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) return {};
  std::size_t pad = 0;
  while (pad < 2 && pad < clean.size() && clean[clean.size() - 1 - pad] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::optional<int> json_int(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number()) return std::nullopt;
  return obj.at(key).get<int>();
}

std::uint64_t json_size(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number()) return 0;
  const double v = obj.at(key).get<double>();
  return v > 0 ? static_cast<std::uint64_t>(v) : 0;
}

void fill_dims_from_body(ImageEntry& img) {
  if (img.width || img.body.empty()) return;
  if (const auto info = image::read_info(img.body)) {
    img.width = info->width;
    img.height = info->height;
  }
}

ImageEntry parse_har_entry(const json& entry, std::size_t index) {
  if (!entry.is_object() || !entry.contains("request") || !entry.contains("response")) {
    throw IngestError("HAR entry lacks request/response", index);
  }
  const auto& request = entry.at("request");
  const auto& response = entry.at("response");
  if (!request.is_object() || !request.contains("url") || !request.at("url").is_string() ||
      !response.is_object()) {
    throw IngestError("HAR entry has no request url", index);
  }
  ImageEntry img;
  img.url = request.at("url").get<std::string>();
  const json content = response.value("content", json::object());
  if (content.is_object() && content.contains("mimeType") && content.at("mimeType").is_string()) {
    img.content_type = content.at("mimeType").get<std::string>();
  }
  if (img.content_type.empty() && response.contains("headers") &&
      response.at("headers").is_array()) {
    for (const auto& h : response.at("headers")) {
      if (h.is_object() && lower(h.value("name", "")) == "content-type") {
        img.content_type = h.value("value", "");
      }
    }
  }
  if (content.is_object() && content.contains("text") && content.at("text").is_string() &&
      content.value("encoding", "") == "base64") {
    img.body = base64_decode(content.at("text").get<std::string>());
  }
  img.bytes = json_size(response, "_transferSize");
  if (img.bytes == 0) img.bytes = json_size(response, "bodySize");
  if (img.bytes == 0) img.bytes = json_size(content, "size");
  if (img.bytes == 0) img.bytes = img.body.size();

  if (entry.contains("_image")) {
    const auto& meta = entry.at("_image");
    if (!meta.is_object()) throw IngestError("HAR _image must be an object", index);
    img.width = json_int(meta, "width");
    img.height = json_int(meta, "height");
    img.display_width = json_int(meta, "display_width");
    if (meta.contains("visible")) {
      if (!meta.at("visible").is_boolean()) throw IngestError("_image.visible must be boolean", index);
      img.visible = meta.at("visible").get<bool>();
    }
  }
  fill_dims_from_body(img);
  return img;
}

std::optional<bool> parse_bool(std::string_view s, std::size_t row) {
  const auto v = lower(trim(s));
  if (v.empty()) return std::nullopt;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw IngestError("bad boolean '" + v + "'", row);
}

}  // namespace

// ---- ingestion --------------------------------------------------------------

std::vector<PageRecord> ingest_har(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    throw IngestError(std::string("malformed HAR: ") + e.what(), 0);
  }
  if (!doc.is_object() || !doc.contains("log") || !doc.at("log").is_object()) {
    throw IngestError("HAR has no log object", 0);
  }
  const auto& log = doc.at("log");
  const json entries = log.value("entries", json::array());
  if (!entries.is_array()) throw IngestError("HAR entries must be an array", 0);

  std::vector<PageRecord> pages;
  std::map<std::string, std::size_t> by_ref;
  if (log.contains("pages") && log.at("pages").is_array()) {
    for (const auto& p : log.at("pages")) {
      if (!p.is_object()) continue;
      const auto id = p.value("id", std::string());
      const auto title = p.value("title", std::string());
      by_ref[id] = pages.size();
      pages.push_back({title.empty() ? id : title, {}});
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto img = parse_har_entry(entries[i], i);
    std::size_t page = 0;
    const auto ref = entries[i].is_object() ? entries[i].value("pageref", std::string()) : "";
    if (const auto it = by_ref.find(ref); it != by_ref.end()) {
      page = it->second;
    } else if (pages.empty()) {
      // No page list: the first request is the document.
      pages.push_back({img.url, {}});
    }
    if (img.bytes == 0 || !is_image(img.content_type, img.url)) continue;
    pages[page].images.push_back(std::move(img));
  }
  if (pages.empty()) pages.push_back({});
  return pages;
}

std::vector<PageRecord> ingest_csv(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = csv::split_line(std::string(trim(line)));
      break;
    }
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(trim(header[i]))] = i;
  for (const char* required : {"page_url", "image_url", "bytes"}) {
    if (!col.count(required)) {
      throw IngestError(std::string("capture CSV lacks column '") + required + "'", 0);
    }
  }
  auto field = [&](const std::vector<std::string>& f, const char* name) -> std::string {
    const auto it = col.find(name);
    if (it == col.end() || it->second >= f.size()) return {};
    return f[it->second];
  };

  std::vector<PageRecord> pages;
  std::map<std::string, std::size_t> index;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = csv::split_line(line);
    ImageEntry img;
    img.url = field(f, "image_url");
    const auto page_url = field(f, "page_url");
    if (img.url.empty() || page_url.empty()) throw IngestError("row lacks page or image url", row);
    const auto bytes_text = field(f, "bytes");
    const auto b = parse_number<std::uint64_t>(bytes_text);
    if (!b) throw IngestError("row has missing or bad bytes '" + bytes_text + "'", row);
    img.bytes = *b;
    img.content_type = field(f, "content_type");
    auto opt_int = [&](const char* name) -> std::optional<int> {
      const auto text = field(f, name);
      if (trim(text).empty()) return std::nullopt;
      const auto v = parse_number<int>(text);
      if (!v || *v <= 0) throw IngestError(std::string("bad ") + name + " '" + text + "'", row);
      return v;
    };
    img.width = opt_int("width");
    img.height = opt_int("height");
    img.display_width = opt_int("display_width");
    img.visible = parse_bool(field(f, "visible"), row);
    auto [it, inserted] = index.try_emplace(page_url, pages.size());
    if (inserted) pages.push_back({page_url, {}});
    if (img.bytes > 0 && is_image(img.content_type, img.url)) {
      pages[it->second].images.push_back(std::move(img));
    }
    ++row;
  }
  return pages;
}

std::vector<PageRecord> ingest_capture(std::string_view bytes, CaptureFormat format) {
  return format == CaptureFormat::kHar ? ingest_har(bytes) : ingest_csv(bytes);
}

// ---- profiles ---------------------------------------------------------------

namespace {

std::optional<std::vector<std::string>> custom_args(std::string_view text) {
  text = trim(text);
  if (text.rfind("custom(", 0) != 0 || text.back() != ')') return std::nullopt;
  const auto inner = text.substr(7, text.size() - 8);
  std::vector<std::string> args;
  std::size_t start = 0;
  while (start <= inner.size()) {
    const auto comma = inner.find(',', start);
    args.emplace_back(trim(inner.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return args;
}

}  // namespace

NetworkProfile NetworkProfile::parse(std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "3gfast" || t == "3g-fast" || t == "3g_fast") return three_g_fast();
  const auto args = custom_args(t);
  if (!args || args->size() != 3) {
    throw ConfigError("network must be 3gfast or custom(D,U,RTT), got '" + std::string(text) + "'");
  }
  NetworkProfile p;
  const auto d = parse_number<double>((*args)[0]);
  const auto u = parse_number<double>((*args)[1]);
  const auto r = parse_number<double>((*args)[2]);
  if (!d || !u || !r || *d <= 0 || *u <= 0 || *r < 0) {
    throw ConfigError("network values must be positive numbers");
  }
  p.downlink_bps = *d;
  p.uplink_bps = *u;
  p.rtt_ms = *r;
  return p;
}

std::string NetworkProfile::describe() const {
  return "downlink " + format_number(downlink_bps) + " bps, uplink " + format_number(uplink_bps) +
         " bps, rtt " + format_number(rtt_ms) + " ms";
}

double DeviceProfile::upscale_seconds(double images) const {
  if (images <= 0 || table.empty()) return 0.0;
  double x0 = 0, y0 = 0;
  for (const auto& [n, s] : table) {
    if (images <= n) return y0 + (s - y0) * (images - x0) / (n - x0);
    x0 = n;
    y0 = s;
  }
  // Past the table: continue the last segment.
  double slope = y0 / x0;
  if (table.size() >= 2) {
    const auto& a = table[table.size() - 2];
    const auto& b = table.back();
    slope = (b.second - a.second) / (b.first - a.first);
  }
  return y0 + slope * (images - x0);
}

DeviceProfile DeviceProfile::a12() { return {"a12", {{1, 1.2}, {2, 2.0}, {10, 6.0}}}; }
DeviceProfile DeviceProfile::a03s() { return {"a03s", {{1, 1.2}, {2, 2.0}, {10, 5.0}}}; }
DeviceProfile DeviceProfile::a34() { return {"a34", {{1, 0.6}, {2, 0.8}, {10, 2.5}}}; }

DeviceProfile DeviceProfile::parse(std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "a12") return a12();
  if (t == "a03s") return a03s();
  if (t == "a34") return a34();
  const auto args = custom_args(t);
  if (!args || args->empty()) {
    throw ConfigError("device must be a03s, a12, a34 or custom(...), got '" + std::string(text) + "'");
  }
  DeviceProfile p{"custom", {}};
  if ((*args)[0].find(':') == std::string::npos) {
    // custom(first, per_image)
    if (args->size() != 2) throw ConfigError("custom device needs (first,per_image)");
    const auto first = parse_number<double>((*args)[0]);
    const auto per = parse_number<double>((*args)[1]);
    if (!first || !per || *first < 0 || *per < 0) throw ConfigError("bad custom device values");
    p.table = {{1, *first}, {2, *first + *per}};
  } else {
    for (const auto& a : *args) {
      const auto colon = a.find(':');
      const auto n = parse_number<int>(std::string_view(a).substr(0, colon));
      const auto s = colon == std::string::npos
                         ? std::nullopt
                         : parse_number<double>(std::string_view(a).substr(colon + 1));
      if (!n || !s || *n <= 0 || *s < 0) throw ConfigError("bad custom device point '" + a + "'");
      p.table.emplace_back(*n, *s);
    }
    std::sort(p.table.begin(), p.table.end());
  }
  double prev = 0;
  int prev_n = 0;
  for (const auto& [n, s] : p.table) {
    if (n == prev_n || s < prev) throw ConfigError("device table must be strictly increasing in count and non-decreasing in time");
    prev = s;
    prev_n = n;
  }
  return p;
}

double delta_plt(double delta_bytes, const NetworkProfile& network, const DeviceProfile& device,
                 double images_lifted) {
  return delta_bytes * 8.0 / network.downlink_bps - device.upscale_seconds(images_lifted);
}

// ---- probes -----------------------------------------------------------------

struct ProbeSource::Live {
  std::shared_ptr<http::Fetcher> fetcher;
  const patterns::Registry* registry = nullptr;
  int target_width = 200;
  std::mutex mu;
  std::map<std::string, patterns::SupportProbe, std::less<>> memo;
};

ProbeSource::ProbeSource(std::vector<patterns::SupportProbe> cached) {
  for (auto& p : cached) {
    auto url = p.url;
    cache_.insert_or_assign(std::move(url), std::move(p));
  }
}

void ProbeSource::enable_live(std::shared_ptr<http::Fetcher> fetcher,
                              const patterns::Registry* registry, int target_width) {
  live_ = std::make_shared<Live>();
  live_->fetcher = std::move(fetcher);
  live_->registry = registry;
  live_->target_width = target_width;
}

std::optional<patterns::SupportProbe> ProbeSource::lookup(const std::string& url) const {
  if (const auto it = cache_.find(url); it != cache_.end()) return it->second;
  if (!live_) return std::nullopt;
  {
    std::lock_guard lock(live_->mu);
    if (const auto it = live_->memo.find(url); it != live_->memo.end()) return it->second;
  }
  auto p = patterns::probe(url, *live_->registry, *live_->fetcher, live_->target_width);
  std::lock_guard lock(live_->mu);
  return live_->memo.insert_or_assign(url, std::move(p)).first->second;
}

// ---- classification ---------------------------------------------------------

std::vector<ImageClass> classify_images(const PageRecord& page, const Viewport& viewport,
                                        int target_width, const ProbeSource* probes) {
  std::vector<ImageClass> out(page.images.size());
  const bool have_flags = std::all_of(page.images.begin(), page.images.end(),
                                       [](const ImageEntry& i) { return i.visible.has_value(); });
  double stacked = 0;
  for (std::size_t i = 0; i < page.images.size(); ++i) {
    const auto& img = page.images[i];
    auto& c = out[i];
    if (have_flags) {
      c.visible = *img.visible;
    } else {
      const double w = img.display_width ? *img.display_width
                       : img.width       ? std::min(*img.width, viewport.width)
                                         : viewport.width;
      const double h = img.width && img.height ? *img.height * w / *img.width : w;
      stacked += h;
      c.visible = stacked <= viewport.height;
      c.visibility_estimated = true;
    }
    c.width_unknown = !img.width.has_value();
    c.already_small = img.width && *img.width <= target_width;
    c.ai_generatable = c.visible && !c.already_small;
    if (c.ai_generatable && probes) {
      const auto p = probes->lookup(img.url);
      c.ai_generated = p && p->status == patterns::ProbeStatus::kSupported;
    }
  }
  return out;
}

ClassCounts count_classes(const std::vector<ImageClass>& classes) {
  ClassCounts c;
  for (const auto& k : classes) {
    ++c.fetched;
    c.visible += k.visible;
    c.already_small += k.already_small;
    c.ai_generatable += k.ai_generatable;
    c.ai_generated += k.ai_generated;
    c.width_unknown += k.width_unknown;
    c.visibility_estimated = c.visibility_estimated || k.visibility_estimated;
  }
  return c;
}

// ---- savings ----------------------------------------------------------------

std::optional<std::uint64_t> reencoded_size(const ImageEntry& img, int target_width,
                                            int quality) {
  if (img.body.empty()) return std::nullopt;
  try {
    const auto decoded = image::decode(img.body);
    if (decoded.width() <= target_width) return img.body.size();
    const int h = image::proportional_height(decoded.width(), decoded.height(), target_width);
    const auto small = image::resize_bilinear(decoded, target_width, h);
    const auto format = image::sniff_format(img.body);
    return image::encode(small, format == image::Format::kUnknown ? image::Format::kJpeg : format,
                         quality)
        .size();
  } catch (const Error&) {
    return std::nullopt;
  }
}

PageSavings estimate_savings(const PageRecord& page, const AnalyzerConfig& config,
                             const ProbeSource& probes) {
  PageSavings s;
  s.page_url = page.page_url;
  const auto classes = classify_images(page, config.viewport, config.target_width, &probes);
  s.counts = count_classes(classes);
  for (std::size_t i = 0; i < page.images.size(); ++i) {
    const auto& img = page.images[i];
    const auto& c = classes[i];
    s.original_bytes += img.bytes;
    std::uint64_t today = img.bytes;
    std::uint64_t full = img.bytes;
    if (c.ai_generatable) {
      if (c.ai_generated) {
        const auto p = probes.lookup(img.url);
        if (p && p->rewritten_bytes) today = std::min(today, *p->rewritten_bytes);
      }
      if (const auto re = reencoded_size(img, config.target_width, config.jpeg_quality)) {
        full = std::min(full, *re);
      } else if (img.width) {
        const double t = config.target_width;
        const double w = *img.width;
        const double est = static_cast<double>(img.bytes) * t * t / (w * w);
        full = std::min(full, static_cast<std::uint64_t>(std::llround(est)));
        s.full_estimated = true;
      }
      full = std::min(full, today);
    }
    s.reduced_today += today;
    s.reduced_full += full;
    s.lifted_today += today < img.bytes;
    s.lifted_full += full < img.bytes;
  }
  s.delta_plt_today = delta_plt(static_cast<double>(s.delta_today()), config.network,
                                config.device, s.lifted_today);
  s.delta_plt_full = delta_plt(static_cast<double>(s.delta_full()), config.network,
                               config.device, s.lifted_full);
  return s;
}

// ---- aggregation ------------------------------------------------------------

std::optional<ReportMode> parse_report_mode(std::string_view text) {
  if (text == "today") return ReportMode::kToday;
  if (text == "full") return ReportMode::kFull;
  if (text == "both") return ReportMode::kBoth;
  return std::nullopt;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

PageSummary summarize_loads(const std::vector<PageSavings>& loads) {
  PageSummary out;
  if (loads.empty()) return out;
  out.page_url = loads.front().page_url;
  out.loads = static_cast<int>(loads.size());
  auto med = [&](auto get) {
    std::vector<double> v;
    for (const auto& l : loads) v.push_back(static_cast<double>(get(l)));
    return median(std::move(v));
  };
  out.original_bytes = med([](const PageSavings& l) { return l.original_bytes; });
  out.delta_bytes_today = med([](const PageSavings& l) { return l.delta_today(); });
  out.delta_bytes_full = med([](const PageSavings& l) { return l.delta_full(); });
  out.delta_plt_today = med([](const PageSavings& l) { return l.delta_plt_today; });
  out.delta_plt_full = med([](const PageSavings& l) { return l.delta_plt_full; });
  out.fetched = med([](const PageSavings& l) { return l.counts.fetched; });
  out.visible = med([](const PageSavings& l) { return l.counts.visible; });
  out.already_small = med([](const PageSavings& l) { return l.counts.already_small; });
  out.ai_generatable = med([](const PageSavings& l) { return l.counts.ai_generatable; });
  out.ai_generated = med([](const PageSavings& l) { return l.counts.ai_generated; });
  for (const auto& l : loads) {
    out.visibility_estimated = out.visibility_estimated || l.counts.visibility_estimated;
    out.full_estimated = out.full_estimated || l.full_estimated;
  }
  return out;
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const auto n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s = buf;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::vector<CorpusInput> load_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("input is not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = lower(e.path().extension().string());
    if (e.path().filename() == "probes.csv") continue;
    if (ext == ".har" || ext == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CorpusInput> out;
  for (const auto& f : files) {
    CorpusInput in;
    in.source = f.filename().string();
    std::ifstream file(f, std::ios::binary);
    std::ostringstream text;
    text << file.rdbuf();
    try {
      const auto format = lower(f.extension().string()) == ".har" ? CaptureFormat::kHar
                                                                  : CaptureFormat::kCsv;
      in.pages = ingest_capture(text.str(), format);
      for (auto& p : in.pages) {
        if (p.page_url.empty()) p.page_url = in.source;
      }
    } catch (const IngestError& e) {
      in.error = std::string(e.what()) + " (index " + std::to_string(e.index()) + ")";
    }
    out.push_back(std::move(in));
  }
  return out;
}

CorpusResult analyze_corpus(const std::vector<CorpusInput>& inputs, const AnalyzerConfig& config,
                            const ProbeSource& probes, int parallelism) {
  std::vector<const PageRecord*> pages;
  CorpusResult result;
  for (const auto& in : inputs) {
    if (!in.error.empty()) {
      PageSummary err;
      err.page_url = in.source;
      err.error = in.error;
      result.pages.push_back(std::move(err));
      continue;
    }
    for (const auto& p : in.pages) pages.push_back(&p);
  }

  std::vector<PageSavings> savings(pages.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < pages.size(); i = next++) {
      savings[i] = estimate_savings(*pages[i], config, probes);
    }
  };
  {
    std::vector<std::jthread> workers;
    const int n = std::max(1, std::min<int>(parallelism, static_cast<int>(pages.size())));
    for (int i = 1; i < n; ++i) workers.emplace_back(work);
    work();
  }

  // Repeated loads of one URL collapse to their median.
  std::map<std::string, std::vector<PageSavings>> grouped;
  for (auto& s : savings) grouped[s.page_url].push_back(std::move(s));
  for (const auto& [url, loads] : grouped) result.pages.push_back(summarize_loads(loads));
  std::stable_sort(result.pages.begin(), result.pages.end(),
                   [](const PageSummary& a, const PageSummary& b) { return a.page_url < b.page_url; });
  return result;
}

void write_report(const CorpusResult& result, const AnalyzerConfig& config, ReportMode mode,
                  const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const bool today = mode != ReportMode::kFull;
  const bool full = mode != ReportMode::kToday;

  auto open = [&](const std::string& name) {
    std::ofstream f(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + (out_dir / name).string());
    return f;
  };

  {
    auto f = open("pages.csv");
    f << "page_url,loads,original_bytes";
    if (today) f << ",delta_bytes_today,delta_plt_today_s";
    if (full) f << ",delta_bytes_full,delta_plt_full_s";
    f << ",fetched,visible,already_small,ai_generatable,ai_generated,visibility_estimated,"
         "full_estimated,error\n";
    for (const auto& p : result.pages) {
      f << csv::escape(p.page_url) << ',' << p.loads << ',' << format_number(p.original_bytes);
      if (today) f << ',' << format_number(p.delta_bytes_today) << ',' << format_number(p.delta_plt_today);
      if (full) f << ',' << format_number(p.delta_bytes_full) << ',' << format_number(p.delta_plt_full);
      f << ',' << format_number(p.fetched) << ',' << format_number(p.visible) << ','
        << format_number(p.already_small) << ',' << format_number(p.ai_generatable) << ','
        << format_number(p.ai_generated) << ',' << (p.visibility_estimated ? "true" : "false")
        << ',' << (p.full_estimated ? "true" : "false") << ',' << csv::escape(p.error) << '\n';
    }
  }

  std::vector<const PageSummary*> ok;
  for (const auto& p : result.pages) {
    if (p.error.empty()) ok.push_back(&p);
  }
  auto column = [&](double PageSummary::*field) {
    std::vector<double> v;
    for (const auto* p : ok) v.push_back(p->*field);
    return v;
  };
  auto write_cdf = [&](const std::string& name, double PageSummary::*field) {
    auto f = open("cdf_" + name + ".txt");
    f << "# " << name << " F\n";
    for (const auto& [x, y] : empirical_cdf(column(field))) {
      f << format_number(x) << ' ' << format_number(y) << '\n';
    }
  };
  if (today) {
    write_cdf("delta_plt_today", &PageSummary::delta_plt_today);
    write_cdf("delta_bytes_today", &PageSummary::delta_bytes_today);
    write_cdf("ai_generated", &PageSummary::ai_generated);
  }
  if (full) {
    write_cdf("delta_plt_full", &PageSummary::delta_plt_full);
    write_cdf("delta_bytes_full", &PageSummary::delta_bytes_full);
  }
  write_cdf("fetched", &PageSummary::fetched);
  write_cdf("visible", &PageSummary::visible);
  write_cdf("already_small", &PageSummary::already_small);
  write_cdf("ai_generatable", &PageSummary::ai_generatable);

  json summary = {
      {"schema_version", 1},
      {"pages", ok.size()},
      {"failed_inputs", result.pages.size() - ok.size()},
      {"config",
       {{"network",
         {{"downlink_bps", config.network.downlink_bps},
          {"uplink_bps", config.network.uplink_bps},
          {"rtt_ms", config.network.rtt_ms}}},
        {"device", config.device.name},
        {"viewport", std::to_string(config.viewport.width) + "x" +
                         std::to_string(config.viewport.height)},
        {"target_width", config.target_width}}},
      {"median",
       {{"fetched", median(column(&PageSummary::fetched))},
        {"visible", median(column(&PageSummary::visible))},
        {"already_small", median(column(&PageSummary::already_small))},
        {"ai_generatable", median(column(&PageSummary::ai_generatable))}}}};
  if (today) {
    summary["median"]["delta_plt_today_s"] = median(column(&PageSummary::delta_plt_today));
    summary["median"]["delta_bytes_today"] = median(column(&PageSummary::delta_bytes_today));
    summary["median"]["ai_generated"] = median(column(&PageSummary::ai_generated));
  }
  if (full) {
    summary["median"]["delta_plt_full_s"] = median(column(&PageSummary::delta_plt_full));
    summary["median"]["delta_bytes_full"] = median(column(&PageSummary::delta_bytes_full));
  }
  auto f = open("summary.json");
  f << summary.dump(2) << '\n';
}

}  // namespace pixlift::analyzer
