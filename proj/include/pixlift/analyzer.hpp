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
#include <filesystem>
#include <map>
#include <mutex>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pixlift/http.hpp"
#include "pixlift/patterns.hpp"

// Desk-scale page analysis: ingest captures, classify images, estimate byte
// and page-load-time savings, and write corpus reports.
namespace pixlift::analyzer {

struct ImageEntry {
  std::string url;
  std::uint64_t bytes = 0;
  std::optional<int> width;
  std::optional<int> height;
  std::string content_type;
  std::optional<bool> visible;
  std::optional<int> display_width;
  // Response body when the capture carries it (enables local re-encoding).
  std::string body;
};

struct PageRecord {
  std::string page_url;
  std::vector<ImageEntry> images;
};

enum class CaptureFormat { kHar, kCsv };

// HAR: entries grouped by pageref (one page when no pages are listed); only
// image responses with a positive byte count are kept. Optional per-entry
// "_image" object {width, height, visible, display_width}; base64 bodies are
// kept. CSV columns: page_url,image_url,bytes,content_type,width,height,
// visible,display_width (rows grouped by page_url in first-seen order).
// Malformed input throws IngestError with the entry or row index.
std::vector<PageRecord> ingest_capture(std::string_view bytes, CaptureFormat format);
std::vector<PageRecord> ingest_har(std::string_view bytes);
std::vector<PageRecord> ingest_csv(std::string_view bytes);

struct NetworkProfile {
  double downlink_bps = 1.6e6;
  double uplink_bps = 7.68e5;
  double rtt_ms = 150.0;

  static NetworkProfile three_g_fast() { return {}; }
  // "3gfast" or "custom(D,U,RTT)" with bits/s and milliseconds.
  static NetworkProfile parse(std::string_view text);
  std::string describe() const;
};

// Upscale time as a function of image count: piecewise-linear through the
// table points (plus the origin), extended with the last segment's slope.
struct DeviceProfile {
  std::string name;
  std::vector<std::pair<int, double>> table;

  double upscale_seconds(double images) const;

  static DeviceProfile a12();
  static DeviceProfile a03s();
  static DeviceProfile a34();
  // "a12", "a03s", "a34", "custom(n:s,n:s,...)" or "custom(first,per_image)".
  static DeviceProfile parse(std::string_view text);
};

struct Viewport {
  int width = 393;
  int height = 852;
};

// Serialized-transfer model: bytes * 8 / downlink minus device upscale time
// for the lifted images. Negative values are slowdowns.
double delta_plt(double delta_bytes, const NetworkProfile& network,
                 const DeviceProfile& device, double images_lifted);

struct ImageClass {
  bool visible = false;
  bool visibility_estimated = false;
  bool already_small = false;
  bool width_unknown = false;
  bool ai_generatable = false;
  bool ai_generated = false;
};

struct ClassCounts {
  int fetched = 0;
  int visible = 0;
  int already_small = 0;
  int ai_generatable = 0;
  int ai_generated = 0;
  int width_unknown = 0;
  bool visibility_estimated = false;
};

// Supported-probe lookup for Today mode. Exact URL hits win; otherwise a
// live prober, when configured, is asked once per URL.
class ProbeSource {
 public:
  ProbeSource() = default;
  explicit ProbeSource(std::vector<patterns::SupportProbe> cached);
  void enable_live(std::shared_ptr<http::Fetcher> fetcher, const patterns::Registry* registry,
                   int target_width);

  // Thread-safe; live results are memoized.
  std::optional<patterns::SupportProbe> lookup(const std::string& url) const;
  std::size_t size() const { return cache_.size(); }

 private:
  struct Live;
  std::map<std::string, patterns::SupportProbe, std::less<>> cache_;
  std::shared_ptr<Live> live_;
};

// Visibility comes from the capture; when any image lacks it, every image is
// placed by a heuristic (stacked in document order at rendered size, visible
// while the stack still fits the viewport height) and flagged as estimated.
// ai_generated needs a Supported probe, so it is always false without one.
std::vector<ImageClass> classify_images(const PageRecord& page, const Viewport& viewport,
                                        int target_width, const ProbeSource* probes = nullptr);
ClassCounts count_classes(const std::vector<ImageClass>& classes);

struct AnalyzerConfig {
  NetworkProfile network;
  DeviceProfile device = DeviceProfile::a12();
  Viewport viewport;
  int target_width = 200;
  int jpeg_quality = 85;
};

struct PageSavings {
  std::string page_url;
  std::uint64_t original_bytes = 0;
  std::uint64_t reduced_today = 0;
  std::uint64_t reduced_full = 0;
  int lifted_today = 0;
  int lifted_full = 0;
  double delta_plt_today = 0.0;
  double delta_plt_full = 0.0;
  ClassCounts counts;
  // Some Full-mode sizes are (target/width)^2 estimates, not re-encodes.
  bool full_estimated = false;

  std::uint64_t delta_today() const { return original_bytes - reduced_today; }
  std::uint64_t delta_full() const { return original_bytes - reduced_full; }
};

// Bytes of the image after a local downscale to target_width and re-encode
// in its own format (JPEG at `quality`); nullopt when the body does not
// decode.
std::optional<std::uint64_t> reencoded_size(const ImageEntry& image, int target_width,
                                            int quality);

PageSavings estimate_savings(const PageRecord& page, const AnalyzerConfig& config,
                             const ProbeSource& probes);

enum class ReportMode { kToday, kFull, kBoth };
std::optional<ReportMode> parse_report_mode(std::string_view text);

// One row per page URL: repeated loads reduced by median.
struct PageSummary {
  std::string page_url;
  int loads = 0;
  double original_bytes = 0;
  double delta_bytes_today = 0;
  double delta_bytes_full = 0;
  double delta_plt_today = 0;
  double delta_plt_full = 0;
  double fetched = 0;
  double visible = 0;
  double already_small = 0;
  double ai_generatable = 0;
  double ai_generated = 0;
  bool visibility_estimated = false;
  bool full_estimated = false;
  std::string error;
};

double median(std::vector<double> values);
PageSummary summarize_loads(const std::vector<PageSavings>& loads);

// (x, F(x)) pairs: x ascending, F = i/n, last value 1.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values);

struct CorpusInput {
  std::string source;  // file name, for error rows
  std::vector<PageRecord> pages;
  std::string error;
};

// Reads *.har and *.csv capture files from dir in name order. A probes.csv
// file in the directory is taken as the Today probe cache, not a capture.
std::vector<CorpusInput> load_corpus(const std::filesystem::path& dir);

struct CorpusResult {
  std::vector<PageSummary> pages;  // sorted by page URL
};

CorpusResult analyze_corpus(const std::vector<CorpusInput>& inputs, const AnalyzerConfig& config,
                            const ProbeSource& probes, int parallelism = 1);

// Writes pages.csv, cdf_*.txt and summary.json. Output depends only on the
// inputs (no timestamps), so repeated runs are byte-identical.
void write_report(const CorpusResult& result, const AnalyzerConfig& config, ReportMode mode,
                  const std::filesystem::path& out_dir);

// Fixed-precision text for report numbers (trailing zeros trimmed).
std::string format_number(double value);

}  // namespace pixlift::analyzer
