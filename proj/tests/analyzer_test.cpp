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

#include <gtest/gtest.h>

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixture_server.hpp"
#include "oracles.hpp"
#include "pixlift/analyzer.hpp"
#include "pixlift/codec.hpp"
#include "pixlift/errors.hpp"

namespace pixlift::analyzer {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(n);
  return out;
}

json har_entry(const std::string& url, const std::string& mime, std::uint64_t bytes,
               json image = nullptr) {
  json e = {{"request", {{"method", "GET"}, {"url", url}}},
            {"response",
             {{"status", 200},
              {"bodySize", bytes},
              {"content", {{"size", bytes}, {"mimeType", mime}}}}}};
  if (!image.is_null()) e["_image"] = image;
  return e;
}

std::string har(const std::vector<json>& entries, const std::string& page = "") {
  json log = {{"version", "1.2"}, {"entries", entries}};
  if (!page.empty()) {
    log["pages"] = json::array({{{"id", "page_1"}, {"title", page}}});
    for (auto& e : log["entries"]) e["pageref"] = "page_1";
  }
  return json{{"log", log}}.dump();
}

ImageEntry image_entry(std::string url, std::uint64_t bytes, int width, int height, bool visible) {
  ImageEntry e;
  e.url = std::move(url);
  e.bytes = bytes;
  e.width = width;
  e.height = height;
  e.content_type = "image/jpeg";
  e.visible = visible;
  return e;
}

// ---- ingestion ----

TEST(IngestTest, HarKeepsOnlyImages) {
  std::vector<json> entries = {har_entry("http://p.ex/", "text/html", 4000)};
  for (int i = 0; i < 5; ++i) {
    entries.push_back(har_entry("http://p.ex/i" + std::to_string(i) + ".jpg", "image/jpeg", 1000 + i,
                                {{"width", 600}, {"height", 400}, {"visible", i < 2}}));
  }
  for (int i = 0; i < 3; ++i) {
    entries.push_back(har_entry("http://p.ex/s" + std::to_string(i) + ".js", "application/javascript", 500));
  }
  const auto pages = ingest_har(har(entries, "http://p.ex/"));
  ASSERT_EQ(pages.size(), 1u);
  EXPECT_EQ(pages[0].page_url, "http://p.ex/");
  ASSERT_EQ(pages[0].images.size(), 5u);
  EXPECT_EQ(pages[0].images[1].bytes, 1001u);
  EXPECT_EQ(pages[0].images[0].visible, true);
  EXPECT_EQ(pages[0].images[4].visible, false);
  EXPECT_EQ(pages[0].images[0].width, 600);
}

TEST(IngestTest, EmptyHarGivesEmptyPage) {
  const auto pages = ingest_har(R"({"log":{"entries":[]}})");
  ASSERT_EQ(pages.size(), 1u);
  EXPECT_TRUE(pages[0].images.empty());
  const auto s = estimate_savings(pages[0], {}, ProbeSource{});
  EXPECT_EQ(s.delta_full(), 0u);
  EXPECT_EQ(s.delta_plt_full, 0.0);
  EXPECT_EQ(s.delta_plt_today, 0.0);
}

TEST(IngestTest, HarBodiesAreDecoded) {
  const auto jpeg = image::encode_jpeg(testing::smooth_image(64, 32, 3), 85);
  auto e = har_entry("http://p.ex/a.jpg", "image/jpeg", jpeg.size());
  e["response"]["content"]["text"] = base64(jpeg);
  e["response"]["content"]["encoding"] = "base64";
  const auto pages = ingest_har(har({e}));
  ASSERT_EQ(pages[0].images.size(), 1u);
  EXPECT_EQ(pages[0].images[0].body, jpeg);
  EXPECT_EQ(pages[0].images[0].width, 64);  // read from the body header
  EXPECT_EQ(pages[0].page_url, "http://p.ex/a.jpg");
}

TEST(IngestTest, MalformedHarEntryReportsIndex) {
  std::vector<json> entries = {har_entry("http://p.ex/a.jpg", "image/jpeg", 10),
                               json{{"request", {{"method", "GET"}}}, {"response", json::object()}}};
  try {
    ingest_har(har(entries));
    FAIL();
  } catch (const IngestError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
  EXPECT_THROW(ingest_har("{"), IngestError);
}

TEST(IngestTest, CsvGroupsByPage) {
  const std::string text =
      "page_url,image_url,bytes,content_type,width,height,visible,display_width\n"
      "http://a.ex/,http://a.ex/1.jpg,1000,image/jpeg,800,600,true,\n"
      "http://b.ex/,http://b.ex/1.png,200,image/png,100,100,false,100\n"
      "http://a.ex/,http://a.ex/2.jpg,3000,image/jpeg,,,,\n"
      "http://a.ex/,http://a.ex/x.js,3000,application/javascript,,,,\n";
  const auto pages = ingest_csv(text);
  ASSERT_EQ(pages.size(), 2u);
  EXPECT_EQ(pages[0].images.size(), 2u);
  EXPECT_FALSE(pages[0].images[1].width);
  EXPECT_EQ(pages[1].images[0].display_width, 100);
}

TEST(IngestTest, CsvMissingBytesReportsRow) {
  const std::string text =
      "page_url,image_url,bytes,content_type,width,height,visible,display_width\n"
      "http://a.ex/,http://a.ex/1.jpg,1000,image/jpeg,800,600,true,\n"
      "http://a.ex/,http://a.ex/2.jpg,,image/jpeg,800,600,true,\n";
  try {
    ingest_csv(text);
    FAIL();
  } catch (const IngestError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
  EXPECT_THROW(ingest_csv("page_url,image_url\nx,y\n"), IngestError);
}

// ---- profiles and the PLT model ----

TEST(DeviceTest, TablePointsAndInterpolation) {
  const auto a12 = DeviceProfile::a12();
  EXPECT_DOUBLE_EQ(a12.upscale_seconds(0), 0.0);
  EXPECT_DOUBLE_EQ(a12.upscale_seconds(1), 1.2);
  EXPECT_DOUBLE_EQ(a12.upscale_seconds(2), 2.0);
  EXPECT_DOUBLE_EQ(a12.upscale_seconds(10), 6.0);
  EXPECT_DOUBLE_EQ(a12.upscale_seconds(6), 4.0);
  EXPECT_DOUBLE_EQ(a12.upscale_seconds(12), 7.0);  // slope 0.5 s past the table
  EXPECT_DOUBLE_EQ(DeviceProfile::a03s().upscale_seconds(10), 5.0);
  EXPECT_DOUBLE_EQ(DeviceProfile::a34().upscale_seconds(10), 2.5);
}

TEST(DeviceTest, MonotoneProperty) {
  for (const auto& d : {DeviceProfile::a12(), DeviceProfile::a03s(), DeviceProfile::a34(),
                        DeviceProfile::parse("custom(1.5,0.25)")}) {
    double prev = 0;
    for (double n = 0; n <= 40; n += 0.5) {
      const double t = d.upscale_seconds(n);
      EXPECT_GE(t, prev) << d.name << " at " << n;
      prev = t;
    }
  }
}

TEST(DeviceTest, Parsing) {
  EXPECT_EQ(DeviceProfile::parse("A12").name, "a12");
  const auto c = DeviceProfile::parse("custom(1:1,4:2)");
  EXPECT_DOUBLE_EQ(c.upscale_seconds(4), 2.0);
  EXPECT_DOUBLE_EQ(DeviceProfile::parse("custom(1.5,0.25)").upscale_seconds(3), 2.0);
  EXPECT_THROW(DeviceProfile::parse("pixel"), ConfigError);
  EXPECT_THROW(DeviceProfile::parse("custom(2:3,1:5)"), ConfigError);
}

TEST(NetworkTest, Parsing) {
  const auto n = NetworkProfile::parse("3gfast");
  EXPECT_DOUBLE_EQ(n.downlink_bps, 1.6e6);
  EXPECT_DOUBLE_EQ(n.uplink_bps, 7.68e5);
  EXPECT_DOUBLE_EQ(n.rtt_ms, 150);
  const auto c = NetworkProfile::parse("custom(8e6,1e6,40)");
  EXPECT_DOUBLE_EQ(c.downlink_bps, 8e6);
  EXPECT_THROW(NetworkProfile::parse("custom(1,2)"), ConfigError);
  EXPECT_THROW(NetworkProfile::parse("custom(-1,2,3)"), ConfigError);
}

TEST(DeltaPltTest, DocumentedExamples) {
  const auto net = NetworkProfile::three_g_fast();
  EXPECT_DOUBLE_EQ(delta_plt(2.5e6, net, DeviceProfile::a12(), 2), 10.5);
  EXPECT_DOUBLE_EQ(delta_plt(0, net, DeviceProfile::a12(), 2), -2.0);
  EXPECT_GE(delta_plt(1e6, net, DeviceProfile::a34(), 3), delta_plt(1e6, net, DeviceProfile::a12(), 3));
}

TEST(DeltaPltTest, LinearAndDownlinkProperty) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng() % 5000000, b = rng() % 5000000;
    const int n = rng() % 12;
    NetworkProfile net;
    net.downlink_bps = 1e5 + rng() % 10000000;
    const auto d = DeviceProfile::a03s();
    const double base = delta_plt(0, net, d, n);
    EXPECT_NEAR(delta_plt(a + b, net, d, n) - base,
                (delta_plt(a, net, d, n) - base) + (delta_plt(b, net, d, n) - base), 1e-9);
    auto faster = net;
    faster.downlink_bps *= 2;
    if (a > 0) EXPECT_LT(delta_plt(a, faster, d, n), delta_plt(a, net, d, n));
  }
}

// ---- classification ----

TEST(ClassifyTest, FigureShapedPage) {
  // 22 fetched, 2 visible, 4 already small.
  PageRecord page{"http://p.ex/", {}};
  for (int i = 0; i < 22; ++i) {
    page.images.push_back(image_entry("http://p.ex/" + std::to_string(i) + ".jpg", 1000,
                                      i < 4 ? 120 : 600, 400, i == 5 || i == 6));
  }
  const auto c = count_classes(classify_images(page, {}, 200));
  EXPECT_EQ(c.fetched, 22);
  EXPECT_EQ(c.visible, 2);
  EXPECT_EQ(c.already_small, 4);
  EXPECT_EQ(c.ai_generatable, 2);
  EXPECT_EQ(c.ai_generated, 0);
  EXPECT_FALSE(c.visibility_estimated);
}

TEST(ClassifyTest, SmallImagesAreNeverGeneratable) {
  PageRecord page{"p", {}};
  for (int i = 0; i < 5; ++i) page.images.push_back(image_entry("u" + std::to_string(i), 10, 100, 100, true));
  EXPECT_EQ(count_classes(classify_images(page, {}, 200)).ai_generatable, 0);
}

TEST(ClassifyTest, HeuristicStacksImages) {
  PageRecord page{"p", {}};
  // Rendered at viewport width 393: heights 393*300/800 = 147.375 each.
  for (int i = 0; i < 8; ++i) {
    auto e = image_entry("u" + std::to_string(i), 10, 800, 300, false);
    e.visible.reset();
    page.images.push_back(e);
  }
  const auto classes = classify_images(page, {393, 852}, 200);
  // 5 * 147.375 = 736.9 fits, 6 * 147.375 = 884.25 does not.
  const auto c = count_classes(classes);
  EXPECT_EQ(c.visible, 5);
  EXPECT_TRUE(c.visibility_estimated);
  EXPECT_TRUE(classes[4].visible);
  EXPECT_FALSE(classes[5].visible);
}

TEST(ClassifyTest, UnknownWidthIsNotSmall) {
  PageRecord page{"p", {image_entry("u", 10, 1, 1, true)}};
  page.images[0].width.reset();
  const auto classes = classify_images(page, {}, 200);
  EXPECT_TRUE(classes[0].width_unknown);
  EXPECT_FALSE(classes[0].already_small);
  EXPECT_TRUE(classes[0].ai_generatable);
}

TEST(ClassifyTest, PartitionProperty) {
  std::mt19937 rng(4);
  std::vector<patterns::SupportProbe> cached;
  for (int trial = 0; trial < 40; ++trial) {
    PageRecord page{"p", {}};
    const int n = rng() % 30;
    const bool flags = rng() % 2;
    for (int i = 0; i < n; ++i) {
      auto e = image_entry("http://h.ex/" + std::to_string(trial) + "/" + std::to_string(i),
                           1 + rng() % 100000, 50 + rng() % 1000, 50 + rng() % 1000, rng() % 2);
      if (!flags) e.visible.reset();
      if (rng() % 5 == 0) e.width.reset();
      if (rng() % 2) {
        patterns::SupportProbe p;
        p.url = e.url;
        p.status = patterns::ProbeStatus::kSupported;
        p.original_bytes = e.bytes;
        p.rewritten_bytes = e.bytes / 4;
        cached.push_back(p);
      }
      page.images.push_back(e);
    }
    const ProbeSource probes(cached);
    for (const auto& c : classify_images(page, {}, 200, &probes)) {
      if (c.ai_generated) EXPECT_TRUE(c.ai_generatable);
      if (c.ai_generatable) EXPECT_TRUE(c.visible);
      EXPECT_FALSE(c.already_small && c.ai_generatable);
    }
  }
}

// ---- savings ----

TEST(SavingsTest, FullModeUsesLocalReencode) {
  const auto original = testing::smooth_image(1600, 1200, 8);
  ImageEntry e = image_entry("http://p.ex/big.jpg", 0, 1600, 1200, true);
  e.body = image::encode_jpeg(original, 95);
  e.bytes = e.body.size();
  const PageRecord page{"http://p.ex/", {e}};
  const auto s = estimate_savings(page, {}, ProbeSource{});
  const auto expect_reduced =
      image::encode_jpeg(image::resize_bilinear(original, 200, 150), 85).size();
  EXPECT_EQ(s.reduced_full, expect_reduced);
  EXPECT_EQ(s.delta_full(), e.bytes - expect_reduced);
  EXPECT_FALSE(s.full_estimated);
  EXPECT_EQ(s.lifted_full, 1);
}

TEST(SavingsTest, FullModeEstimateWithoutBody) {
  // 3.0 MB at 600 px wide -> (200/600)^2 -> 333,333 bytes.
  const PageRecord page{"p", {image_entry("http://p.ex/a.jpg", 3000000, 600, 400, true)}};
  const auto s = estimate_savings(page, {}, ProbeSource{});
  EXPECT_EQ(s.reduced_full, 333333u);
  EXPECT_TRUE(s.full_estimated);
}

TEST(SavingsTest, TodayWithoutSupportSavesNothing) {
  const PageRecord page{"p", {image_entry("http://p.ex/a.jpg?width=800", 50000, 800, 600, true)}};
  const auto s = estimate_savings(page, {}, ProbeSource{});
  EXPECT_EQ(s.delta_today(), 0u);
  EXPECT_EQ(s.delta_plt_today, 0.0);
  EXPECT_GT(s.delta_full(), 0u);
}

TEST(SavingsTest, TodayCountsOnlyHonouringHosts) {
  testing::FixtureOrigin honour;
  testing::FixtureOrigin ignore({.honor_resize = false});
  PageRecord page{"http://p.ex/", {}};
  for (int i = 0; i < 4; ++i) {
    auto& origin = i % 2 ? ignore : honour;
    page.images.push_back(image_entry(origin.url("/img/p" + std::to_string(i) + ".jpg?width=800"),
                                      origin.original_jpeg().size(), 800, 600, true));
  }
  const auto registry = patterns::Registry::defaults();
  ProbeSource probes;
  probes.enable_live(std::make_shared<http::HttpFetcher>(), &registry, 200);
  const auto s = estimate_savings(page, {}, probes);
  std::uint64_t expected = 0;
  for (int i = 0; i < 4; i += 2) {
    const auto p = probes.lookup(page.images[i].url);
    ASSERT_EQ(p->status, patterns::ProbeStatus::kSupported);
    expected += page.images[i].bytes - *p->rewritten_bytes;
  }
  EXPECT_EQ(s.delta_today(), expected);
  EXPECT_EQ(s.lifted_today, 2);
  EXPECT_EQ(s.counts.ai_generated, 2);
  EXPECT_GE(s.delta_full(), s.delta_today());
}

TEST(SavingsTest, FullNeverBelowTodayProperty) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    PageRecord page{"p", {}};
    std::vector<patterns::SupportProbe> cached;
    for (int i = 0; i < 10; ++i) {
      auto e = image_entry("http://h.ex/" + std::to_string(i), 1000 + rng() % 900000,
                           100 + rng() % 1500, 100 + rng() % 900, rng() % 3 != 0);
      patterns::SupportProbe p;
      p.url = e.url;
      p.status = rng() % 2 ? patterns::ProbeStatus::kSupported : patterns::ProbeStatus::kUnsupported;
      p.original_bytes = e.bytes;
      p.rewritten_bytes = 1 + rng() % e.bytes;
      cached.push_back(p);
      page.images.push_back(e);
    }
    const auto s = estimate_savings(page, {}, ProbeSource(cached));
    EXPECT_LE(s.reduced_full, s.reduced_today);
    EXPECT_LE(s.reduced_today, s.original_bytes);
  }
}

// ---- aggregation and reports ----

TEST(AggregateTest, MedianAndCdf) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_DOUBLE_EQ(median({}), 0);
  const auto cdf = empirical_cdf({3, 1, 2, 2});
  ASSERT_EQ(cdf.size(), 4u);
  EXPECT_DOUBLE_EQ(cdf.front().first, 1);
  EXPECT_DOUBLE_EQ(cdf.back().second, 1.0);
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    EXPECT_LE(cdf[i - 1].first, cdf[i].first);
    EXPECT_LE(cdf[i - 1].second, cdf[i].second);
  }
  EXPECT_EQ(format_number(10.5), "10.5");
  EXPECT_EQ(format_number(-0.0000001), "0");
  EXPECT_EQ(format_number(156250), "156250");
}

TEST(AggregateTest, RepeatedLoadsUseMedian) {
  std::vector<PageSavings> loads(5);
  const double plts[] = {9, 1, 7, 30, 6};
  for (int i = 0; i < 5; ++i) {
    loads[i].page_url = "p";
    loads[i].delta_plt_full = plts[i];
    loads[i].original_bytes = 100 * (i + 1);
  }
  const auto s = summarize_loads(loads);
  EXPECT_EQ(s.loads, 5);
  EXPECT_DOUBLE_EQ(s.delta_plt_full, 7);
  EXPECT_DOUBLE_EQ(s.original_bytes, 300);
}

// Each page has k visible 600 px images of b bytes. Full-mode delta PLT on an
// A12 is k*b*(8/9)*8/1.6e6 - upscale(k).
PageRecord constructed_page(const std::string& url, int images, std::uint64_t bytes) {
  PageRecord p{url, {}};
  for (int i = 0; i < images; ++i) {
    p.images.push_back(image_entry(url + "/i" + std::to_string(i) + ".jpg", bytes, 600, 400, true));
  }
  return p;
}

TEST(CorpusTest, MedianOfConstructedCorpus) {
  // Invert the model for a 7 s median: with two images, 7 + 2.0 = 9 s of
  // transfer is 1.8e6 saved bytes, i.e. 900,000 saved per image, so each
  // image is 900,000 * 9/8 = 1,012,500 bytes.
  std::vector<CorpusInput> inputs(1);
  inputs[0].source = "x";
  inputs[0].pages = {constructed_page("http://a", 2, 1012500),
                     constructed_page("http://b", 2, 500000),
                     constructed_page("http://c", 2, 2000000),
                     constructed_page("http://d", 2, 1012500),
                     constructed_page("http://e", 2, 1500)};
  const auto result = analyze_corpus(inputs, {}, ProbeSource{}, 3);
  std::vector<double> plts;
  for (const auto& p : result.pages) plts.push_back(p.delta_plt_full);
  EXPECT_NEAR(median(plts), 7.0, 0.1);
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(CorpusTest, ReportFilesAndDeterminism) {
  const auto in = fresh_dir("pixlift_corpus_in");
  {
    std::ofstream(in / "a.har") << har({har_entry("http://a.ex/1.jpg", "image/jpeg", 1406250,
                                                  {{"width", 600}, {"height", 400}, {"visible", true}}),
                                        har_entry("http://a.ex/2.jpg", "image/jpeg", 1406250,
                                                  {{"width", 600}, {"height", 400}, {"visible", true}})},
                                       "http://a.ex/");
    std::ofstream(in / "b.csv")
        << "page_url,image_url,bytes,content_type,width,height,visible,display_width\n"
           "http://b.ex/,http://b.ex/1.jpg,50000,image/jpeg,150,100,true,\n"
           "http://c.ex/,http://c.ex/1.jpg,90000,image/jpeg,900,600,true,\n"
           "http://c.ex/,http://c.ex/2.jpg,90000,image/jpeg,900,600,false,\n";
    std::ofstream(in / "broken.har") << "{nope";
  }
  const auto corpus = load_corpus(in);
  ASSERT_EQ(corpus.size(), 3u);
  const auto result = analyze_corpus(corpus, {}, ProbeSource{}, 2);
  ASSERT_EQ(result.pages.size(), 4u);  // 3 pages + 1 failed input

  const auto out1 = fresh_dir("pixlift_corpus_out1");
  const auto out2 = fresh_dir("pixlift_corpus_out2");
  write_report(result, {}, ReportMode::kBoth, out1);
  write_report(analyze_corpus(load_corpus(in), {}, ProbeSource{}, 1), {}, ReportMode::kBoth, out2);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(out1)) {
    EXPECT_EQ(slurp(e.path()), slurp(out2 / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_GE(files, 11u);

  const auto pages_csv = slurp(out1 / "pages.csv");
  EXPECT_NE(pages_csv.find("http://a.ex/,1,2812500,0,0,2500000,10.5,"), std::string::npos)
      << pages_csv;
  EXPECT_NE(pages_csv.find("broken.har"), std::string::npos);

  std::ifstream cdf(out1 / "cdf_delta_plt_full.txt");
  std::string line;
  std::getline(cdf, line);
  EXPECT_EQ(line[0], '#');
  double prev_x = -1e300, prev_y = 0, x = 0, y = 0;
  int rows = 0;
  while (cdf >> x >> y) {
    EXPECT_GE(x, prev_x);
    EXPECT_GE(y, prev_y);
    prev_x = x;
    prev_y = y;
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_DOUBLE_EQ(prev_y, 1.0);

  const auto summary = json::parse(slurp(out1 / "summary.json"));
  EXPECT_EQ(summary.at("pages"), 3);
  EXPECT_EQ(summary.at("failed_inputs"), 1);
}

}  // namespace
}  // namespace pixlift::analyzer
