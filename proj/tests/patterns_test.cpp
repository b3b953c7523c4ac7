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

#include <algorithm>
#include <array>
#include <random>
#include <sstream>

#include "fixture_server.hpp"
#include "pixlift/errors.hpp"
#include "pixlift/patterns.hpp"
#include "url_corpus.hpp"

namespace pixlift::patterns {
namespace {

constexpr std::string_view kThreeDocumented =
    "# the three most common patterns\n"
    "width_query\t[?&]width=(\\d+)\t{prefix}{width}{suffix}\t0.465\n"
    "q_w\t[?&]q=w_(\\d+)\t{prefix}{width}{suffix}\t0.213\n"
    "\n"
    "dw_suffix\t[?&]_(\\d+)w(?=$|&)\t{prefix}{width}{suffix}\t0.174\n";

TEST(RegistryTest, LoadsInFileOrder) {
  const auto reg = Registry::load(kThreeDocumented);
  ASSERT_EQ(reg.size(), 3u);
  EXPECT_EQ(reg.patterns()[0].id, "width_query");
  EXPECT_EQ(reg.patterns()[1].id, "q_w");
  EXPECT_EQ(reg.patterns()[2].id, "dw_suffix");
  EXPECT_DOUBLE_EQ(*reg.patterns()[0].prevalence, 0.465);
}

TEST(RegistryTest, EmptyFileNeverMatches) {
  const auto reg = Registry::load("");
  EXPECT_TRUE(reg.empty());
  EXPECT_FALSE(reg.detect("https://cdn.ex/a.jpg?width=800"));
}

TEST(RegistryTest, DuplicateIdNamesTheId) {
  try {
    Registry::load("a\t[?&]w=(\\d+)\t{prefix}{width}{suffix}\n"
                   "a\t[?&]x=(\\d+)\t{prefix}{width}{suffix}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(RegistryTest, MalformedExpressionNamesPatternAndLine) {
  try {
    Registry::load("# header\nbroken\t[?&width=(\\d+\t{prefix}{width}{suffix}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("'broken'"), std::string::npos) << what;
    EXPECT_NE(what.find("line 2"), std::string::npos) << what;
  }
}

TEST(RegistryTest, RequiresExactlyOneCaptureGroup) {
  EXPECT_THROW(Registry::load("two\t(a)(\\d+)\t{prefix}{width}{suffix}\n"), ConfigError);
  EXPECT_THROW(Registry::load("none\t\\d+\t{prefix}{width}{suffix}\n"), ConfigError);
  EXPECT_THROW(Registry::load("nowidth\t(\\d+)\t{prefix}{suffix}\n"), ConfigError);
  EXPECT_THROW(Registry::load("short\t(\\d+)\n"), ConfigError);
}

TEST(DetectTest, DocumentedExamples) {
  const auto reg = Registry::defaults();
  const auto m1 = reg.detect("https://cdn.ex/a.jpg?width=800");
  ASSERT_TRUE(m1);
  EXPECT_EQ(m1->pattern_id, "width_query");
  EXPECT_EQ(m1->original_width, 800);

  EXPECT_FALSE(reg.detect("https://cdn.ex/a.jpg"));

  const auto m2 = reg.detect("https://cdn.ex/a.jpg?q=w_640");
  ASSERT_TRUE(m2);
  EXPECT_EQ(m2->pattern_id, "q_w");
  EXPECT_EQ(m2->original_width, 640);

  const auto m3 = reg.detect("https://cdn.ex/a.jpg?_960w");
  ASSERT_TRUE(m3);
  EXPECT_EQ(m3->pattern_id, "dw_suffix");
  EXPECT_EQ(m3->original_width, 960);
}

TEST(DetectTest, NamedSizesAreDetectionOnly) {
  const auto reg = Registry::defaults();
  const std::string url = "https://shop.ex/resize/large/p/1.jpg";
  const auto m = reg.detect(url);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->pattern_id, "resize_named");
  EXPECT_FALSE(m->original_width);
  EXPECT_THROW(reg.rewrite(url, *m, 200), NoReductionError);
}

TEST(DetectTest, SpanLiesWithinUrl) {
  const auto reg = Registry::defaults();
  for (const auto& g : testing::generate_url_corpus(300, 17)) {
    const auto m = reg.detect(g.url);
    ASSERT_TRUE(m) << g.url;
    EXPECT_LT(m->begin, m->end);
    EXPECT_LE(m->end, g.url.size());
    EXPECT_EQ(g.url.substr(m->begin, m->end - m->begin), std::to_string(g.width));
  }
}

TEST(DetectTest, FirstMatchWins) {
  const auto reg = Registry::load(
      "second\twidth=(\\d+)\t{prefix}{width}{suffix}\n"
      "first\t[?&]width=(\\d+)\t{prefix}{width}{suffix}\n");
  EXPECT_EQ(reg.detect("http://a/b.jpg?width=5")->pattern_id, "second");
}

TEST(RewriteTest, DocumentedExamples) {
  const auto reg = Registry::defaults();
  const std::string u1 = "https://cdn.ex/a.jpg?width=800";
  EXPECT_EQ(reg.rewrite(u1, *reg.detect(u1), 200), "https://cdn.ex/a.jpg?width=200");

  const std::string u2 = "https://cdn.ex/a.jpg?width=200";
  EXPECT_THROW(reg.rewrite(u2, *reg.detect(u2), 200), NoReductionError);

  const std::string u3 = "https://cdn.ex/a.jpg?q=w_640";
  const auto out = reg.rewrite(u3, *reg.detect(u3), 200);
  EXPECT_EQ(out, "https://cdn.ex/a.jpg?q=w_200");
  EXPECT_EQ(reg.detect(out)->original_width, 200);
}

TEST(RewriteTest, RoundTripAndIdempotenceProperty) {
  const auto reg = Registry::defaults();
  std::mt19937 rng(23);
  for (const auto& g : testing::generate_url_corpus(700, 29)) {
    const auto m = reg.detect(g.url);
    ASSERT_TRUE(m) << g.url;
    ASSERT_EQ(m->pattern_id, g.pattern_id) << g.url;
    const int target = 1 + static_cast<int>(rng() % (g.width - 1));
    const auto rewritten = reg.rewrite(g.url, *m, target);
    const auto again = reg.detect(rewritten);
    ASSERT_TRUE(again);
    EXPECT_EQ(again->pattern_id, g.pattern_id);
    EXPECT_EQ(again->original_width, target) << rewritten;
    // Only the width token changes.
    EXPECT_EQ(rewritten.substr(0, m->begin), g.url.substr(0, m->begin));
    EXPECT_EQ(rewritten.substr(again->end), g.url.substr(m->end));
    EXPECT_EQ(reg.substitute(rewritten, *again, target), rewritten);
  }
}

TEST(DetectTest, DeterministicAndPure) {
  const auto reg = Registry::defaults();
  for (const auto& g : testing::generate_url_corpus(50, 31)) {
    const auto a = reg.detect(g.url);
    const auto b = reg.detect(g.url);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->pattern_id, b->pattern_id);
    EXPECT_EQ(a->begin, b->begin);
    EXPECT_EQ(a->original_width, b->original_width);
  }
}

TEST(ClassifyPageTest, Examples) {
  const bool all[] = {true, true, true};
  const auto full = classify_page(all);
  EXPECT_EQ(full.kind, SupportClass::kFull);
  EXPECT_DOUBLE_EQ(full.resizable_fraction, 1.0);

  const bool partial[] = {true, false, false, false};
  const auto p = classify_page(partial);
  EXPECT_EQ(p.kind, SupportClass::kPartial);
  EXPECT_DOUBLE_EQ(p.resizable_fraction, 0.25);

  const auto none = classify_page({});
  EXPECT_EQ(none.kind, SupportClass::kNone);
  EXPECT_DOUBLE_EQ(none.resizable_fraction, 0.0);

  const bool zero[] = {false, false};
  EXPECT_EQ(classify_page(zero).kind, SupportClass::kNone);
}

TEST(ClassifyPageTest, PermutationInvariant) {
  std::mt19937 rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    std::array<bool, 20> flags{};
    const std::size_t n = rng() % flags.size();
    for (std::size_t i = 0; i < n; ++i) flags[i] = rng() % 2;
    const auto a = classify_page({flags.data(), n});
    std::shuffle(flags.begin(), flags.begin() + n, rng);
    const auto b = classify_page({flags.data(), n});
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_DOUBLE_EQ(a.resizable_fraction, b.resizable_fraction);
  }
}

// ---- probing against a local origin ----

TEST(ProbeTest, HonouringOriginIsSupported) {
  testing::FixtureOrigin origin;
  http::HttpFetcher fetcher;
  const auto reg = Registry::defaults();
  const auto p = probe(origin.url("/img/a.jpg?width=800"), reg, fetcher, 200);
  EXPECT_EQ(p.status, ProbeStatus::kSupported) << p.note;
  ASSERT_TRUE(p.original_bytes && p.rewritten_bytes);
  EXPECT_LT(*p.rewritten_bytes, *p.original_bytes);
  EXPECT_EQ(p.rewritten_width, 200);
  EXPECT_EQ(p.original_width, 800);
}

TEST(ProbeTest, IgnoringOriginIsUnsupported) {
  testing::FixtureOrigin origin({.honor_resize = false});
  http::HttpFetcher fetcher;
  const auto p = probe(origin.url("/img/a.jpg?width=800"), Registry::defaults(), fetcher, 200);
  EXPECT_EQ(p.status, ProbeStatus::kUnsupported);
  EXPECT_EQ(p.original_bytes, p.rewritten_bytes);
}

TEST(ProbeTest, UnreachableHostIsInconclusive) {
  http::HttpFetcher fetcher;
  const auto url = "http://127.0.0.1:" + std::to_string(testing::unused_port()) +
                   "/img/a.jpg?width=800";
  const auto p = probe(url, Registry::defaults(), fetcher, 200);
  EXPECT_EQ(p.status, ProbeStatus::kInconclusive);
}

TEST(ProbeTest, NonImageContentIsInconclusive) {
  testing::FixtureOrigin origin;
  http::HttpFetcher fetcher;
  const auto p = probe(origin.url("/page.html?width=800"), Registry::defaults(), fetcher, 200);
  EXPECT_EQ(p.status, ProbeStatus::kInconclusive);
}

TEST(ProbeTest, ConcurrentProbesKeepOrder) {
  testing::FixtureOrigin honour;
  testing::FixtureOrigin ignore({.honor_resize = false});
  http::HttpFetcher fetcher;
  std::vector<std::string> urls;
  for (int i = 0; i < 6; ++i) {
    urls.push_back((i % 2 ? ignore : honour).url("/img/p" + std::to_string(i) + ".jpg?width=800"));
  }
  const auto probes = probe_all(urls, Registry::defaults(), fetcher, 200, 3);
  ASSERT_EQ(probes.size(), urls.size());
  for (std::size_t i = 0; i < urls.size(); ++i) {
    EXPECT_EQ(probes[i].url, urls[i]);
    EXPECT_EQ(probes[i].status, i % 2 ? ProbeStatus::kUnsupported : ProbeStatus::kSupported);
    if (probes[i].status == ProbeStatus::kSupported) {
      EXPECT_LT(*probes[i].rewritten_bytes, *probes[i].original_bytes);
    }
  }
}

TEST(ProbeCsvTest, WritesDocumentedColumnsAndReadsBack) {
  SupportProbe a;
  a.url = "https://cdn.ex/a.jpg?width=800";
  a.pattern_id = "width_query";
  a.status = ProbeStatus::kSupported;
  a.original_bytes = 5000;
  a.rewritten_bytes = 900;
  SupportProbe b;
  b.url = "http://x.ex/b,c.jpg?w=640";
  b.pattern_id = "w_query";
  b.status = ProbeStatus::kInconclusive;
  std::ostringstream out;
  const SupportProbe probes[] = {a, b};
  write_probe_csv(out, probes);
  EXPECT_EQ(out.str(),
            "domain,url,pattern_id,status,orig_bytes,new_bytes\n"
            "cdn.ex,https://cdn.ex/a.jpg?width=800,width_query,supported,5000,900\n"
            "x.ex,\"http://x.ex/b,c.jpg?w=640\",w_query,inconclusive,,\n");
  std::istringstream in(out.str());
  const auto back = read_probe_csv(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].url, b.url);
  EXPECT_EQ(back[0].rewritten_bytes, 900u);
  EXPECT_FALSE(back[1].original_bytes);
}

}  // namespace
}  // namespace pixlift::patterns
