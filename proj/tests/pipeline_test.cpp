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

#include <map>
#include <random>

#include "oracles.hpp"
#include "pixlift/codec.hpp"
#include "pixlift/errors.hpp"
#include "pixlift/pipeline.hpp"

namespace pixlift::pipeline {
namespace {

using namespace std::chrono_literals;

std::shared_ptr<const sr::Model> model(sr::Model m) {
  return std::make_shared<const sr::Model>(std::move(m));
}

std::string jpeg(int w, int h, std::uint32_t seed = 1) {
  return image::encode_jpeg(testing::smooth_image(w, h, seed), 85);
}

std::string png(const image::ImageBuffer& img) { return image::encode_png(img); }

TEST(PreprocessTest, NonSquareJpegBecomesModelInput) {
  const auto rgb = image::decode(jpeg(200, 150));
  const auto t = preprocess(rgb, 128);
  EXPECT_EQ(t.shape(), (std::vector<std::size_t>{1, 3, 128, 128}));
  for (float v : t.data()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST(PreprocessTest, ModelSizedInputIsPlainConversion) {
  std::mt19937 rng(1);
  const auto img = testing::random_image(rng, 128, 128, 3);
  EXPECT_EQ(preprocess(img, 128), image::to_tensor(img, Layout::kNCHW));
}

TEST(PostprocessTest, DirectAndResized) {
  std::mt19937 rng(2);
  const auto t = testing::random_tensor(rng, {1, 3, 512, 512}, Layout::kNCHW, 0.0f, 1.0f);
  EXPECT_EQ(postprocess(t, {512, 512}), image::from_tensor(t));
  const auto small = postprocess(t, {400, 300});
  EXPECT_EQ(small.width(), 400);
  EXPECT_EQ(small.height(), 300);
}

TEST(PostprocessTest, OvershootClamps) {
  Tensor t({1, 3, 2, 2}, Layout::kNCHW);
  for (auto& v : t.data()) v = 1.2f;
  const auto img = postprocess(t, {2, 2});
  for (auto s : img.samples()) EXPECT_EQ(s, 255);
  EXPECT_THROW(postprocess(Tensor({1, 2, 2, 2}, Layout::kNCHW), {2, 2}), ShapeError);
}

TEST(StateTest, TransitionTable) {
  EXPECT_TRUE(legal_transition(JobState::kQueued, JobState::kPreprocessing));
  EXPECT_TRUE(legal_transition(JobState::kInferring, JobState::kPostprocessing));
  EXPECT_TRUE(legal_transition(JobState::kInferring, JobState::kFailed));
  EXPECT_FALSE(legal_transition(JobState::kQueued, JobState::kInferring));
  EXPECT_FALSE(legal_transition(JobState::kDone, JobState::kFailed));
  EXPECT_FALSE(legal_transition(JobState::kFailed, JobState::kQueued));
}

TEST(PipelineTest, SingleJobMetrics) {
  Pipeline p(model(sr::bilinear_model(4)));
  const auto r = p.run_now({jpeg(200, 150), std::nullopt, std::nullopt, "one"});
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_EQ(r.image.width(), 800);
  EXPECT_EQ(r.image.height(), 600);
  const auto& m = r.metrics;
  EXPECT_GE(m.total_ms + 1.0, m.preprocess_ms + m.inference_ms + m.postprocess_ms);
  EXPECT_EQ(m.output_pixels, 800u * 600u);
  EXPECT_FALSE(m.psnr);
  EXPECT_EQ(r.model, "bilinear_x4");
}

TEST(PipelineTest, TargetDimsHonoured) {
  Pipeline p(model(sr::bilinear_model(4)));
  const auto r = p.run_now({jpeg(200, 150), Dims{400, 300}, std::nullopt, ""});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.image.width(), 400);
  EXPECT_EQ(r.image.height(), 300);
}

TEST(PipelineTest, AlphaIsCarriedThrough) {
  image::ImageBuffer rgba(32, 16, 4);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) {
      rgba.at(x, y, 0) = 200;
      rgba.at(x, y, 3) = 77;
    }
  Pipeline p(model(sr::nearest_model(2)), {.input_side = 16});
  const auto r = p.run_now({png(rgba), Dims{64, 32}, std::nullopt, ""});
  ASSERT_TRUE(r.ok()) << r.error;
  ASSERT_EQ(r.image.channels(), 4);
  EXPECT_EQ(r.image.at(10, 10, 3), 77);
  EXPECT_EQ(r.image.at(10, 10, 0), 200);
}

TEST(PipelineTest, CorruptJobFailsAndQueueContinues) {
  Pipeline p(model(sr::bilinear_model(2)));
  auto bad = p.submit({"not an image", std::nullopt, std::nullopt, "bad"});
  auto good = p.submit({jpeg(64, 48), std::nullopt, std::nullopt, "good"});
  const auto rb = bad.result.get();
  EXPECT_EQ(rb.state, JobState::kFailed);
  EXPECT_EQ(rb.error_kind, "DecodeError");
  EXPECT_TRUE(good.result.get().ok());
  p.drain();
  EXPECT_EQ(p.counts().failed, 1u);
  EXPECT_EQ(p.counts().done, 1u);
}

TEST(PipelineTest, ShutdownRejectsSubmissions) {
  Pipeline p(model(sr::bilinear_model(2)));
  p.shutdown();
  EXPECT_THROW(p.submit({jpeg(8, 8), std::nullopt, std::nullopt, ""}), ShutdownError);
}

TEST(PipelineTest, InvalidConfigRejected) {
  EXPECT_THROW(Pipeline(model(sr::bilinear_model(2)), {.max_concurrent = 0}), ConfigError);
}

// Replays the transition log, checking legality and the in-flight bound.
void check_log(const std::vector<Transition>& log, int bound, std::size_t jobs) {
  std::map<std::uint64_t, JobState> state;
  int in_flight = 0, peak = 0;
  for (const auto& t : log) {
    const auto it = state.find(t.job_id);
    const JobState current = it == state.end() ? JobState::kQueued : it->second;
    ASSERT_EQ(current, t.from) << "job " << t.job_id;
    ASSERT_TRUE(legal_transition(t.from, t.to))
        << to_string(t.from) << " -> " << to_string(t.to);
    if (t.from == JobState::kQueued) ++in_flight;
    if (t.to == JobState::kDone || t.to == JobState::kFailed) --in_flight;
    peak = std::max(peak, in_flight);
    ASSERT_LE(in_flight, bound);
    state[t.job_id] = t.to;
  }
  EXPECT_EQ(state.size(), jobs);
  for (const auto& [id, s] : state) {
    EXPECT_TRUE(s == JobState::kDone || s == JobState::kFailed) << "job " << id;
  }
}

TEST(SchedulerTest, TenJobsPeakTwo) {
  PipelineConfig cfg;
  cfg.input_side = 16;
  cfg.delays.inference = 30ms;
  Pipeline p(model(sr::nearest_model(2)), cfg);
  std::vector<JobHandle> handles;
  for (int i = 0; i < 10; ++i) {
    handles.push_back(p.submit({jpeg(16, 16, i + 1), std::nullopt, std::nullopt, ""}));
  }
  for (auto& h : handles) EXPECT_TRUE(h.result.get().ok());
  p.drain();
  EXPECT_EQ(p.peak_in_flight(), 2);
  check_log(p.transitions(), 2, 10);
  const auto c = p.counts();
  EXPECT_EQ(c.submitted, c.done + c.failed);
}

TEST(SchedulerTest, BoundHoldsForRandomConfigsProperty) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 6; ++trial) {
    PipelineConfig cfg;
    cfg.max_concurrent = 1 + rng() % 4;
    cfg.input_side = 8;
    cfg.delays.preprocess = std::chrono::milliseconds(rng() % 3);
    cfg.delays.inference = std::chrono::milliseconds(rng() % 5);
    Pipeline p(model(sr::nearest_model(2)), cfg);
    const int jobs = 3 + rng() % 10;
    for (int i = 0; i < jobs; ++i) {
      p.submit({i % 4 == 3 ? std::string("junk") : jpeg(8, 8, i), std::nullopt, std::nullopt, ""});
    }
    p.drain();
    check_log(p.transitions(), cfg.max_concurrent, jobs);
    EXPECT_LE(p.peak_in_flight(), cfg.max_concurrent);
    const auto c = p.counts();
    EXPECT_EQ(c.submitted, static_cast<std::uint64_t>(jobs));
    EXPECT_EQ(c.submitted, c.done + c.failed);
  }
}

TEST(SchedulerTest, AdmissionIsFifo) {
  PipelineConfig cfg;
  cfg.input_side = 8;
  cfg.delays.inference = 5ms;
  Pipeline p(model(sr::nearest_model(2)), cfg);
  std::vector<JobHandle> handles;
  for (int i = 0; i < 8; ++i) handles.push_back(p.submit({jpeg(8, 8), {}, {}, ""}));
  p.drain();
  std::vector<std::uint64_t> admitted;
  for (const auto& t : p.transitions()) {
    if (t.from == JobState::kQueued) admitted.push_back(t.job_id);
  }
  std::vector<std::uint64_t> ids;
  for (const auto& h : handles) ids.push_back(h.id);
  EXPECT_EQ(admitted, ids);
}

TEST(SchedulerTest, SerialCompletionMatchesSubmission) {
  PipelineConfig cfg;
  cfg.max_concurrent = 1;
  cfg.input_side = 8;
  Pipeline p(model(sr::nearest_model(2)), cfg);
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(p.submit({jpeg(8, 8), {}, {}, ""}).id);
  p.drain();
  std::vector<std::uint64_t> completed;
  for (const auto& t : p.transitions()) {
    if (t.to == JobState::kDone) completed.push_back(t.job_id);
  }
  EXPECT_EQ(completed, ids);
}

TEST(SchedulerTest, StageDelaysAmortize) {
  PipelineConfig cfg;
  cfg.input_side = 8;
  cfg.delays.inference = 100ms;
  Pipeline p(model(sr::nearest_model(2)), cfg);
  const auto single = p.run_now({jpeg(8, 8), {}, {}, ""}).metrics.total_ms;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 10; ++i) p.submit({jpeg(8, 8), {}, {}, ""});
  p.drain();
  const double makespan =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(makespan, 10 * single);
}

TEST(SchedulerTest, OutputIndependentOfConcurrency) {
  std::vector<std::string> inputs;
  for (int i = 0; i < 5; ++i) inputs.push_back(jpeg(40 + i, 30, i + 7));
  auto run = [&](int concurrency) {
    PipelineConfig cfg;
    cfg.max_concurrent = concurrency;
    cfg.input_side = 32;
    Pipeline p(model(sr::bilinear_model(2)), cfg);
    std::vector<JobHandle> hs;
    for (const auto& b : inputs) hs.push_back(p.submit({b, {}, {}, ""}));
    std::vector<image::ImageBuffer> out;
    for (auto& h : hs) out.push_back(h.result.get().image);
    return out;
  };
  EXPECT_EQ(run(1), run(3));
}

TEST(EvaluateTest, IdenticalReferenceIsPerfect) {
  // Nearest x2 on a 2x-upscaled input of model size reproduces the input's
  // nearest upscale exactly.
  std::mt19937 rng(4);
  const auto img = testing::random_image(rng, 16, 16, 3);
  PipelineConfig cfg;
  cfg.input_side = 16;
  cfg.evaluation = true;
  Pipeline p(model(sr::nearest_model(2)), cfg);
  const auto r = p.run_now({png(img), std::nullopt, image::upscale_nearest(img, 2), ""});
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(std::isinf(*r.metrics.psnr));
  EXPECT_EQ(*r.metrics.ssim, 1.0);
  EXPECT_FALSE(r.metrics.reference_adjusted);
}

TEST(EvaluateTest, MismatchedReferenceIsAdjusted) {
  const auto out = testing::smooth_image(512, 512, 2);
  const auto ref = testing::smooth_image(400, 400, 2);
  const auto ev = evaluate(out, ref);
  EXPECT_TRUE(ev.adjusted);
  EXPECT_TRUE(std::isfinite(ev.psnr));
  ASSERT_TRUE(ev.ssim);
  EXPECT_GT(*ev.ssim, 0.5);
}

TEST(EvaluateTest, BilinearBeatsNearestOnSmoothContent) {
  // Baseline comparison: downscale a smooth original by 4, lift back with
  // both reference models, and compare against the original.
  const auto original = testing::smooth_image(256, 256, 9);
  const auto small = image::resize_bilinear(original, 64, 64);
  PipelineConfig cfg;
  cfg.input_side = 64;
  cfg.evaluation = true;
  auto lift = [&](sr::Model m) {
    Pipeline p(model(std::move(m)), cfg);
    return p.run_now({png(small), std::nullopt, original, ""}).metrics;
  };
  const auto bil = lift(sr::bilinear_model(4));
  const auto near = lift(sr::nearest_model(4));
  EXPECT_GT(*bil.psnr, *near.psnr);
  EXPECT_GT(*bil.ssim, *near.ssim);
}

}  // namespace
}  // namespace pixlift::pipeline
