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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pixlift/image.hpp"
#include "pixlift/quality.hpp"
#include "pixlift/sr.hpp"

namespace pixlift::pipeline {

enum class JobState { kQueued, kPreprocessing, kInferring, kPostprocessing, kDone, kFailed };

std::string to_string(JobState state);
// True for the forward transitions Queued -> Preprocessing -> Inferring ->
// Postprocessing -> Done, and from any non-terminal state to Failed.
bool legal_transition(JobState from, JobState to);

struct Dims {
  int width = 0;
  int height = 0;
  bool operator==(const Dims&) const = default;
};

// Fixed sleeps added to each stage. Used to model accelerator latency in
// scheduling experiments; zero in normal operation.
struct StageDelays {
  std::chrono::milliseconds preprocess{0};
  std::chrono::milliseconds inference{0};
  std::chrono::milliseconds postprocess{0};
};

struct PipelineConfig {
  int max_concurrent = 2;
  int input_side = 128;
  bool evaluation = false;
  quality::SsimParams ssim;
  StageDelays delays;
};

struct LiftRequest {
  std::string bytes;
  // Display size; defaults to scale x the decoded size.
  std::optional<Dims> target;
  // Ground truth for evaluation mode.
  std::optional<image::ImageBuffer> reference;
  std::string label;
};

struct LiftMetrics {
  double preprocess_ms = 0.0;
  double inference_ms = 0.0;
  double postprocess_ms = 0.0;
  double total_ms = 0.0;
  std::optional<double> psnr;
  std::optional<double> ssim;
  bool reference_adjusted = false;
  std::uint64_t input_bytes = 0;
  std::uint64_t output_pixels = 0;
};

struct LiftResult {
  std::uint64_t job_id = 0;
  std::string label;
  std::string model;
  JobState state = JobState::kQueued;
  image::ImageBuffer image;
  LiftMetrics metrics;
  // Exception type name and message for Failed jobs.
  std::string error_kind;
  std::string error;

  bool ok() const { return state == JobState::kDone; }
};

struct Transition {
  std::uint64_t job_id = 0;
  JobState from = JobState::kQueued;
  JobState to = JobState::kQueued;
  std::chrono::steady_clock::time_point at;
};

struct JobHandle {
  std::uint64_t id = 0;
  std::shared_future<LiftResult> result;
};

// Stage functions, usable without a queue.

// Decodes nothing; stretches the RGB image to side x side and normalizes to
// a (1, 3, side, side) tensor in [0, 1].
Tensor preprocess(const image::ImageBuffer& rgb, int side);
// Denormalizes (clamped) and resizes to target when it differs from the
// tensor's spatial size.
image::ImageBuffer postprocess(const Tensor& output, Dims target);
// Scores output against reference, resizing the reference first when the
// dimensions differ.
struct Evaluation {
  double psnr = 0.0;
  std::optional<double> ssim;  // absent when the image is smaller than the window
  bool adjusted = false;
};
Evaluation evaluate(const image::ImageBuffer& output, const image::ImageBuffer& reference,
                    const quality::SsimParams& params = {});

// FIFO queue served by max_concurrent workers. At most max_concurrent jobs
// are between Preprocessing and Postprocessing at any time. Failures are
// confined to their job.
class Pipeline {
 public:
  Pipeline(std::shared_ptr<const sr::Model> model, PipelineConfig config = {});
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  // Throws ShutdownError after shutdown().
  JobHandle submit(LiftRequest request);
  // Submits and waits for the result.
  LiftResult run_now(LiftRequest request);

  // Waits until every submitted job has finished.
  void drain();
  // Rejects new submissions, finishes queued work, joins the workers.
  void shutdown();

  // Called on a worker thread after each job finishes.
  void set_listener(std::function<void(const LiftResult&)> listener);

  const PipelineConfig& config() const { return config_; }
  const sr::Model& model() const { return *model_; }

  std::vector<Transition> transitions() const;
  int peak_in_flight() const;
  struct Counts {
    std::uint64_t submitted = 0;
    std::uint64_t done = 0;
    std::uint64_t failed = 0;
  };
  Counts counts() const;

 private:
  struct Job {
    std::uint64_t id;
    LiftRequest request;
    std::promise<LiftResult> promise;
  };

  void worker();
  LiftResult execute(std::uint64_t id, LiftRequest& request);
  void record(std::uint64_t id, JobState from, JobState to);

  std::shared_ptr<const sr::Model> model_;
  PipelineConfig config_;

  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::deque<Job> queue_;
  bool stopping_ = false;
  std::uint64_t next_id_ = 1;
  int in_flight_ = 0;
  int peak_ = 0;
  Counts counts_;
  std::vector<Transition> log_;
  std::function<void(const LiftResult&)> listener_;
  std::vector<std::thread> workers_;
};

}  // namespace pixlift::pipeline
