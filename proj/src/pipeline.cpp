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

#include "pixlift/pipeline.hpp"

#include <algorithm>
#include <typeinfo>

#include "pixlift/codec.hpp"
#include "pixlift/errors.hpp"

namespace pixlift::pipeline {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const DecodeError*>(&e)) return "DecodeError";
  if (dynamic_cast<const ShapeError*>(&e)) return "ShapeError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "InternalError";
}

}  // namespace

std::string to_string(JobState state) {
  switch (state) {
    case JobState::kQueued: return "queued";
    case JobState::kPreprocessing: return "preprocessing";
    case JobState::kInferring: return "inferring";
    case JobState::kPostprocessing: return "postprocessing";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "unknown";
}

bool legal_transition(JobState from, JobState to) {
  if (from == JobState::kDone || from == JobState::kFailed) return false;
  if (to == JobState::kFailed) return true;
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

Tensor preprocess(const image::ImageBuffer& rgb, int side) {
  if (rgb.channels() != 3) throw ShapeError("preprocess expects an RGB image");
  if (rgb.width() == side && rgb.height() == side) {
    return image::to_tensor(rgb, Layout::kNCHW);
  }
  return image::to_tensor(image::resize_bilinear(rgb, side, side), Layout::kNCHW);
}

image::ImageBuffer postprocess(const Tensor& output, Dims target) {
  auto img = image::from_tensor(output);
  if (target.width <= 0 || target.height <= 0) {
    throw ShapeError("target dimensions must be positive");
  }
  if (img.width() == target.width && img.height() == target.height) return img;
  return image::resize_bilinear(img, target.width, target.height);
}

Evaluation evaluate(const image::ImageBuffer& output, const image::ImageBuffer& reference,
                    const quality::SsimParams& params) {
  Evaluation ev;
  const auto out_rgb = image::to_rgb(output);
  auto ref_rgb = image::to_rgb(reference);
  if (ref_rgb.width() != out_rgb.width() || ref_rgb.height() != out_rgb.height()) {
    ref_rgb = image::resize_bilinear(ref_rgb, out_rgb.width(), out_rgb.height());
    ev.adjusted = true;
  }
  ev.psnr = quality::psnr(out_rgb, ref_rgb);
  try {
    ev.ssim = quality::ssim(out_rgb, ref_rgb, params);
  } catch (const WindowError&) {
  }
  return ev;
}

Pipeline::Pipeline(std::shared_ptr<const sr::Model> model, PipelineConfig config)
    : model_(std::move(model)), config_(config) {
  if (!model_) throw ConfigError("pipeline needs a model");
  if (config_.max_concurrent < 1) throw ConfigError("max_concurrent must be at least 1");
  if (config_.input_side < 1) throw ConfigError("input side must be positive");
  workers_.reserve(config_.max_concurrent);
  for (int i = 0; i < config_.max_concurrent; ++i) {
    workers_.emplace_back([this] { worker(); });
  }
}

Pipeline::~Pipeline() { shutdown(); }

JobHandle Pipeline::submit(LiftRequest request) {
  std::lock_guard lock(mu_);
  if (stopping_) throw ShutdownError("pipeline is shut down");
  Job job{next_id_++, std::move(request), {}};
  JobHandle handle{job.id, job.promise.get_future().share()};
  ++counts_.submitted;
  queue_.push_back(std::move(job));
  work_cv_.notify_one();
  return handle;
}

LiftResult Pipeline::run_now(LiftRequest request) {
  return submit(std::move(request)).result.get();
}

void Pipeline::drain() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] {
    return queue_.empty() && in_flight_ == 0;
  });
}

void Pipeline::shutdown() {
  {
    std::lock_guard lock(mu_);
    if (stopping_ && workers_.empty()) return;
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  std::lock_guard lock(mu_);
  workers_.clear();
}

void Pipeline::set_listener(std::function<void(const LiftResult&)> listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

std::vector<Transition> Pipeline::transitions() const {
  std::lock_guard lock(mu_);
  return log_;
}

int Pipeline::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

Pipeline::Counts Pipeline::counts() const {
  std::lock_guard lock(mu_);
  return counts_;
}

void Pipeline::record(std::uint64_t id, JobState from, JobState to) {
  std::lock_guard lock(mu_);
  log_.push_back({id, from, to, Clock::now()});
}

void Pipeline::worker() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mu_);
      work_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
      // Admission and the first transition happen under one lock so the log
      // never shows more than max_concurrent jobs mid-pipeline.
      ++in_flight_;
      peak_ = std::max(peak_, in_flight_);
      log_.push_back({job.id, JobState::kQueued, JobState::kPreprocessing, Clock::now()});
    }
    auto result = execute(job.id, job.request);
    std::function<void(const LiftResult&)> listener;
    {
      std::lock_guard lock(mu_);
      --in_flight_;
      if (result.ok()) ++counts_.done;
      else ++counts_.failed;
      listener = listener_;
    }
    if (listener) {
      try {
        listener(result);
      } catch (...) {
      }
    }
    job.promise.set_value(std::move(result));
    idle_cv_.notify_all();
  }
}

LiftResult Pipeline::execute(std::uint64_t id, LiftRequest& request) {
  LiftResult result;
  result.job_id = id;
  result.label = request.label;
  result.model = model_->graph.name;
  result.metrics.input_bytes = request.bytes.size();
  JobState state = JobState::kPreprocessing;
  const auto start = Clock::now();
  auto advance = [&](JobState next) {
    record(id, state, next);
    state = next;
  };
  try {
    auto t0 = Clock::now();
    auto decoded = image::decode(request.bytes);
    std::optional<image::ImageBuffer> alpha;
    image::ImageBuffer rgb;
    if (decoded.has_alpha()) {
      auto [colour, a] = image::split_alpha(decoded);
      rgb = std::move(colour);
      alpha = std::move(a);
    } else {
      rgb = image::to_rgb(decoded);
    }
    const Dims target = request.target.value_or(
        Dims{decoded.width() * model_->graph.scale, decoded.height() * model_->graph.scale});
    auto input = preprocess(rgb, config_.input_side);
    std::this_thread::sleep_for(config_.delays.preprocess);
    result.metrics.preprocess_ms = ms_since(t0);

    advance(JobState::kInferring);
    t0 = Clock::now();
    const auto output = sr::infer(*model_, input);
    std::this_thread::sleep_for(config_.delays.inference);
    result.metrics.inference_ms = ms_since(t0);

    advance(JobState::kPostprocessing);
    t0 = Clock::now();
    auto lifted = postprocess(output, target);
    if (alpha) {
      lifted = image::attach_alpha(lifted,
                                   image::resize_bilinear(*alpha, target.width, target.height));
    }
    std::this_thread::sleep_for(config_.delays.postprocess);
    result.metrics.postprocess_ms = ms_since(t0);
    result.metrics.total_ms = ms_since(start);
    result.metrics.output_pixels =
        static_cast<std::uint64_t>(lifted.width()) * lifted.height();

    if (config_.evaluation && request.reference) {
      const auto ev = evaluate(lifted, *request.reference, config_.ssim);
      result.metrics.psnr = ev.psnr;
      result.metrics.ssim = ev.ssim;
      result.metrics.reference_adjusted = ev.adjusted;
    }
    result.image = std::move(lifted);
    advance(JobState::kDone);
  } catch (const std::exception& e) {
    result.error_kind = error_kind(e);
    result.error = e.what();
    result.metrics.total_ms = ms_since(start);
    advance(JobState::kFailed);
  }
  result.state = state;
  return result;
}

}  // namespace pixlift::pipeline
