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
#include <fstream>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pixlift/pipeline.hpp"

namespace pixlift::telemetry {

inline constexpr int kSchemaVersion = 1;

enum class Verdict { kRewritten, kPassthrough, kLiftFailed };
std::string to_string(Verdict verdict);
std::optional<Verdict> parse_verdict(std::string_view text);

// One proxied image request.
struct TransferRecord {
  std::string url;
  Verdict verdict = Verdict::kPassthrough;
  std::uint64_t bytes_original_estimate = 0;
  std::uint64_t bytes_transferred = 0;
  // Original size is ratio-derived rather than measured.
  bool estimated = false;
  std::optional<std::uint64_t> lift_job;
  bool operator==(const TransferRecord&) const = default;
};

struct LiftRecord {
  std::uint64_t job_id = 0;
  std::string label;
  std::string model;
  bool ok = true;
  std::string error;
  pipeline::LiftMetrics metrics;
};
bool operator==(const LiftRecord& a, const LiftRecord& b);

LiftRecord lift_record(const pipeline::LiftResult& result);

struct ResourceSample {
  double cpu_percent = 0.0;
  std::uint64_t rss_bytes = 0;
  bool operator==(const ResourceSample&) const = default;
};

enum class Kind { kLift, kTransfer, kResource };
std::string to_string(Kind kind);

using Payload = std::variant<LiftRecord, TransferRecord, ResourceSample>;

struct TelemetryRecord {
  std::uint64_t seq = 0;
  std::int64_t mono_ns = 0;
  std::int64_t wall_ms = 0;
  Payload payload;

  Kind kind() const { return static_cast<Kind>(payload.index()); }
  bool operator==(const TelemetryRecord&) const;
};

nlohmann::json to_json(const pipeline::LiftMetrics& metrics);
nlohmann::json to_json(const LiftRecord& record);
nlohmann::json to_json(const TransferRecord& record);
nlohmann::json to_json(const TelemetryRecord& record);
TelemetryRecord record_from_json(const nlohmann::json& j);

// Single line, no trailing newline.
std::string to_json_line(const TelemetryRecord& record);
// Throws IngestError on malformed or schema-incompatible input.
TelemetryRecord from_json_line(std::string_view line);
std::vector<TelemetryRecord> read_jsonl(std::istream& in);

struct PushOptions {
  std::string endpoint;
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds max_backoff{2000};
  std::size_t max_batch = 500;
  std::chrono::seconds timeout{5};
};

struct PushResult {
  bool delivered = false;
  int attempts = 0;
  std::size_t records = 0;
  std::string idempotency_key;
  int last_status = 0;
  std::string error;
};

// POSTs a JSON body, retrying with capped exponential backoff. Every attempt
// carries the same Idempotency-Key header.
PushResult post_with_retry(const PushOptions& options, const std::string& body,
                           const std::string& idempotency_key);

// Collects records from any thread. A single background writer drains a
// bounded queue into the retained log (and the optional JSONL file). When the
// queue is full, Resource samples are dropped first; Lift and Transfer
// records are always kept, even past capacity.
class Recorder {
 public:
  struct Options {
    std::size_t queue_capacity = 4096;
    // Appended to by the writer thread when set.
    std::string jsonl_path;
  };

  Recorder();
  explicit Recorder(Options options);
  ~Recorder();
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  // Never blocks on I/O. Returns false when the record was dropped.
  bool record(Payload payload);

  // Writes every record not yet flushed to this kind of sink, one JSON line
  // each. Returns the number written; throws Error when the stream fails.
  std::size_t flush(std::ostream& sink);

  // Sends not-yet-delivered records in one batch per call, retrying with
  // capped exponential backoff under one idempotency key. Undelivered
  // records stay retained for the next attempt.
  PushResult push(const PushOptions& options);
  // Schedules push() on the writer thread and returns immediately.
  void push_async(PushOptions options);

  // Drains the queue and returns a copy of every retained record.
  std::vector<TelemetryRecord> snapshot();
  // Blocks until the queue is empty and no push is running.
  void sync();

  struct Stats {
    std::uint64_t recorded = 0;
    std::uint64_t dropped = 0;
    std::uint64_t pushed = 0;
    std::uint64_t push_failures = 0;
  };
  Stats stats() const;
  std::size_t pending_push() const;

 private:
  void writer();
  void drain_locked();
  bool file_behind() const;

  Options options_;
  std::string instance_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<TelemetryRecord> queue_;
  std::vector<TelemetryRecord> retained_;
  std::size_t flushed_ = 0;
  std::size_t file_written_ = 0;
  std::size_t pushed_ = 0;
  std::uint64_t next_seq_ = 1;
  std::int64_t last_mono_ = 0;
  Stats stats_;
  std::optional<PushOptions> pending_push_;
  bool pushing_ = false;
  bool stopping_ = false;
  std::mutex push_mu_;
  std::ofstream file_;
  std::thread thread_;
};

// Samples process CPU and resident memory at a fixed interval into a
// Recorder. Reads /proc when present, getrusage otherwise.
class ResourceSampler {
 public:
  ResourceSampler(Recorder& recorder,
                  std::chrono::milliseconds interval = std::chrono::seconds(1));
  ~ResourceSampler();
  ResourceSampler(const ResourceSampler&) = delete;
  ResourceSampler& operator=(const ResourceSampler&) = delete;

  void stop();

 private:
  Recorder& recorder_;
  std::chrono::milliseconds interval_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::thread thread_;
};

// One reading of this process's counters; cpu time in seconds.
struct ProcessCounters {
  double cpu_seconds = 0.0;
  std::uint64_t rss_bytes = 0;
};
ProcessCounters read_process_counters();

}  // namespace pixlift::telemetry
