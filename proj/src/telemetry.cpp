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

#include "pixlift/telemetry.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <cmath>
#include <istream>
#include <limits>
#include <random>
#include <sstream>

#include "pixlift/errors.hpp"
#include "pixlift/http.hpp"

namespace pixlift::telemetry {
namespace {

using json = nlohmann::json;

// JSON has no infinity; PSNR of identical images is written as "inf".
json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IngestError("bad number '" + s + "'", 0);
  }
  return j.get<double>();
}

pipeline::LiftMetrics metrics_from_json(const json& j) {
  pipeline::LiftMetrics m;
  m.preprocess_ms = j.at("preprocess_ms").get<double>();
  m.inference_ms = j.at("inference_ms").get<double>();
  m.postprocess_ms = j.at("postprocess_ms").get<double>();
  m.total_ms = j.at("total_ms").get<double>();
  if (j.contains("psnr")) m.psnr = read_number(j.at("psnr"));
  if (j.contains("ssim")) m.ssim = j.at("ssim").get<double>();
  m.reference_adjusted = j.value("reference_adjusted", false);
  m.input_bytes = j.at("input_bytes").get<std::uint64_t>();
  m.output_pixels = j.at("output_pixels").get<std::uint64_t>();
  return m;
}

std::string random_instance_id() {
  std::random_device rd;
  std::ostringstream out;
  out << std::hex << rd() << rd();
  return out.str();
}

std::int64_t now_wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::int64_t now_mono_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kRewritten: return "rewritten";
    case Verdict::kPassthrough: return "passthrough";
    case Verdict::kLiftFailed: return "lift_failed";
  }
  return "unknown";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  for (auto v : {Verdict::kRewritten, Verdict::kPassthrough, Verdict::kLiftFailed}) {
    if (to_string(v) == text) return v;
  }
  return std::nullopt;
}

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::kLift: return "lift";
    case Kind::kTransfer: return "transfer";
    case Kind::kResource: return "resource";
  }
  return "unknown";
}

bool operator==(const LiftRecord& a, const LiftRecord& b) {
  const auto& x = a.metrics;
  const auto& y = b.metrics;
  return a.job_id == b.job_id && a.label == b.label && a.model == b.model && a.ok == b.ok &&
         a.error == b.error && x.preprocess_ms == y.preprocess_ms &&
         x.inference_ms == y.inference_ms && x.postprocess_ms == y.postprocess_ms &&
         x.total_ms == y.total_ms && x.psnr == y.psnr && x.ssim == y.ssim &&
         x.reference_adjusted == y.reference_adjusted && x.input_bytes == y.input_bytes &&
         x.output_pixels == y.output_pixels;
}

bool TelemetryRecord::operator==(const TelemetryRecord& other) const {
  return seq == other.seq && mono_ns == other.mono_ns && wall_ms == other.wall_ms &&
         payload == other.payload;
}

LiftRecord lift_record(const pipeline::LiftResult& result) {
  return {result.job_id, result.label, result.model, result.ok(), result.error, result.metrics};
}

json to_json(const pipeline::LiftMetrics& m) {
  json j = {{"preprocess_ms", m.preprocess_ms},
            {"inference_ms", m.inference_ms},
            {"postprocess_ms", m.postprocess_ms},
            {"total_ms", m.total_ms},
            {"input_bytes", m.input_bytes},
            {"output_pixels", m.output_pixels}};
  if (m.psnr) j["psnr"] = number_or_inf(*m.psnr);
  if (m.ssim) j["ssim"] = *m.ssim;
  if (m.reference_adjusted) j["reference_adjusted"] = true;
  return j;
}

json to_json(const LiftRecord& r) {
  json j = {{"job_id", r.job_id}, {"label", r.label}, {"model", r.model},
            {"ok", r.ok}, {"metrics", to_json(r.metrics)}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

json to_json(const TransferRecord& r) {
  json j = {{"url", r.url},
            {"verdict", to_string(r.verdict)},
            {"bytes_original_estimate", r.bytes_original_estimate},
            {"bytes_transferred", r.bytes_transferred},
            {"estimated", r.estimated}};
  if (r.lift_job) j["lift_job"] = *r.lift_job;
  return j;
}

json to_json(const TelemetryRecord& r) {
  json payload = std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ResourceSample>) {
          return {{"cpu_percent", p.cpu_percent}, {"rss_bytes", p.rss_bytes}};
        } else {
          return to_json(p);
        }
      },
      r.payload);
  return {{"schema_version", kSchemaVersion},
          {"seq", r.seq},
          {"mono_ns", r.mono_ns},
          {"wall_ms", r.wall_ms},
          {"kind", to_string(r.kind())},
          {"payload", std::move(payload)}};
}

TelemetryRecord record_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != kSchemaVersion) {
    throw IngestError("unsupported telemetry schema version", 0);
  }
  TelemetryRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.mono_ns = j.at("mono_ns").get<std::int64_t>();
  r.wall_ms = j.at("wall_ms").get<std::int64_t>();
  const auto kind = j.at("kind").get<std::string>();
  const auto& p = j.at("payload");
  if (kind == "lift") {
    LiftRecord l;
    l.job_id = p.at("job_id").get<std::uint64_t>();
    l.label = p.at("label").get<std::string>();
    l.model = p.at("model").get<std::string>();
    l.ok = p.at("ok").get<bool>();
    l.error = p.value("error", std::string());
    l.metrics = metrics_from_json(p.at("metrics"));
    r.payload = std::move(l);
  } else if (kind == "transfer") {
    TransferRecord t;
    t.url = p.at("url").get<std::string>();
    const auto verdict = parse_verdict(p.at("verdict").get<std::string>());
    if (!verdict) throw IngestError("unknown verdict", 0);
    t.verdict = *verdict;
    t.bytes_original_estimate = p.at("bytes_original_estimate").get<std::uint64_t>();
    t.bytes_transferred = p.at("bytes_transferred").get<std::uint64_t>();
    t.estimated = p.at("estimated").get<bool>();
    if (p.contains("lift_job")) t.lift_job = p.at("lift_job").get<std::uint64_t>();
    r.payload = std::move(t);
  } else if (kind == "resource") {
    r.payload = ResourceSample{p.at("cpu_percent").get<double>(),
                               p.at("rss_bytes").get<std::uint64_t>()};
  } else {
    throw IngestError("unknown record kind '" + kind + "'", 0);
  }
  return r;
}

std::string to_json_line(const TelemetryRecord& record) { return to_json(record).dump(); }

TelemetryRecord from_json_line(std::string_view line) {
  try {
    return record_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw IngestError(std::string("malformed telemetry record: ") + e.what(), 0);
  }
}

std::vector<TelemetryRecord> read_jsonl(std::istream& in) {
  std::vector<TelemetryRecord> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const IngestError& e) {
      throw IngestError(e.what(), index);
    }
    ++index;
  }
  return out;
}

PushResult post_with_retry(const PushOptions& options, const std::string& body,
                           const std::string& idempotency_key) {
  PushResult result;
  result.idempotency_key = idempotency_key;
  http::HttpFetcher fetcher;
  http::FetchRequest req;
  req.method = "POST";
  req.url = options.endpoint;
  req.headers = {{"Content-Type", "application/json"}, {"Idempotency-Key", idempotency_key}};
  req.body = body;
  req.timeout = options.timeout;

  auto backoff = options.initial_backoff;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    result.attempts = attempt;
    const auto res = fetcher.fetch(req);
    result.last_status = res.status;
    if (res.success()) {
      result.delivered = true;
      result.error.clear();
      break;
    }
    result.error = res.transport_ok() ? "status " + std::to_string(res.status) : res.error;
    // Other client errors will not succeed on a resend.
    const bool retryable = !res.transport_ok() || res.status == 408 || res.status == 429 ||
                           res.status >= 500;
    if (!retryable) break;
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(options.max_backoff, backoff * 2);
    }
  }
  return result;
}

// ---- Recorder ---------------------------------------------------------------

Recorder::Recorder() : Recorder(Options{}) {}

Recorder::Recorder(Options options)
    : options_(std::move(options)), instance_(random_instance_id()) {
  if (options_.queue_capacity == 0) throw ConfigError("queue capacity must be positive");
  if (!options_.jsonl_path.empty()) {
    file_.open(options_.jsonl_path, std::ios::app);
    if (!file_) throw Error("cannot open telemetry file " + options_.jsonl_path);
  }
  thread_ = std::thread([this] { writer(); });
}

Recorder::~Recorder() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

bool Recorder::record(Payload payload) {
  std::lock_guard lock(mu_);
  const bool resource = std::holds_alternative<ResourceSample>(payload);
  if (queue_.size() >= options_.queue_capacity) {
    if (resource) {
      ++stats_.dropped;
      return false;
    }
    // Make room by discarding the oldest queued resource sample, if any.
    const auto it = std::find_if(queue_.begin(), queue_.end(), [](const TelemetryRecord& r) {
      return r.kind() == Kind::kResource;
    });
    if (it != queue_.end()) {
      queue_.erase(it);
      ++stats_.dropped;
    }
  }
  TelemetryRecord rec;
  rec.seq = next_seq_++;
  rec.mono_ns = std::max(last_mono_, now_mono_ns());
  last_mono_ = rec.mono_ns;
  rec.wall_ms = now_wall_ms();
  rec.payload = std::move(payload);
  queue_.push_back(std::move(rec));
  ++stats_.recorded;
  cv_.notify_one();
  return true;
}

void Recorder::drain_locked() {
  while (!queue_.empty()) {
    retained_.push_back(std::move(queue_.front()));
    queue_.pop_front();
  }
}

void Recorder::writer() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] {
      return stopping_ || !queue_.empty() || pending_push_ || file_behind();
    });
    drain_locked();
    if (file_behind()) {
      // Producers only touch the queue, so file I/O happens unlocked.
      std::vector<TelemetryRecord> batch(retained_.begin() + file_written_, retained_.end());
      file_written_ = retained_.size();
      lock.unlock();
      for (const auto& r : batch) file_ << to_json_line(r) << '\n';
      file_.flush();
      lock.lock();
    }
    if (pending_push_) {
      auto opts = std::move(*pending_push_);
      pending_push_.reset();
      pushing_ = true;
      lock.unlock();
      push(opts);
      lock.lock();
      pushing_ = false;
    }
    idle_cv_.notify_all();
    if (stopping_ && queue_.empty() && !file_behind()) return;
  }
}

bool Recorder::file_behind() const {
  return file_.is_open() && file_written_ < retained_.size();
}

std::size_t Recorder::flush(std::ostream& sink) {
  std::vector<TelemetryRecord> batch;
  {
    std::lock_guard lock(mu_);
    drain_locked();
    cv_.notify_one();
    batch.assign(retained_.begin() + flushed_, retained_.end());
    flushed_ = retained_.size();
  }
  for (const auto& r : batch) sink << to_json_line(r) << '\n';
  sink.flush();
  if (!sink) throw Error("telemetry sink write failed");
  return batch.size();
}

PushResult Recorder::push(const PushOptions& options) {
  // One push at a time so batches never overlap.
  std::lock_guard push_lock(push_mu_);
  PushResult result;
  std::vector<TelemetryRecord> batch;
  {
    std::lock_guard lock(mu_);
    drain_locked();
    const auto end = std::min(retained_.size(), pushed_ + options.max_batch);
    batch.assign(retained_.begin() + pushed_, retained_.begin() + end);
  }
  result.records = batch.size();
  if (batch.empty()) {
    result.delivered = true;
    return result;
  }
  result.idempotency_key = instance_ + "-" + std::to_string(batch.front().seq) + "-" +
                           std::to_string(batch.back().seq);
  json body = {{"schema_version", kSchemaVersion},
               {"batch", result.idempotency_key},
               {"records", json::array()}};
  for (const auto& r : batch) body["records"].push_back(to_json(r));

  const auto sent = post_with_retry(options, body.dump(), result.idempotency_key);
  result.delivered = sent.delivered;
  result.attempts = sent.attempts;
  result.last_status = sent.last_status;
  result.error = sent.error;

  std::lock_guard lock(mu_);
  if (result.delivered) {
    pushed_ += batch.size();
    stats_.pushed += batch.size();
  } else {
    ++stats_.push_failures;
  }
  return result;
}

void Recorder::push_async(PushOptions options) {
  std::lock_guard lock(mu_);
  pending_push_ = std::move(options);
  cv_.notify_one();
}

std::vector<TelemetryRecord> Recorder::snapshot() {
  std::lock_guard lock(mu_);
  drain_locked();
  cv_.notify_one();
  return retained_;
}

void Recorder::sync() {
  std::unique_lock lock(mu_);
  cv_.notify_one();
  idle_cv_.wait(lock, [this] {
    return queue_.empty() && !pending_push_ && !pushing_ && !file_behind();
  });
}

Recorder::Stats Recorder::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::size_t Recorder::pending_push() const {
  std::lock_guard lock(mu_);
  return retained_.size() + queue_.size() - pushed_;
}

// ---- resource sampling ------------------------------------------------------

ProcessCounters read_process_counters() {
  ProcessCounters c;
  static const long ticks = sysconf(_SC_CLK_TCK);
  static const long page = sysconf(_SC_PAGESIZE);
  std::ifstream stat("/proc/self/stat");
  std::string text;
  if (stat && std::getline(stat, text)) {
    // Fields after the parenthesised command name; utime and stime are the
    // 14th and 15th fields overall.
    const auto close = text.rfind(')');
    std::istringstream rest(text.substr(close + 2));
    std::string field;
    std::uint64_t utime = 0, stime = 0;
    for (int i = 3; i <= 15 && rest >> field; ++i) {
      if (i == 14) utime = std::stoull(field);
      if (i == 15) stime = std::stoull(field);
    }
    c.cpu_seconds = static_cast<double>(utime + stime) / static_cast<double>(ticks);
    std::ifstream statm("/proc/self/statm");
    std::uint64_t size = 0, resident = 0;
    if (statm >> size >> resident) c.rss_bytes = resident * static_cast<std::uint64_t>(page);
    return c;
  }
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  c.cpu_seconds = usage.ru_utime.tv_sec + usage.ru_stime.tv_sec +
                  (usage.ru_utime.tv_usec + usage.ru_stime.tv_usec) / 1e6;
  c.rss_bytes = static_cast<std::uint64_t>(usage.ru_maxrss) * 1024;
  return c;
}

ResourceSampler::ResourceSampler(Recorder& recorder, std::chrono::milliseconds interval)
    : recorder_(recorder), interval_(interval) {
  thread_ = std::thread([this] {
    auto last = read_process_counters();
    auto last_time = std::chrono::steady_clock::now();
    std::unique_lock lock(mu_);
    while (!cv_.wait_for(lock, interval_, [this] { return stop_; })) {
      const auto now = read_process_counters();
      const auto t = std::chrono::steady_clock::now();
      const double wall = std::chrono::duration<double>(t - last_time).count();
      const double cpu = wall > 0 ? 100.0 * (now.cpu_seconds - last.cpu_seconds) / wall : 0.0;
      recorder_.record(ResourceSample{std::max(0.0, cpu), now.rss_bytes});
      last = now;
      last_time = t;
    }
  });
}

ResourceSampler::~ResourceSampler() { stop(); }

void ResourceSampler::stop() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

}  // namespace pixlift::telemetry
