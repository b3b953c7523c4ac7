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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pixlift/http.hpp"
#include "pixlift/patterns.hpp"
#include "pixlift/pipeline.hpp"
#include "pixlift/telemetry.hpp"

namespace pixlift::proxy {

// Lift: rewrite, fetch the small variant, upscale, serve.
// Passthrough: relay everything untouched.
// MeasureOnly: serve originals untouched, also fetch the small variant to
// account for the bytes Lift mode would have saved.
enum class Mode { kLift, kPassthrough, kMeasureOnly };

std::string to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

struct Viewport {
  int width = 393;
  int height = 852;
};
// "393x852"
std::optional<Viewport> parse_viewport(std::string_view text);

struct ListenAddress {
  std::string host;
  int port = 0;
};
// "host:port" or ":port"; port 0 picks a free port.
std::optional<ListenAddress> parse_listen(std::string_view text);

struct ProxyConfig {
  std::string listen = "127.0.0.1:8080";
  int target_width = 200;
  Viewport viewport;
  std::string model = "bilinear_x4";
  Mode mode = Mode::kLift;
  std::optional<std::string> metrics_push;
  // Empty selects the built-in patterns.
  std::string patterns_file;
  int max_concurrent = 2;
  int input_side = 128;
  std::chrono::milliseconds quiescence{2000};
  // Optional JSONL file receiving every telemetry record.
  std::string telemetry_path;

  // Throws ConfigError.
  void validate() const;
};

struct ProxyRequest {
  std::string method = "GET";
  // Absolute URI for proxied requests, origin-form for local endpoints.
  std::string target;
  http::Headers headers;
  std::string body;
};

struct ProxyResponse {
  int status = 200;
  http::Headers headers;
  std::string body;
};

// Request handling independent of sockets. Thread-safe; lifting funnels
// through one bounded pipeline.
class ProxyService {
 public:
  explicit ProxyService(ProxyConfig config,
                        std::shared_ptr<http::Fetcher> upstream = nullptr,
                        std::shared_ptr<const sr::Model> model = nullptr);
  ~ProxyService();
  ProxyService(const ProxyService&) = delete;
  ProxyService& operator=(const ProxyService&) = delete;

  ProxyResponse handle(const ProxyRequest& request);

  // Counters, bytes saved and per-image records in the telemetry schema.
  nlohmann::json metrics_snapshot() const;
  std::vector<telemetry::TransferRecord> transfers() const;

  const ProxyConfig& config() const { return config_; }
  telemetry::Recorder& recorder() { return recorder_; }
  int pushes_sent() const { return pushes_.load(); }

 private:
  ProxyResponse forward(const ProxyRequest& request);
  ProxyResponse handle_image(const ProxyRequest& request, const std::string& url);
  ProxyResponse handle_local(const ProxyRequest& request);
  ProxyResponse serve_original(const ProxyRequest& request, const std::string& url,
                               telemetry::Verdict verdict, std::uint64_t extra_bytes);
  std::optional<std::uint64_t> head_length(const ProxyRequest& request, const std::string& url);
  void add_transfer(telemetry::TransferRecord record);
  void note_activity();
  void push_loop();

  ProxyConfig config_;
  std::shared_ptr<http::Fetcher> upstream_;
  patterns::Registry registry_;
  telemetry::Recorder recorder_;
  std::unique_ptr<pipeline::Pipeline> pipeline_;

  mutable std::mutex mu_;
  struct Counters {
    std::uint64_t requests = 0;
    std::uint64_t image_requests = 0;
    std::uint64_t rewritten = 0;
    std::uint64_t passthrough = 0;
    std::uint64_t lift_failed = 0;
    std::uint64_t upstream_errors = 0;
    std::uint64_t bytes_saved = 0;
    std::uint64_t bytes_original_estimate = 0;
    std::uint64_t bytes_transferred = 0;
    std::uint64_t measured_savings = 0;
  } counters_;
  std::vector<telemetry::TransferRecord> transfers_;
  std::vector<telemetry::LiftRecord> lifts_;

  std::condition_variable push_cv_;
  std::chrono::steady_clock::time_point last_activity_;
  bool dirty_ = false;
  bool stopping_ = false;
  std::atomic<int> pushes_{0};
  std::thread push_thread_;
};

// HTTP/1.1 forward proxy front end. Each client connection is served on its
// own thread; CONNECT requests become opaque TCP tunnels.
class ProxyServer {
 public:
  ProxyServer(ProxyService& service, const ListenAddress& listen);
  ~ProxyServer();
  ProxyServer(const ProxyServer&) = delete;
  ProxyServer& operator=(const ProxyServer&) = delete;

  // Binds and starts accepting in the background.
  void start();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace pixlift::proxy
