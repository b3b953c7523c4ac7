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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pixlift::http {

using Headers = std::vector<std::pair<std::string, std::string>>;

// Case-insensitive header lookup; returns the first match.
std::optional<std::string> find_header(const Headers& headers,
                                       std::string_view name);

// Absolute http(s) URL split into the parts a client needs.
struct Url {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string target;  // path + query, always starts with '/'

  static std::optional<Url> parse(std::string_view text);

  // scheme://host[:port] with default ports omitted.
  std::string origin() const;
  std::string str() const { return origin() + target; }
};

struct FetchRequest {
  std::string method = "GET";
  std::string url;
  Headers headers;
  std::string body;
  std::chrono::milliseconds timeout{10000};
};

struct FetchResponse {
  enum class Transport { kOk, kTimeout, kFailed };

  Transport transport = Transport::kFailed;
  int status = 0;
  Headers headers;
  std::string body;
  std::string error;

  bool transport_ok() const { return transport == Transport::kOk; }
  bool success() const {
    return transport_ok() && status >= 200 && status < 300;
  }
  std::string content_type() const;
  bool is_image() const;
};

// Issues one HTTP exchange. Implementations must be safe to call from
// multiple threads.
class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual FetchResponse fetch(const FetchRequest& request) = 0;
};

// cpp-httplib backed fetcher. Never follows redirects and never decodes
// content codings, so bodies are relayed exactly as the origin sent them.
class HttpFetcher final : public Fetcher {
 public:
  FetchResponse fetch(const FetchRequest& request) override;

  // Response body bytes received over the lifetime of this fetcher.
  std::uint64_t bytes_received() const { return bytes_received_.load(); }

 private:
  std::atomic<std::uint64_t> bytes_received_{0};
};

// Hop-by-hop headers are stripped when relaying in either direction.
bool is_hop_by_hop(std::string_view name);

}  // namespace pixlift::http
