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

#include "pixlift/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>

namespace pixlift::http {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

int default_port(std::string_view scheme) {
  return scheme == "https" ? 443 : 80;
}

}  // namespace

std::optional<std::string> find_header(const Headers& headers,
                                       std::string_view name) {
  for (const auto& [key, value] : headers) {
    if (iequals(key, name)) return value;
  }
  return std::nullopt;
}

bool is_hop_by_hop(std::string_view name) {
  static constexpr std::string_view kHopByHop[] = {
      "connection", "keep-alive",        "proxy-authenticate",
      "proxy-authorization", "te",       "trailer",
      "transfer-encoding",   "upgrade",  "proxy-connection"};
  return std::any_of(std::begin(kHopByHop), std::end(kHopByHop),
                     [&](std::string_view h) { return iequals(h, name); });
}

std::optional<Url> Url::parse(std::string_view text) {
  Url url;
  const auto scheme_end = text.find("://");
  if (scheme_end == std::string_view::npos) return std::nullopt;
  url.scheme = std::string(text.substr(0, scheme_end));
  std::transform(url.scheme.begin(), url.scheme.end(), url.scheme.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (url.scheme != "http" && url.scheme != "https") return std::nullopt;

  auto rest = text.substr(scheme_end + 3);
  const auto authority_end = rest.find_first_of("/?#");
  auto authority = rest.substr(0, authority_end);
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    authority = authority.substr(at + 1);
  }
  if (authority.empty()) return std::nullopt;

  url.port = default_port(url.scheme);
  std::string_view host = authority;
  if (authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(0, close + 1);
    authority = authority.substr(close + 1);
    if (!authority.empty() && authority.front() == ':') {
      authority.remove_prefix(1);
    } else {
      authority = {};
    }
  } else if (const auto colon = authority.rfind(':');
             colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    authority = authority.substr(colon + 1);
  } else {
    authority = {};
  }
  if (!authority.empty()) {
    int port = 0;
    const auto [ptr, ec] = std::from_chars(
        authority.data(), authority.data() + authority.size(), port);
    if (ec != std::errc{} || ptr != authority.data() + authority.size() ||
        port <= 0 || port > 65535) {
      return std::nullopt;
    }
    url.port = port;
  }
  if (host.empty()) return std::nullopt;
  url.host = std::string(host);

  if (authority_end == std::string_view::npos) {
    url.target = "/";
  } else {
    auto target = rest.substr(authority_end);
    if (const auto hash = target.find('#'); hash != std::string_view::npos) {
      target = target.substr(0, hash);
    }
    url.target = std::string(target);
    if (url.target.empty() || url.target.front() != '/') {
      url.target.insert(url.target.begin(), '/');
    }
  }
  return url;
}

std::string Url::origin() const {
  std::string out = scheme + "://" + host;
  if (port != default_port(scheme)) out += ":" + std::to_string(port);
  return out;
}

std::string FetchResponse::content_type() const {
  auto value = find_header(headers, "Content-Type").value_or("");
  if (const auto semi = value.find(';'); semi != std::string::npos) {
    value.resize(semi);
  }
  while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) {
    value.pop_back();
  }
  std::transform(value.begin(), value.end(), value.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return value;
}

bool FetchResponse::is_image() const {
  return content_type().rfind("image/", 0) == 0;
}

FetchResponse HttpFetcher::fetch(const FetchRequest& request) {
  FetchResponse out;
  const auto url = Url::parse(request.url);
  if (!url) {
    out.error = "unsupported url: " + request.url;
    return out;
  }

  httplib::Client client(url->origin());
  const auto seconds =
      std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
      request.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  client.set_follow_location(false);
  client.set_decompress(false);
  client.set_keep_alive(false);
  client.set_url_encode(false);

  httplib::Request req;
  req.method = request.method;
  req.path = url->target;
  for (const auto& [key, value] : request.headers) {
    if (is_hop_by_hop(key) || iequals(key, "Host") ||
        iequals(key, "Content-Length")) {
      continue;
    }
    req.headers.emplace(key, value);
  }
  req.body = request.body;

  auto result = client.send(req);
  if (!result) {
    const auto err = result.error();
    out.transport = (err == httplib::Error::ConnectionTimeout ||
                     err == httplib::Error::Read)
                        ? FetchResponse::Transport::kTimeout
                        : FetchResponse::Transport::kFailed;
    out.error = httplib::to_string(err);
    return out;
  }
  out.transport = FetchResponse::Transport::kOk;
  out.status = result->status;
  for (const auto& [key, value] : result->headers) {
    out.headers.emplace_back(key, value);
  }
  out.body = std::move(result->body);
  bytes_received_ += out.body.size();
  return out;
}

}  // namespace pixlift::http
