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

#include "pixlift/proxy.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <sstream>

#include "pixlift/codec.hpp"
#include "pixlift/errors.hpp"

namespace pixlift::proxy {
namespace {

using json = nlohmann::json;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool has_image_extension(std::string_view target) {
  const auto path = target.substr(0, target.find_first_of("?#"));
  const auto dot = path.rfind('.');
  if (dot == std::string_view::npos || path.find('/', dot) != std::string_view::npos) {
    return false;
  }
  const auto ext = path.substr(dot + 1);
  for (std::string_view known : {"jpg", "jpeg", "png", "webp", "gif", "avif"}) {
    if (iequals(ext, known)) return true;
  }
  return false;
}

bool looks_like_image_request(const ProxyRequest& req, const http::Url& url) {
  if (has_image_extension(url.target)) return true;
  const auto accept = http::find_header(req.headers, "Accept");
  return accept && accept->rfind("image/", 0) == 0;
}

http::Headers forwardable(const http::Headers& headers) {
  http::Headers out;
  for (const auto& [k, v] : headers) {
    if (http::is_hop_by_hop(k) || iequals(k, "Proxy-Connection") ||
        iequals(k, "Content-Length")) {
      continue;
    }
    out.emplace_back(k, v);
  }
  return out;
}

// Conditional and partial requests would return bodies we cannot lift.
http::Headers variant_headers(const http::Headers& headers) {
  http::Headers out;
  for (const auto& [k, v] : forwardable(headers)) {
    if (iequals(k, "Range") || iequals(k, "If-Range") || iequals(k, "If-None-Match") ||
        iequals(k, "If-Modified-Since")) {
      continue;
    }
    out.emplace_back(k, v);
  }
  return out;
}

ProxyResponse relay(http::FetchResponse res) {
  ProxyResponse out;
  out.status = res.status;
  out.headers = forwardable(res.headers);
  out.body = std::move(res.body);
  return out;
}

ProxyResponse error_response(int status, const std::string& message) {
  return {status, {{"Content-Type", "text/plain; charset=utf-8"}}, message + "\n"};
}

std::string random_hex() {
  std::random_device rd;
  std::ostringstream out;
  out << std::hex << rd();
  return out.str();
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kLift: return "lift";
    case Mode::kPassthrough: return "passthrough";
    case Mode::kMeasureOnly: return "measure";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "lift") return Mode::kLift;
  if (text == "passthrough") return Mode::kPassthrough;
  if (text == "measure" || text == "measure-only" || text == "measureonly") {
    return Mode::kMeasureOnly;
  }
  return std::nullopt;
}

std::optional<Viewport> parse_viewport(std::string_view text) {
  const auto x = text.find('x');
  if (x == std::string_view::npos) return std::nullopt;
  const auto w = parse_int(text.substr(0, x));
  const auto h = parse_int(text.substr(x + 1));
  if (!w || !h || *w <= 0 || *h <= 0) return std::nullopt;
  return Viewport{*w, *h};
}

std::optional<ListenAddress> parse_listen(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto port = parse_int(text.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) return std::nullopt;
  std::string host(text.substr(0, colon));
  if (host.empty()) host = "0.0.0.0";
  return ListenAddress{host, *port};
}

void ProxyConfig::validate() const {
  if (!parse_listen(listen)) throw ConfigError("invalid listen address '" + listen + "'");
  if (viewport.width <= 0 || viewport.height <= 0) throw ConfigError("invalid viewport");
  if (target_width <= 0 || target_width >= viewport.width) {
    throw ConfigError("target width must be positive and below the viewport width (" +
                      std::to_string(viewport.width) + ")");
  }
  if (max_concurrent < 1) throw ConfigError("max_concurrent must be at least 1");
  if (metrics_push && !http::Url::parse(*metrics_push)) {
    throw ConfigError("invalid metrics push URL '" + *metrics_push + "'");
  }
}

ProxyService::ProxyService(ProxyConfig config, std::shared_ptr<http::Fetcher> upstream,
                           std::shared_ptr<const sr::Model> model)
    : config_(std::move(config)),
      upstream_(upstream ? std::move(upstream) : std::make_shared<http::HttpFetcher>()),
      registry_(config_.patterns_file.empty() ? patterns::Registry::defaults()
                                              : patterns::Registry::load_file(config_.patterns_file)),
      recorder_({.jsonl_path = config_.telemetry_path}) {
  config_.validate();
  if (!model) model = std::make_shared<const sr::Model>(sr::resolve_model(config_.model));
  pipeline_ = std::make_unique<pipeline::Pipeline>(
      std::move(model),
      pipeline::PipelineConfig{.max_concurrent = config_.max_concurrent,
                               .input_side = config_.input_side});
  pipeline_->set_listener([this](const pipeline::LiftResult& r) {
    auto rec = telemetry::lift_record(r);
    {
      std::lock_guard lock(mu_);
      lifts_.push_back(rec);
    }
    recorder_.record(std::move(rec));
  });
  if (config_.metrics_push) {
    push_thread_ = std::thread([this] { push_loop(); });
  }
}

ProxyService::~ProxyService() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  push_cv_.notify_all();
  if (push_thread_.joinable()) push_thread_.join();
  pipeline_->shutdown();
}

ProxyResponse ProxyService::handle(const ProxyRequest& request) {
  {
    std::lock_guard lock(mu_);
    ++counters_.requests;
  }
  if (!request.target.empty() && request.target.front() == '/') return handle_local(request);
  const auto url = http::Url::parse(request.target);
  if (!url) return error_response(400, "unsupported request target");
  if (config_.mode != Mode::kPassthrough && request.method == "GET" &&
      looks_like_image_request(request, *url)) {
    return handle_image(request, request.target);
  }
  return forward(request);
}

ProxyResponse ProxyService::forward(const ProxyRequest& request) {
  http::FetchRequest req;
  req.method = request.method;
  req.url = request.target;
  req.headers = forwardable(request.headers);
  req.body = request.body;
  auto res = upstream_->fetch(req);
  if (!res.transport_ok()) {
    std::lock_guard lock(mu_);
    ++counters_.upstream_errors;
    return error_response(502, "upstream fetch failed: " + res.error);
  }
  const auto length = http::find_header(res.headers, "Content-Length");
  auto out = relay(std::move(res));
  // A HEAD reply has no body to measure, so the origin's length is kept.
  if (request.method == "HEAD" && length) out.headers.emplace_back("Content-Length", *length);
  return out;
}

ProxyResponse ProxyService::serve_original(const ProxyRequest& request, const std::string& url,
                                           telemetry::Verdict verdict,
                                           std::uint64_t extra_bytes) {
  http::FetchRequest req;
  req.url = url;
  req.headers = forwardable(request.headers);
  auto res = upstream_->fetch(req);
  if (!res.transport_ok()) {
    std::lock_guard lock(mu_);
    ++counters_.upstream_errors;
    return error_response(502, "upstream fetch failed: " + res.error);
  }
  telemetry::TransferRecord rec;
  rec.url = url;
  rec.verdict = verdict;
  rec.bytes_original_estimate = res.body.size();
  rec.bytes_transferred = res.body.size() + extra_bytes;
  add_transfer(std::move(rec));
  return relay(std::move(res));
}

std::optional<std::uint64_t> ProxyService::head_length(const ProxyRequest& request,
                                                       const std::string& url) {
  http::FetchRequest req;
  req.method = "HEAD";
  req.url = url;
  req.headers = variant_headers(request.headers);
  const auto res = upstream_->fetch(req);
  if (!res.success()) return std::nullopt;
  const auto len = http::find_header(res.headers, "Content-Length");
  if (!len) return std::nullopt;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(len->data(), len->data() + len->size(), v);
  if (ec != std::errc{} || ptr != len->data() + len->size() || v == 0) return std::nullopt;
  return v;
}

ProxyResponse ProxyService::handle_image(const ProxyRequest& request, const std::string& url) {
  using telemetry::Verdict;
  {
    std::lock_guard lock(mu_);
    ++counters_.image_requests;
  }
  note_activity();

  const auto match = registry_.detect(url);
  std::string rewritten;
  if (match) {
    try {
      rewritten = registry_.rewrite(url, *match, config_.target_width);
    } catch (const NoReductionError&) {
    }
  }
  if (rewritten.empty()) return serve_original(request, url, Verdict::kPassthrough, 0);

  http::FetchRequest vreq;
  vreq.url = rewritten;
  vreq.headers = variant_headers(request.headers);
  auto variant = upstream_->fetch(vreq);
  const std::uint64_t variant_bytes = variant.body.size();
  const auto info = variant.success() ? image::read_info(variant.body) : std::nullopt;
  // An origin that ignores the parameter sends something too wide; the
  // client gets the untouched original instead.
  if (!info || info->width > config_.target_width + 1) {
    return serve_original(request, url, Verdict::kPassthrough, variant_bytes);
  }

  if (config_.mode == Mode::kMeasureOnly) {
    auto res = serve_original(request, url, Verdict::kPassthrough, variant_bytes);
    if (res.status >= 200 && res.status < 300 && res.body.size() > variant_bytes) {
      std::lock_guard lock(mu_);
      counters_.measured_savings += res.body.size() - variant_bytes;
    }
    return res;
  }

  const int original_width = match->original_width.value_or(info->width);
  const int original_height =
      image::proportional_height(info->width, info->height, original_width);
  bool estimated = false;
  auto original_bytes = head_length(request, url);
  if (!original_bytes) {
    const double ratio = static_cast<double>(original_width) / info->width;
    original_bytes = static_cast<std::uint64_t>(variant_bytes * ratio * ratio + 0.5);
    estimated = true;
  }
  if (*original_bytes <= variant_bytes) {
    return serve_original(request, url, Verdict::kPassthrough, variant_bytes);
  }

  const auto lifted = pipeline_->run_now(
      {variant.body, pipeline::Dims{original_width, original_height}, std::nullopt, url});
  if (!lifted.ok()) {
    return serve_original(request, url, Verdict::kLiftFailed, variant_bytes);
  }

  ProxyResponse out;
  const bool alpha = lifted.image.has_alpha();
  out.body = alpha ? image::encode_png(lifted.image) : image::encode_jpeg(lifted.image, 85);
  out.headers.emplace_back("Content-Type", alpha ? "image/png" : "image/jpeg");
  if (const auto cc = http::find_header(variant.headers, "Cache-Control")) {
    out.headers.emplace_back("Cache-Control", *cc);
  }
  out.headers.emplace_back("X-PixLift", "lifted; job=" + std::to_string(lifted.job_id));

  telemetry::TransferRecord rec;
  rec.url = url;
  rec.verdict = Verdict::kRewritten;
  rec.bytes_original_estimate = *original_bytes;
  rec.bytes_transferred = variant_bytes;
  rec.estimated = estimated;
  rec.lift_job = lifted.job_id;
  add_transfer(std::move(rec));
  return out;
}

ProxyResponse ProxyService::handle_local(const ProxyRequest& request) {
  const auto path = std::string_view(request.target).substr(0, request.target.find('?'));
  if (path == "/metrics" && request.method == "GET") {
    return {200, {{"Content-Type", "application/json"}}, metrics_snapshot().dump(2) + "\n"};
  }
  if (path == "/lift" && (request.method == "POST" || request.method == "GET")) {
    // Lift API for content the proxy cannot see inside TLS tunnels: the
    // client names the image URL, the proxy fetches and lifts it.
    std::string url;
    if (request.method == "GET") {
      const auto q = request.target.find("?url=");
      if (q != std::string::npos) url = request.target.substr(q + 5);
    } else {
      try {
        url = json::parse(request.body).at("url").get<std::string>();
      } catch (const json::exception&) {
        url = request.body;
        while (!url.empty() && std::isspace(static_cast<unsigned char>(url.back()))) {
          url.pop_back();
        }
      }
    }
    if (!http::Url::parse(url)) return error_response(400, "lift needs an absolute image url");
    ProxyRequest inner;
    inner.method = "GET";
    inner.target = url;
    inner.headers = {{"Accept", "image/*"}};
    if (config_.mode == Mode::kPassthrough) return forward(inner);
    return handle_image(inner, url);
  }
  return error_response(404, "unknown endpoint");
}

void ProxyService::add_transfer(telemetry::TransferRecord record) {
  {
    std::lock_guard lock(mu_);
    auto& c = counters_;
    c.bytes_transferred += record.bytes_transferred;
    switch (record.verdict) {
      case telemetry::Verdict::kRewritten:
        ++c.rewritten;
        c.bytes_original_estimate += record.bytes_original_estimate;
        c.bytes_saved += record.bytes_original_estimate - record.bytes_transferred;
        break;
      case telemetry::Verdict::kPassthrough: ++c.passthrough; break;
      case telemetry::Verdict::kLiftFailed: ++c.lift_failed; break;
    }
    transfers_.push_back(record);
  }
  recorder_.record(std::move(record));
  note_activity();
}

std::vector<telemetry::TransferRecord> ProxyService::transfers() const {
  std::lock_guard lock(mu_);
  return transfers_;
}

json ProxyService::metrics_snapshot() const {
  std::lock_guard lock(mu_);
  const auto& c = counters_;
  json out = {{"schema_version", telemetry::kSchemaVersion},
              {"mode", to_string(config_.mode)},
              {"target_width", config_.target_width},
              {"model", pipeline_->model().graph.name},
              {"counters",
               {{"requests", c.requests},
                {"image_requests", c.image_requests},
                {"rewritten", c.rewritten},
                {"passthrough", c.passthrough},
                {"lift_failed", c.lift_failed},
                {"upstream_errors", c.upstream_errors}}},
              {"bytes_saved", c.bytes_saved},
              {"bytes_original_estimate", c.bytes_original_estimate},
              {"bytes_transferred", c.bytes_transferred},
              {"measured_savings", c.measured_savings},
              {"lifts", json::array()},
              {"transfers", json::array()}};
  for (const auto& l : lifts_) out["lifts"].push_back(telemetry::to_json(l));
  for (const auto& t : transfers_) out["transfers"].push_back(telemetry::to_json(t));
  return out;
}

void ProxyService::note_activity() {
  std::lock_guard lock(mu_);
  last_activity_ = std::chrono::steady_clock::now();
  dirty_ = true;
  push_cv_.notify_all();
}

void ProxyService::push_loop() {
  const std::string instance = random_hex();
  std::uint64_t generation = 0;
  std::unique_lock lock(mu_);
  while (!stopping_) {
    push_cv_.wait(lock, [this] { return stopping_ || dirty_; });
    if (stopping_) break;
    // Wait until no image activity has happened for a full window.
    const auto deadline = last_activity_ + config_.quiescence;
    if (std::chrono::steady_clock::now() < deadline) {
      push_cv_.wait_until(lock, deadline, [this] { return stopping_; });
      continue;
    }
    dirty_ = false;
    lock.unlock();
    const auto body = metrics_snapshot().dump();
    const auto key = instance + "-" + std::to_string(++generation);
    const auto res = telemetry::post_with_retry({.endpoint = *config_.metrics_push}, body, key);
    if (res.delivered) ++pushes_;
    lock.lock();
  }
}

}  // namespace pixlift::proxy
