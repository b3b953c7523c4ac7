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

#include "fixture_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>

#include "oracles.hpp"
#include "pixlift/codec.hpp"

namespace pixlift::testing {
namespace {

void start(httplib::Server& server, std::thread& thread, int& port) {
  port = server.bind_to_any_port("127.0.0.1");
  thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
}

}  // namespace

FixtureOrigin::FixtureOrigin() : FixtureOrigin(Options{}) {}

FixtureOrigin::FixtureOrigin(Options options) : options_(options) {
  image_ = smooth_image(options_.image_width, options_.image_height, 42);
  image_rgba_ = image::ImageBuffer(image_.width(), image_.height(), 4);
  for (int y = 0; y < image_.height(); ++y)
    for (int x = 0; x < image_.width(); ++x) {
      for (int c = 0; c < 3; ++c) image_rgba_.at(x, y, c) = image_.at(x, y, c);
      image_rgba_.at(x, y, 3) = static_cast<std::uint8_t>(128 + (x * 127) / image_.width());
    }
  original_jpeg_ = image::encode_jpeg(image_, 85);
  original_png_ = image::encode_png(image_rgba_);

  server_.Get(R"(/img/[^/]+\.(jpg|png))", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
    {
      std::lock_guard lock(log_mu_);
      log_.push_back(req.target);
    }
    const bool png = req.path.size() > 4 && req.path.substr(req.path.size() - 4) == ".png";
    std::string body = png ? original_png_ : original_jpeg_;
    if (options_.honor_resize && req.has_param("width")) {
      const int w = std::atoi(req.get_param_value("width").c_str());
      if (w > 0 && w < image_.width()) {
        const int h = image::proportional_height(image_.width(), image_.height(), w);
        body = png ? image::encode_png(image::resize_bilinear(image_rgba_, w, h))
                   : image::encode_jpeg(image::resize_bilinear(image_, w, h), 85);
      }
    }
    if (req.method != "HEAD") image_bytes_ += body.size();
    res.set_content(body, options_.images_as_text ? "text/plain"
                                                  : (png ? "image/png" : "image/jpeg"));
  });
  server_.Get("/page.html", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html><body><img src=\"/img/a.jpg?width=800\"></body></html>",
                    "text/html; charset=utf-8");
  });
  server_.Post("/echo", [](const httplib::Request& req, httplib::Response& res) {
    res.set_content(req.body, "application/octet-stream");
  });
  start(server_, thread_, port_);
}

FixtureOrigin::~FixtureOrigin() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

std::vector<std::string> FixtureOrigin::request_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

FixtureCollector::FixtureCollector(int fail_first) : fail_first_(fail_first) {
  server_.Post("/collect", [this](const httplib::Request& req, httplib::Response& res) {
    ++attempts_;
    if (fail_first_.load() > 0) {
      --fail_first_;
      res.status = 503;
      return;
    }
    std::lock_guard lock(mu_);
    received_.push_back({req.body, req.get_header_value("Idempotency-Key")});
    res.status = 204;
  });
  start(server_, thread_, port_);
}

FixtureCollector::~FixtureCollector() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

std::vector<FixtureCollector::Received> FixtureCollector::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace pixlift::testing
