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

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>

#include <condition_variable>
#include <mutex>
#include <set>

#include "pixlift/errors.hpp"
#include "pixlift/proxy.hpp"

namespace pixlift::proxy {

namespace beast = boost::beast;
namespace bhttp = boost::beast::http;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::uint64_t kBodyLimit = 64ull << 20;

using SocketPtr = std::shared_ptr<tcp::socket>;

void pump(tcp::socket& from, tcp::socket& to) {
  std::array<char, 16384> buf;
  boost::system::error_code ec;
  for (;;) {
    const auto n = from.read_some(net::buffer(buf), ec);
    if (ec || n == 0) break;
    net::write(to, net::buffer(buf.data(), n), ec);
    if (ec) break;
  }
  to.shutdown(tcp::socket::shutdown_send, ec);
}

}  // namespace

struct ProxyServer::Impl {
  ProxyService& service;
  ListenAddress listen;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;

  std::mutex mu;
  std::condition_variable cv;
  std::set<SocketPtr> sockets;
  int active = 0;
  bool stopped = false;

  Impl(ProxyService& s, ListenAddress l) : service(s), listen(std::move(l)) {}

  void track(const SocketPtr& s) {
    std::lock_guard lock(mu);
    sockets.insert(s);
  }
  void untrack(const SocketPtr& s) {
    std::lock_guard lock(mu);
    sockets.erase(s);
  }

  void accept() {
    auto sock = std::make_shared<tcp::socket>(ioc);
    acceptor.async_accept(*sock, [this, sock](boost::system::error_code ec) {
      if (ec) return;
      {
        std::lock_guard lock(mu);
        if (stopped) return;
        sockets.insert(sock);
        ++active;
      }
      std::thread([this, sock] {
        session(sock);
        std::lock_guard lock(mu);
        sockets.erase(sock);
        --active;
        cv.notify_all();
      }).detach();
      accept();
    });
  }

  void session(const SocketPtr& sock) {
    beast::flat_buffer buffer;
    boost::system::error_code ec;
    for (;;) {
      bhttp::request_parser<bhttp::string_body> parser;
      parser.body_limit(kBodyLimit);
      bhttp::read(*sock, buffer, parser, ec);
      if (ec) break;
      auto& req = parser.get();
      if (req.method() == bhttp::verb::connect) {
        tunnel(sock, std::string(req.target()), buffer);
        return;
      }
      ProxyRequest preq;
      preq.method = std::string(req.method_string());
      preq.target = std::string(req.target());
      for (const auto& field : req) {
        preq.headers.emplace_back(std::string(field.name_string()), std::string(field.value()));
      }
      preq.body = std::move(req.body());
      ProxyResponse pres;
      try {
        pres = service.handle(preq);
      } catch (const std::exception& e) {
        pres = {500, {{"Content-Type", "text/plain"}}, std::string(e.what()) + "\n"};
      }

      const bool keep_alive = req.keep_alive();
      if (req.method() == bhttp::verb::head) {
        bhttp::response<bhttp::empty_body> res{static_cast<bhttp::status>(pres.status),
                                               req.version()};
        for (const auto& [k, v] : pres.headers) res.insert(k, v);
        res.keep_alive(keep_alive);
        bhttp::response_serializer<bhttp::empty_body> sr{res};
        bhttp::write_header(*sock, sr, ec);
      } else {
        bhttp::response<bhttp::string_body> res{static_cast<bhttp::status>(pres.status),
                                                req.version()};
        for (const auto& [k, v] : pres.headers) res.insert(k, v);
        res.body() = std::move(pres.body);
        res.keep_alive(keep_alive);
        res.prepare_payload();
        bhttp::write(*sock, res, ec);
      }
      if (ec || !keep_alive) break;
    }
    sock->shutdown(tcp::socket::shutdown_both, ec);
  }

  // Opaque byte relay for CONNECT; TLS is never inspected.
  void tunnel(const SocketPtr& client, const std::string& authority, beast::flat_buffer& pending) {
    boost::system::error_code ec;
    const auto colon = authority.rfind(':');
    auto upstream = std::make_shared<tcp::socket>(ioc);
    if (colon != std::string::npos) {
      tcp::resolver resolver(ioc);
      const auto endpoints =
          resolver.resolve(authority.substr(0, colon), authority.substr(colon + 1), ec);
      if (!ec) net::connect(*upstream, endpoints, ec);
    } else {
      ec = net::error::invalid_argument;
    }
    if (ec) {
      const std::string reply = "HTTP/1.1 502 Bad Gateway\r\nContent-Length: 0\r\n\r\n";
      net::write(*client, net::buffer(reply), ec);
      client->shutdown(tcp::socket::shutdown_both, ec);
      return;
    }
    track(upstream);
    const std::string ok = "HTTP/1.1 200 Connection Established\r\n\r\n";
    net::write(*client, net::buffer(ok), ec);
    if (!ec && pending.size() > 0) net::write(*upstream, pending.data(), ec);
    if (!ec) {
      std::thread up([&] { pump(*client, *upstream); });
      pump(*upstream, *client);
      up.join();
    }
    upstream->close(ec);
    untrack(upstream);
  }
};

ProxyServer::ProxyServer(ProxyService& service, const ListenAddress& listen)
    : impl_(std::make_unique<Impl>(service, listen)) {}

ProxyServer::~ProxyServer() { stop(); }

void ProxyServer::start() {
  auto& im = *impl_;
  boost::system::error_code ec;
  const auto address = net::ip::make_address(im.listen.host, ec);
  if (ec) throw ConfigError("invalid listen host '" + im.listen.host + "'");
  const tcp::endpoint endpoint(address, static_cast<unsigned short>(im.listen.port));
  im.acceptor.open(endpoint.protocol());
  im.acceptor.set_option(net::socket_base::reuse_address(true));
  im.acceptor.bind(endpoint, ec);
  if (ec) throw ConfigError("cannot listen on " + im.listen.host + ":" +
                            std::to_string(im.listen.port) + ": " + ec.message());
  im.acceptor.listen();
  port_ = im.acceptor.local_endpoint().port();
  im.accept();
  im.io_thread = std::thread([&im] { im.ioc.run(); });
}

void ProxyServer::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->cv.wait(lock, [this] { return impl_->stopped; });
}

void ProxyServer::stop() {
  auto& im = *impl_;
  {
    std::lock_guard lock(im.mu);
    if (im.stopped) return;
    im.stopped = true;
    boost::system::error_code ec;
    for (const auto& s : im.sockets) s->shutdown(tcp::socket::shutdown_both, ec);
  }
  im.cv.notify_all();
  net::post(im.ioc, [&im] {
    boost::system::error_code ec;
    im.acceptor.close(ec);
  });
  im.ioc.stop();
  if (im.io_thread.joinable()) im.io_thread.join();
  std::unique_lock lock(im.mu);
  im.cv.wait(lock, [&im] { return im.active == 0; });
}

}  // namespace pixlift::proxy
