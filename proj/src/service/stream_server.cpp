#include "stream_server.hpp"

#include <sys/socket.h>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "bwm/error.hpp"

namespace bwm::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct StreamServer::Impl {
  net::io_context io;
  tcp::acceptor acceptor{io};
};

StreamServer::StreamServer(SessionManager& manager) : manager_(manager), impl_(std::make_unique<Impl>()) {}

StreamServer::~StreamServer() { stop(); }

void StreamServer::start(const std::string& host, int port) {
  boost::system::error_code ec;
  const tcp::endpoint endpoint(net::ip::make_address(host, ec), static_cast<unsigned short>(port));
  if (ec) fail(ErrorKind::Usage, "invalid host '" + host + "'");
  auto& a = impl_->acceptor;
  a.open(endpoint.protocol(), ec);
  if (!ec) a.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) a.bind(endpoint, ec);
  if (!ec) a.listen(net::socket_base::max_listen_connections, ec);
  if (ec) fail(ErrorKind::Io, "cannot bind stream port " + std::to_string(port) + ": " + ec.message());
  port_ = a.local_endpoint().port();
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void StreamServer::stop() {
  if (!running_.exchange(false)) return;
  // shutdown() unblocks the threads sitting in accept() and read().
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  {
    std::lock_guard lock(mutex_);
    for (int fd : open_) ::shutdown(fd, SHUT_RDWR);
  }
  if (acceptor_.joinable()) acceptor_.join();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
  workers_.clear();
  boost::system::error_code ec;
  impl_->acceptor.close(ec);
}

void StreamServer::accept_loop() {
  while (running_) {
    boost::system::error_code ec;
    tcp::socket socket(impl_->io);
    impl_->acceptor.accept(socket, ec);
    if (ec) {
      if (!running_) return;
      continue;
    }
    const int fd = socket.release(ec);
    if (ec) continue;
    std::lock_guard lock(mutex_);
    if (!running_) {
      ::close(fd);
      return;
    }
    open_.insert(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

std::string StreamServer::handle_message(Session& session, const std::string& text) {
  try {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::Usage, "message is not valid JSON");
    }
    if (j.is_object() && j.value("type", "input") != "input") fail(ErrorKind::Usage, "stream accepts input messages only");
    return session.input(std::move(j)).dump();
  } catch (const Error& e) {
    return nlohmann::json{{"type", "error"}, {"error", to_string(e.kind())}, {"message", e.what()}}.dump();
  }
}

void StreamServer::serve(int fd) {
  boost::system::error_code ec;
  {
    tcp::socket socket(impl_->io);
    socket.assign(tcp::v4(), fd, ec);
    if (!ec) {
      websocket::stream<tcp::socket> ws(std::move(socket));
      beast::flat_buffer buffer;
      http::request<http::string_body> req;
      http::read(ws.next_layer(), buffer, req, ec);
      Session* session = nullptr;
      if (!ec) {
        const std::string target(req.target());
        const std::string prefix = "/sessions/", suffix = "/stream";
        if (target.size() > prefix.size() + suffix.size() && target.rfind(prefix, 0) == 0 &&
            target.compare(target.size() - suffix.size(), suffix.size(), suffix) == 0) {
          try {
            session = &manager_.get(target.substr(prefix.size(), target.size() - prefix.size() - suffix.size()));
          } catch (const Error&) {
          }
        }
        if (!session || !websocket::is_upgrade(req)) {
          http::response<http::string_body> res{session ? http::status::bad_request : http::status::not_found,
                                                req.version()};
          res.set(http::field::content_type, "application/json");
          res.body() = nlohmann::json{{"error", session ? "usage" : "not_found"},
                                      {"message", session ? "expected a WebSocket upgrade" : "unknown stream"}}
                           .dump();
          res.prepare_payload();
          http::write(ws.next_layer(), res, ec);
        } else {
          ws.accept(req, ec);
          while (!ec && running_) {
            beast::flat_buffer message;
            ws.read(message, ec);
            if (ec) break;
            const auto reply = handle_message(*session, beast::buffers_to_string(message.data()));
            ws.text(true);
            ws.write(net::buffer(reply), ec);
          }
        }
      }
      std::lock_guard lock(mutex_);
      open_.erase(fd);
      ws.next_layer().close(ec);
      return;
    }
  }
  std::lock_guard lock(mutex_);
  open_.erase(fd);
  ::close(fd);
}

}  // namespace bwm::service
