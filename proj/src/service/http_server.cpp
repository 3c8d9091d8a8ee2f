#include <thread>

#include "bwm/error.hpp"
#include "bwm/server.hpp"
#include "stream_server.hpp"

// After Eigen: resolv.h defines a _res macro that clashes with Eigen names.
#include <httplib.h>

namespace bwm::service {
namespace {

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) fail(ErrorKind::Usage, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Usage, std::string("request body is not valid JSON: ") + e.what());
  }
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::Usage, std::string("field '") + key + "' has the wrong type");
  }
}

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

// Wraps a handler so errors become JSON responses.
httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_json(res, {{"error", to_string(e.kind())}, {"message", e.what()}}, http_status(e.kind()));
    } catch (const std::exception& e) {
      send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
    }
  };
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Data: return 400;
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Protocol: return 409;
    case ErrorKind::Io:
    case ErrorKind::Numeric: return 500;
  }
  return 500;
}

struct Server::Impl {
  SessionManager& manager;
  ServerOptions options;
  httplib::Server http;
  StreamServer stream;
  std::thread http_thread;
  int port = 0;
  bool running = false;

  Impl(SessionManager& m, ServerOptions o) : manager(m), options(std::move(o)), stream(m) { routes(); }

  void routes() {
    http.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}, {"models", manager.models().ids()}, {"sessions", manager.ids().size()}});
    }));
    http.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"sessions", manager.ids()}});
    }));
    http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = manager.create(session_config_from_json(parse_body(req)));
      send_json(res, {{"id", id}, {"session", manager.get(id).view()}}, 201);
    }));
    http.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, manager.get(req.matches[1]).view());
    }));
    http.Post(R"(/sessions/([^/]+)/present)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      send_json(res, manager.get(req.matches[1]).present(optional_field<int>(body, "level"),
                                                         optional_field<double>(body, "t")));
    }));
    http.Post(R"(/sessions/([^/]+)/input)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, manager.get(req.matches[1]).input(parse_body(req)));
    }));
    http.Post(R"(/sessions/([^/]+)/estimate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      send_json(res, manager.get(req.matches[1]).estimate(optional_field<double>(body, "kg"),
                                                          optional_field<double>(body, "t")));
    }));
    http.Get(R"(/sessions/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(tasks::format_report(manager.results(req.matches[1])), "application/json");
    }));
    http.Get(R"(/sessions/([^/]+)/log)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(manager.export_log(req.matches[1]), "application/x-ndjson");
    }));
    http.Get(R"(/sessions/([^/]+)/display)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json flat = nlohmann::json::array();
      for (const auto& p : manager.display(req.matches[1])) {
        flat.push_back(p.x());
        flat.push_back(p.y());
        flat.push_back(p.z());
      }
      send_json(res, {{"positions", flat}});
    }));
    http.Get(R"(/models/([^/]+)/morph-assets)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto& o = manager.options();
      send_json(res, manager.models().assets(req.matches[1], o.morph_spacing_kg, o.stitch)->to_json());
    }));
  }
};

Server::Server(SessionManager& manager, ServerOptions options)
    : impl_(std::make_unique<Impl>(manager, std::move(options))) {}

Server::~Server() { stop(); }

void Server::start() {
  auto& i = *impl_;
  if (i.running) return;
  if (i.options.port == 0) {
    i.port = i.http.bind_to_any_port(i.options.host);
  } else {
    i.port = i.http.bind_to_port(i.options.host, i.options.port) ? i.options.port : -1;
  }
  if (i.port < 0) fail(ErrorKind::Io, "cannot bind HTTP port " + std::to_string(i.options.port));
  const int stream_port = i.options.stream_port < 0 ? i.port + 1 : i.options.stream_port;
  i.stream.start(i.options.host, stream_port);
  i.http_thread = std::thread([&i] { i.http.listen_after_bind(); });
  i.http.wait_until_ready();
  i.running = true;
}

void Server::stop() {
  auto& i = *impl_;
  if (!i.running) return;
  i.http.stop();
  if (i.http_thread.joinable()) i.http_thread.join();
  i.stream.stop();
  i.running = false;
}

int Server::port() const { return impl_->port; }
int Server::stream_port() const { return impl_->stream.port(); }

}  // namespace bwm::service
