#pragma once

#include <memory>
#include <string>

#include "bwm/error.hpp"
#include "bwm/service.hpp"

namespace bwm::service {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;         // 0 picks a free port
  int stream_port = -1;    // -1: port + 1; 0 picks a free port
};

// HTTP endpoints plus a WebSocket input channel, both over one SessionManager.
//
// HTTP (JSON bodies):
//   GET  /health
//   GET  /sessions                      POST /sessions {participant, base_kg, model_id, ...}
//   GET  /sessions/{id}                 client view
//   POST /sessions/{id}/present         {level?, t?}
//   POST /sessions/{id}/input           input sample, t optional -> {"type":"weight","t","kg"}
//   POST /sessions/{id}/estimate        {kg?, t?}
//   GET  /sessions/{id}/results         analysis report
//   GET  /sessions/{id}/log             session log (JSON Lines)
//   GET  /sessions/{id}/display         {"positions": [x, y, z, ...]}
//   GET  /models/{id}/morph-assets
// Errors: {"error": kind, "message": text} with 400 / 404 / 409 / 500.
//
// WebSocket ws://host:stream_port/sessions/{id}/stream: each text message is an
// input sample and is answered by a weight tick or {"type":"error", ...}.
class Server {
 public:
  Server(SessionManager& manager, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds both ports and serves on background threads.
  void start();
  void stop();

  int port() const;
  int stream_port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// HTTP status for an error kind.
int http_status(ErrorKind kind);

}  // namespace bwm::service
