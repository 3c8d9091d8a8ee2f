#pragma once

#include <atomic>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "bwm/service.hpp"

namespace bwm::service {

// WebSocket endpoint /sessions/{id}/stream. One thread per connection; each
// text message is an input sample answered by a weight tick.
class StreamServer {
 public:
  explicit StreamServer(SessionManager& manager);
  ~StreamServer();

  void start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

  // Reply to one message on a session's stream.
  static std::string handle_message(Session& session, const std::string& text);

 private:
  struct Impl;
  void accept_loop();
  void serve(int fd);

  SessionManager& manager_;
  std::unique_ptr<Impl> impl_;
  std::thread acceptor_;
  std::vector<std::thread> workers_;
  std::set<int> open_;
  std::mutex mutex_;
  std::atomic<bool> running_{false};
  int port_ = 0;
};

}  // namespace bwm::service
