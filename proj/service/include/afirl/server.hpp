#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "afirl/session.hpp"

namespace afirl::session {

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  int threads = 1;
};

/// HTTP + WebSocket front end for a SessionManager.
///
///   POST /session          create from a JSON config; 201 {"v", "sessionId", "config"}
///   GET  /session/{id}     snapshot JSON; 404 for unknown ids
///   GET  /session/{id}/ws  WebSocket upgrade carrying the JSON wire messages
class Server {
 public:
  Server(ServerOptions options, std::shared_ptr<SessionManager> sessions);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts the I/O threads. Throws std::runtime_error if the
  /// address cannot be bound.
  void start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  /// The bound port, valid after start().
  std::uint16_t port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace afirl::session
