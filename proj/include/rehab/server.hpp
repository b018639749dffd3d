#pragma once

#include "rehab/ingest.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace rehab {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7878;
};

// "host:port", ":port" or "port". Throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& text);

struct ServerOptions {
  Endpoint endpoint;
  EngineConfig engine;
  std::chrono::milliseconds heartbeat{5000};
  std::size_t queue_capacity = 64;
  std::size_t max_line_bytes = 1 << 20;
  // Called from connection threads.
  std::function<void(const std::string&)> on_log;
  std::function<void(const Session&)> on_session_end;
};

// Thread per connection; each connection owns one Session.
class Server {
public:
  explicit Server(ServerOptions opts);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting. Throws BindFailure.
  void start();
  // Bound port (useful with port 0).
  std::uint16_t port() const { return port_; }
  // Blocks until stop() is called from elsewhere.
  void wait();
  void stop();
  // Async-signal-safe; wait() returns soon after.
  void request_stop() { stopping_ = true; }

private:
  struct Connection;
  void accept_loop();
  void serve_connection(const std::shared_ptr<Connection>& conn);
  void log(const std::string& msg) const;

  ServerOptions opts_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<std::shared_ptr<Connection>> conns_;
};

}  // namespace rehab
