#include "rehab/server.hpp"

#include "rehab/error.hpp"
#include "rehab/queue.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace rehab {

Endpoint parse_endpoint(const std::string& text) {
  Endpoint ep;
  std::string port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    if (colon > 0) ep.host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
  }
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != port_text.size() || port < 0 || port > 65535) {
    throw std::invalid_argument("bad endpoint '" + text + "', expected host:port");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

struct Server::Connection {
  int fd = -1;
  std::thread thread;
  std::mutex write_mu;
  std::atomic<bool> done{false};

  bool send_line(const std::string& line) {
    std::lock_guard lock(write_mu);
    std::string buf = line + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::send(fd, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }
};

Server::Server(ServerOptions opts) : opts_(std::move(opts)) {}

Server::~Server() { stop(); }

void Server::log(const std::string& msg) const {
  if (opts_.on_log) opts_.on_log(msg);
}

void Server::start() {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(opts_.endpoint.port);
  if (const int rc = ::getaddrinfo(opts_.endpoint.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw BindFailure("cannot resolve " + opts_.endpoint.host + ": " + ::gai_strerror(rc));
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw BindFailure(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) < 0 || ::listen(fd, 64) < 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw BindFailure("cannot bind " + opts_.endpoint.host + ":" + port + ": " + why);
  }
  ::freeaddrinfo(res);

  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  listen_fd_ = fd;
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
  log("listening on " + opts_.endpoint.host + ":" + std::to_string(port_));
}

void Server::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, 100);
    if (rc <= 0) continue;
    const int cfd = ::accept(listen_fd_, nullptr, nullptr);
    if (cfd < 0) continue;

    auto conn = std::make_shared<Connection>();
    conn->fd = cfd;
    std::lock_guard lock(mu_);
    // Reap finished connections as we go.
    for (auto it = conns_.begin(); it != conns_.end();) {
      if ((*it)->done) {
        (*it)->thread.join();
        ::close((*it)->fd);
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
    conns_.push_back(conn);
    conn->thread = std::thread([this, conn] {
      try {
        serve_connection(conn);
      } catch (const std::exception& e) {
        log(std::string("connection failed: ") + e.what());
      }
      ::shutdown(conn->fd, SHUT_RDWR);
      conn->done = true;
    });
  }
}

namespace {

// Splits the socket byte stream into lines. Returns false on EOF/error.
class LineReader {
public:
  LineReader(int fd, std::size_t max_line) : fd_(fd), max_line_(max_line) {}

  enum class Status { Line, Eof, TooLong };

  Status next(std::string& line) {
    for (;;) {
      if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
        line = buf_.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        buf_.erase(0, nl + 1);
        return Status::Line;
      }
      if (buf_.size() > max_line_) return Status::TooLong;
      char chunk[8192];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return Status::Eof;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

private:
  int fd_;
  std::size_t max_line_;
  std::string buf_;
};

struct Inbound {
  std::optional<PoseFrame> frame;
  // A line that failed to decode; the worker logs it against the session.
  std::optional<std::uint64_t> frame_id;
  std::optional<std::int64_t> t_ms;
  std::string reason;
  std::string detail;
};

}  // namespace

void Server::serve_connection(const std::shared_ptr<Connection>& conn) {
  LineReader reader(conn->fd, opts_.max_line_bytes);
  std::string line;

  // Handshake: the first non-empty line must open the session.
  LineReader::Status st;
  do {
    st = reader.next(line);
  } while (st == LineReader::Status::Line && line.find_first_not_of(" \t") == std::string::npos);
  if (st != LineReader::Status::Line) {
    if (st == LineReader::Status::TooLong) conn->send_line(encode_error("malformed_record", "line too long"));
    return;
  }

  std::optional<Session> session;
  try {
    const auto j = parse_record(line);
    session.emplace(session_from_open(open_from_json(j), opts_.engine));
  } catch (const Error& e) {
    conn->send_line(encode_error(e.code(), e.what()));
    log(std::string("rejected connection: ") + e.what());
    return;
  } catch (const std::exception& e) {
    conn->send_line(encode_error("internal", e.what()));
    return;
  }
  for (const auto& w : session->state().warnings) log("session " + session->state().session_id + ": " + w);

  DropOldestQueue<Inbound> queue(opts_.queue_capacity);
  std::mutex drops_mu;
  std::vector<Inbound> drops;  // evicted or undecodable, logged by the worker
  auto note_drop = [&](Inbound in) {
    std::lock_guard lock(drops_mu);
    drops.push_back(std::move(in));
  };

  // Worker: owns the session. The reader below never touches it.
  std::thread worker([&] {
    using clock = std::chrono::steady_clock;
    auto last_send = clock::now();
    auto flush_drops = [&] {
      std::vector<Inbound> pending;
      {
        std::lock_guard lock(drops_mu);
        pending.swap(drops);
      }
      for (auto& d : pending) session->record_drop(d.frame_id, d.t_ms, d.reason, d.detail);
    };
    for (;;) {
      const auto wait = std::min<std::chrono::milliseconds>(opts_.heartbeat, std::chrono::milliseconds(100));
      auto item = queue.pop(wait);
      flush_drops();
      if (!item) {
        if (queue.drained()) break;
        if (clock::now() - last_send >= opts_.heartbeat) {
          conn->send_line(encode_heartbeat());
          last_send = clock::now();
        }
        continue;
      }
      if (!item->frame) {
        session->record_drop(item->frame_id, item->t_ms, item->reason, item->detail);
        continue;
      }
      if (auto ev = session->step(*item->frame)) {
        conn->send_line(encode_event(*ev));
        last_send = clock::now();
      }
    }
    flush_drops();
  });

  for (;;) {
    st = reader.next(line);
    if (st == LineReader::Status::Eof) break;
    if (st == LineReader::Status::TooLong) {
      conn->send_line(encode_error("malformed_record", "line too long"));
      note_drop({std::nullopt, std::nullopt, std::nullopt, "malformed_record", "line too long"});
      break;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    Inbound in;
    try {
      const auto j = parse_record(line);
      const std::string type = j.contains("type") && j["type"].is_string() ? j["type"].get<std::string>() : "";
      if (type == "heartbeat") continue;
      if (type != "frame") throw MalformedRecord(0, "expected a frame record, got '" + type + "'");
      in.frame = frame_from_json(j, opts_.engine.mapping);
    } catch (const Error& e) {
      conn->send_line(encode_error(e.code(), e.what()));
      note_drop({std::nullopt, std::nullopt, std::nullopt, e.code(), e.what()});
      continue;
    }
    const auto id = in.frame->frame_id;
    const auto t = in.frame->t_ms;
    if (auto evicted = queue.push(std::move(in))) {
      if (evicted->frame) {
        note_drop({std::nullopt, evicted->frame->frame_id, evicted->frame->t_ms, "backpressure",
                   "evicted by frame " + std::to_string(id) + " at t_ms " + std::to_string(t)});
      }
    }
  }
  queue.close();
  worker.join();

  if (opts_.on_session_end) opts_.on_session_end(*session);
}

void Server::wait() {
  while (!stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

void Server::stop() {
  if (listen_fd_ < 0 && !acceptor_.joinable()) return;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::list<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) {
    ::shutdown(c->fd, SHUT_RDWR);
    if (c->thread.joinable()) c->thread.join();
    ::close(c->fd);
  }
}

}  // namespace rehab
