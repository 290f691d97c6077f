#include "tfln/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>

#include "tfln/error.hpp"

namespace tfln {

// ---------------------------------------------------------------------------
// In-process transport
// ---------------------------------------------------------------------------

namespace {

/// One direction of an in-process connection: a FIFO of encoded frames.
struct FrameQueue {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> frames;
  bool closed = false;

  void push(std::vector<std::uint8_t> frame) {
    {
      std::lock_guard lock(mutex);
      if (closed) {
        throw TransportError("send on closed connection");
      }
      frames.push_back(std::move(frame));
    }
    cv.notify_one();
  }

  std::optional<std::vector<std::uint8_t>> pop() {
    std::unique_lock lock(mutex);
    cv.wait(lock, [&] { return !frames.empty() || closed; });
    if (frames.empty()) return std::nullopt;
    std::vector<std::uint8_t> frame = std::move(frames.front());
    frames.pop_front();
    return frame;
  }

  void close() {
    {
      std::lock_guard lock(mutex);
      closed = true;
    }
    cv.notify_all();
  }
};

class InProcessConnection : public Connection {
 public:
  InProcessConnection(std::shared_ptr<FrameQueue> in, std::shared_ptr<FrameQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  ~InProcessConnection() override { close(); }

  void send(const WireMessage& msg) override { out_->push(encode_message(msg)); }

  std::optional<WireMessage> recv() override {
    std::optional<std::vector<std::uint8_t>> frame = in_->pop();
    if (!frame) return std::nullopt;
    return decode_message(*frame);
  }

  void close() override {
    in_->close();
    out_->close();
  }

 private:
  std::shared_ptr<FrameQueue> in_;
  std::shared_ptr<FrameQueue> out_;
};

struct AcceptQueue {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::unique_ptr<Connection>> pending;
  bool closed = false;
};

}  // namespace

struct InProcessTransport::Registry {
  std::mutex mutex;
  std::unordered_map<std::string, std::shared_ptr<AcceptQueue>> listeners;
};

namespace {

class InProcessListener : public Listener {
 public:
  InProcessListener(std::shared_ptr<InProcessTransport::Registry> registry,
                    std::string address, std::shared_ptr<AcceptQueue> queue)
      : registry_(std::move(registry)), address_(std::move(address)),
        queue_(std::move(queue)) {}

  ~InProcessListener() override { close(); }

  std::unique_ptr<Connection> accept() override {
    std::unique_lock lock(queue_->mutex);
    queue_->cv.wait(lock, [&] { return !queue_->pending.empty() || queue_->closed; });
    if (queue_->pending.empty()) return nullptr;
    std::unique_ptr<Connection> conn = std::move(queue_->pending.front());
    queue_->pending.pop_front();
    return conn;
  }

  std::string address() const override { return address_; }

  void close() override {
    {
      std::lock_guard lock(queue_->mutex);
      if (queue_->closed) return;
      queue_->closed = true;
    }
    queue_->cv.notify_all();
    std::lock_guard lock(registry_->mutex);
    registry_->listeners.erase(address_);
  }

 private:
  std::shared_ptr<InProcessTransport::Registry> registry_;
  std::string address_;
  std::shared_ptr<AcceptQueue> queue_;
};

}  // namespace

InProcessTransport::InProcessTransport() : registry_(std::make_shared<Registry>()) {}
InProcessTransport::~InProcessTransport() = default;

std::unique_ptr<Listener> InProcessTransport::listen(const std::string& address) {
  auto queue = std::make_shared<AcceptQueue>();
  {
    std::lock_guard lock(registry_->mutex);
    if (!registry_->listeners.emplace(address, queue).second) {
      throw TransportError("listen: address '" + address + "' already in use");
    }
  }
  return std::make_unique<InProcessListener>(registry_, address, std::move(queue));
}

std::unique_ptr<Connection> InProcessTransport::connect(const std::string& address) {
  std::shared_ptr<AcceptQueue> queue;
  {
    std::lock_guard lock(registry_->mutex);
    auto it = registry_->listeners.find(address);
    if (it == registry_->listeners.end()) {
      throw TransportError("connect: no listener at '" + address + "'");
    }
    queue = it->second;
  }
  auto a = std::make_shared<FrameQueue>();
  auto b = std::make_shared<FrameQueue>();
  auto client = std::make_unique<InProcessConnection>(a, b);
  auto server = std::make_unique<InProcessConnection>(b, a);
  {
    std::lock_guard lock(queue->mutex);
    if (queue->closed) {
      throw TransportError("connect: listener at '" + address + "' is closed");
    }
    queue->pending.push_back(std::move(server));
  }
  queue->cv.notify_one();
  return client;
}

// ---------------------------------------------------------------------------
// TCP transport
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kMaxPayload = 1ull << 30;

struct HostPort {
  std::string host;
  std::uint16_t port;
};

HostPort parse_address(const std::string& address) {
  const std::size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw TransportError("tcp: address '" + address + "' is not host:port");
  }
  HostPort hp;
  hp.host = address.substr(0, colon);
  if (hp.host == "localhost") hp.host = "127.0.0.1";
  try {
    const int port = std::stoi(address.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    hp.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw TransportError("tcp: bad port in '" + address + "'");
  }
  return hp;
}

sockaddr_in make_sockaddr(const HostPort& hp) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(hp.port);
  if (inet_pton(AF_INET, hp.host.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("tcp: cannot parse host '" + hp.host + "'");
  }
  return addr;
}

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  std::size_t sent = 0;
  while (sent < len) {
    const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      throw TransportError("tcp: send failed: " + std::string(std::strerror(errno)));
    }
    sent += static_cast<std::size_t>(n);
  }
}

/// Reads exactly len bytes. Returns false on clean EOF before the first byte;
/// EOF mid-buffer is a FormatError (truncated frame).
bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw FormatError("tcp frame: truncated after " + std::to_string(got) + " bytes");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (got == 0) return false;  // connection reset while idle: treat as closed
      throw TransportError("tcp: recv failed: " + std::string(std::strerror(errno)));
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

class TcpConnection : public Connection {
 public:
  explicit TcpConnection(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }

  ~TcpConnection() override {
    close();
    if (fd_ >= 0) ::close(fd_);
  }

  void send(const WireMessage& msg) override {
    const std::vector<std::uint8_t> frame = encode_message(msg);
    std::lock_guard lock(send_mutex_);
    if (closed_) throw TransportError("send on closed connection");
    write_all(fd_, frame.data(), frame.size());
  }

  std::optional<WireMessage> recv() override {
    std::vector<std::uint8_t> frame(kFrameHeaderSize);
    if (!read_all(fd_, frame.data(), kFrameHeaderSize)) return std::nullopt;
    std::uint64_t payload_len = 0;
    for (int i = 0; i < 8; ++i) {
      payload_len |= static_cast<std::uint64_t>(frame[9 + i]) << (8 * i);
    }
    if (payload_len > kMaxPayload) {
      throw FormatError("tcp frame: payload length " + std::to_string(payload_len) +
                        " exceeds limit");
    }
    const std::size_t rest = static_cast<std::size_t>(payload_len) + 4;
    frame.resize(kFrameHeaderSize + rest);
    if (!read_all(fd_, frame.data() + kFrameHeaderSize, rest)) {
      throw FormatError("tcp frame: truncated body");
    }
    return decode_message(frame);
  }

  void close() override {
    bool expected = false;
    if (closed_.compare_exchange_strong(expected, true)) {
      ::shutdown(fd_, SHUT_RDWR);
    }
  }

 private:
  int fd_;
  std::mutex send_mutex_;
  std::atomic<bool> closed_{false};
};

class TcpListener : public Listener {
 public:
  explicit TcpListener(const HostPort& hp) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) {
      throw TransportError("tcp: socket failed: " + std::string(std::strerror(errno)));
    }
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_sockaddr(hp);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd_);
      throw TransportError("tcp: bind to " + hp.host + ":" + std::to_string(hp.port) +
                           " failed: " + err);
    }
    if (::listen(fd_, 16) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd_);
      throw TransportError("tcp: listen failed: " + err);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    char host[INET_ADDRSTRLEN] = {};
    inet_ntop(AF_INET, &bound.sin_addr, host, sizeof(host));
    address_ = std::string(host) + ":" + std::to_string(ntohs(bound.sin_port));
  }

  ~TcpListener() override {
    close();
    if (fd_ >= 0) ::close(fd_);
  }

  std::unique_ptr<Connection> accept() override {
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) {
      if (closed_) return nullptr;
      throw TransportError("tcp: accept failed: " + std::string(std::strerror(errno)));
    }
    if (closed_) {
      ::close(client);
      return nullptr;
    }
    return std::make_unique<TcpConnection>(client);
  }

  std::string address() const override { return address_; }

  void close() override {
    bool expected = false;
    if (closed_.compare_exchange_strong(expected, true)) {
      ::shutdown(fd_, SHUT_RDWR);
    }
  }

 private:
  int fd_ = -1;
  std::string address_;
  std::atomic<bool> closed_{false};
};

}  // namespace

std::unique_ptr<Listener> TcpTransport::listen(const std::string& address) {
  return std::make_unique<TcpListener>(parse_address(address));
}

std::unique_ptr<Connection> TcpTransport::connect(const std::string& address) {
  const HostPort hp = parse_address(address);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) {
    throw TransportError("tcp: socket failed: " + std::string(std::strerror(errno)));
  }
  sockaddr_in addr = make_sockaddr(hp);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw TransportError("tcp: connect to " + address + " failed: " + err);
  }
  return std::make_unique<TcpConnection>(fd);
}

}  // namespace tfln
