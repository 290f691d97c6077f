#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "tfln/wire.hpp"

namespace tfln {

/// One end of a duplex, whole-message, per-pair-FIFO channel between tasks.
/// Every message crosses the codec in wire.hpp regardless of transport, so
/// both realizations share framing and integrity semantics.
class Connection {
 public:
  virtual ~Connection() = default;

  virtual void send(const WireMessage& msg) = 0;

  /// Blocks until a message arrives; nullopt when the peer closed cleanly.
  /// A frame that fails to decode raises FormatError.
  virtual std::optional<WireMessage> recv() = 0;

  virtual void close() = 0;
};

class Listener {
 public:
  virtual ~Listener() = default;

  /// Blocks until a peer connects; nullptr once the listener is closed.
  virtual std::unique_ptr<Connection> accept() = 0;

  /// The address peers should dial (for TCP this reflects the bound port).
  virtual std::string address() const = 0;

  virtual void close() = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::unique_ptr<Listener> listen(const std::string& address) = 0;
  virtual std::unique_ptr<Connection> connect(const std::string& address) = 0;
};

/// In-process transport: addresses are plain registry keys, frames travel
/// through in-memory queues of encoded bytes. Each InProcessTransport
/// instance is an isolated network.
class InProcessTransport : public Transport {
 public:
  InProcessTransport();
  ~InProcessTransport() override;

  std::unique_ptr<Listener> listen(const std::string& address) override;
  std::unique_ptr<Connection> connect(const std::string& address) override;

  struct Registry;

 private:
  std::shared_ptr<Registry> registry_;
};

/// Loopback/remote TCP transport. Addresses are "host:port"; listening on
/// port 0 binds an ephemeral port, visible through Listener::address().
class TcpTransport : public Transport {
 public:
  std::unique_ptr<Listener> listen(const std::string& address) override;
  std::unique_ptr<Connection> connect(const std::string& address) override;
};

}  // namespace tfln
