#pragma once

// Message transports for the two-node demo. A message is one encoded frame;
// transports are reliable and ordered, loss is injected above them.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lurenet/errors.h"

namespace lurenet {

using Bytes = std::vector<uint8_t>;

class TransportError : public Error {
 public:
  using Error::Error;
};

class Transport {
 public:
  virtual ~Transport() = default;

  /// Throws TransportError.
  virtual void send(const Bytes& message) = 0;
  /// Next message, or nullopt if none arrived within `timeout`. Throws
  /// TransportError when the peer is gone.
  virtual std::optional<Bytes> receive(std::chrono::milliseconds timeout) = 0;
};

/// Two connected in-process endpoints.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>>
make_memory_pair();

/// Blocking TCP stream carrying length-delimited frames.
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(int fd);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  /// Retries until `timeout` while the peer is not yet listening.
  static std::unique_ptr<TcpTransport> connect(const std::string& host,
                                               uint16_t port,
                                               std::chrono::milliseconds timeout);

  void send(const Bytes& message) override;
  std::optional<Bytes> receive(std::chrono::milliseconds timeout) override;

 private:
  bool read_exact(uint8_t* dst, size_t n,
                  std::chrono::steady_clock::time_point deadline);

  int fd_;
};

class TcpListener {
 public:
  /// Port 0 picks an ephemeral port; see port().
  TcpListener(const std::string& host, uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  /// nullptr on timeout.
  std::unique_ptr<TcpTransport> accept(std::chrono::milliseconds timeout);

 private:
  int fd_;
  uint16_t port_;
};

/// Forwards to `inner` and keeps a copy of every byte sent and received.
class TapTransport : public Transport {
 public:
  explicit TapTransport(Transport& inner) : inner_(inner) {}

  void send(const Bytes& message) override;
  std::optional<Bytes> receive(std::chrono::milliseconds timeout) override;

  Bytes sent() const;
  Bytes received() const;

 private:
  Transport& inner_;
  mutable std::mutex mu_;
  Bytes sent_;
  Bytes received_;
};

/// "host:port" -> (host, port). Throws std::invalid_argument.
std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace lurenet
