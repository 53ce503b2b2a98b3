#include "lurenet/transport.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <stdexcept>
#include <thread>

#include "lurenet/netio.h"

namespace lurenet {

namespace {

struct MemoryLink {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> inbox[2];
  bool closed[2] = {false, false};
};

class MemoryTransport : public Transport {
 public:
  MemoryTransport(std::shared_ptr<MemoryLink> link, int side)
      : link_(std::move(link)), side_(side) {}

  ~MemoryTransport() override {
    {
      std::lock_guard<std::mutex> lock(link_->mu);
      link_->closed[side_] = true;
    }
    link_->cv.notify_all();
  }

  void send(const Bytes& message) override {
    {
      std::lock_guard<std::mutex> lock(link_->mu);
      if (link_->closed[1 - side_]) throw TransportError("peer closed");
      link_->inbox[1 - side_].push_back(message);
    }
    link_->cv.notify_all();
  }

  std::optional<Bytes> receive(std::chrono::milliseconds timeout) override {
    std::unique_lock<std::mutex> lock(link_->mu);
    auto& box = link_->inbox[side_];
    const bool ready = link_->cv.wait_for(lock, timeout, [&] {
      return !box.empty() || link_->closed[1 - side_];
    });
    if (!ready) return std::nullopt;
    if (box.empty()) throw TransportError("peer closed");
    Bytes out = std::move(box.front());
    box.pop_front();
    return out;
  }

 private:
  std::shared_ptr<MemoryLink> link_;
  int side_;
};

sockaddr_in resolve(const std::string& host, uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    throw TransportError("cannot resolve '" + host + "': " + gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

int remaining_ms(std::chrono::steady_clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>>
make_memory_pair() {
  auto link = std::make_shared<MemoryLink>();
  return {std::make_unique<MemoryTransport>(link, 0),
          std::make_unique<MemoryTransport>(link, 1)};
}

TcpTransport::TcpTransport(int fd) : fd_(fd) {
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpTransport> TcpTransport::connect(
    const std::string& host, uint16_t port, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(host, port);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(errno_text("socket"));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) ==
        0) {
      return std::make_unique<TcpTransport>(fd);
    }
    const int err = errno;
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      errno = err;
      throw TransportError(errno_text("connect"));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void TcpTransport::send(const Bytes& message) {
  size_t off = 0;
  while (off < message.size()) {
    const ssize_t n =
        ::send(fd_, message.data() + off, message.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"));
    }
    off += static_cast<size_t>(n);
  }
}

bool TcpTransport::read_exact(uint8_t* dst, size_t n,
                              std::chrono::steady_clock::time_point deadline) {
  size_t off = 0;
  while (off < n) {
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, remaining_ms(deadline));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("poll"));
    }
    if (rc == 0) {
      if (off == 0) return false;
      throw TransportError("timeout in the middle of a frame");
    }
    const ssize_t got = ::recv(fd_, dst + off, n - off, 0);
    if (got == 0) throw TransportError("peer closed");
    if (got < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("recv"));
    }
    off += static_cast<size_t>(got);
  }
  return true;
}

std::optional<Bytes> TcpTransport::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  Bytes out(kFrameHeaderSize);
  if (!read_exact(out.data(), kFrameHeaderSize, deadline)) return std::nullopt;
  const size_t total = frame_length_from_header(out.data());
  out.resize(total);
  if (total > kFrameHeaderSize &&
      !read_exact(out.data() + kFrameHeaderSize, total - kFrameHeaderSize,
                  deadline)) {
    throw TransportError("timeout in the middle of a frame");
  }
  return out;
}

TcpListener::TcpListener(const std::string& host, uint16_t port) {
  const sockaddr_in addr = resolve(host, port);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 1) != 0) {
    const std::string msg = errno_text("bind/listen");
    ::close(fd_);
    throw TransportError(msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpTransport> TcpListener::accept(
    std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc < 0) throw TransportError(errno_text("poll"));
  if (rc == 0) return nullptr;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw TransportError(errno_text("accept"));
  return std::make_unique<TcpTransport>(fd);
}

void TapTransport::send(const Bytes& message) {
  inner_.send(message);
  std::lock_guard<std::mutex> lock(mu_);
  sent_.insert(sent_.end(), message.begin(), message.end());
}

std::optional<Bytes> TapTransport::receive(std::chrono::milliseconds timeout) {
  auto msg = inner_.receive(timeout);
  if (msg) {
    std::lock_guard<std::mutex> lock(mu_);
    received_.insert(received_.end(), msg->begin(), msg->end());
  }
  return msg;
}

Bytes TapTransport::sent() const {
  std::lock_guard<std::mutex> lock(mu_);
  return sent_;
}

Bytes TapTransport::received() const {
  std::lock_guard<std::mutex> lock(mu_);
  return received_;
}

std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon == 0 ||
      colon + 1 == endpoint.size()) {
    throw std::invalid_argument("endpoint must be host:port, got '" +
                                endpoint + "'");
  }
  const std::string port_text = endpoint.substr(colon + 1);
  size_t used = 0;
  unsigned long port = 0;
  try {
    port = std::stoul(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port > 65535) {
    throw std::invalid_argument("bad port in endpoint '" + endpoint + "'");
  }
  return {endpoint.substr(0, colon), static_cast<uint16_t>(port)};
}

}  // namespace lurenet
