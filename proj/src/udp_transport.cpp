#include "tagnav/udp_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "tagnav/error.hpp"

namespace tagnav::link {
namespace {

[[noreturn]] void fail(const std::string& what) { throw LinkDown(what + ": " + std::strerror(errno)); }

}  // namespace

UdpSocket::UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
  if (fd_ < 0) fail("socket");
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void UdpSocket::bind(std::uint16_t port, bool any) {
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = any ? htonl(INADDR_ANY) : htonl(INADDR_LOOPBACK);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) fail("bind");
}

std::uint16_t UdpSocket::local_port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
  return ntohs(addr.sin_port);
}

void UdpSocket::send_to(std::string_view data, std::uint32_t addr_be, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = addr_be;
  // Datagram loss is the protocol's problem; a failed send is just a lost packet.
  (void)::sendto(fd_, data.data(), data.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
}

std::optional<UdpSocket::Datagram> UdpSocket::receive(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (ready <= 0) return std::nullopt;
  char buf[2048];
  sockaddr_in from{};
  socklen_t len = sizeof(from);
  const ssize_t n = ::recvfrom(fd_, buf, sizeof(buf), 0, reinterpret_cast<sockaddr*>(&from), &len);
  if (n < 0) return std::nullopt;
  return Datagram{std::string(buf, static_cast<std::size_t>(n)), from.sin_addr.s_addr, ntohs(from.sin_port)};
}

std::uint32_t resolve_ipv4(const std::string& host) {
  in_addr addr{};
  if (::inet_pton(AF_INET, host.c_str(), &addr) == 1) return addr.s_addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw LinkDown("cannot resolve host " + host);
  }
  const auto out = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr.s_addr;
  ::freeaddrinfo(res);
  return out;
}

UdpClientTransport::UdpClientTransport(const std::string& host, std::uint16_t port)
    : addr_(resolve_ipv4(host)), port_(port) {
  socket_.bind(0, true);
}

void UdpClientTransport::send(std::string_view datagram) { socket_.send_to(datagram, addr_, port_); }

std::optional<std::string> UdpClientTransport::receive(std::chrono::milliseconds timeout) {
  auto d = socket_.receive(timeout);
  if (!d) return std::nullopt;
  return std::move(d->data);
}

UdpLinkServer::UdpLinkServer(LinkServer& server, std::uint16_t command_port, std::uint16_t telemetry_port,
                             double telemetry_rate_hz, bool bind_any)
    : server_(server), telemetry_port_(telemetry_port), telemetry_rate_hz_(telemetry_rate_hz) {
  if (!(telemetry_rate_hz_ > 0.0)) throw InvalidArgument("telemetry rate must be positive");
  command_socket_.bind(command_port, bind_any);
  command_port_ = command_socket_.local_port();
  command_thread_ = std::jthread([this](std::stop_token st) { command_loop(st); });
  telemetry_thread_ = std::jthread([this](std::stop_token st) { telemetry_loop(st); });
}

UdpLinkServer::~UdpLinkServer() { stop(); }

void UdpLinkServer::stop() {
  command_thread_.request_stop();
  telemetry_thread_.request_stop();
  if (command_thread_.joinable()) command_thread_.join();
  if (telemetry_thread_.joinable()) telemetry_thread_.join();
}

void UdpLinkServer::command_loop(std::stop_token st) {
  while (!st.stop_requested()) {
    auto d = command_socket_.receive(std::chrono::milliseconds{50});
    if (!d) continue;
    {
      std::lock_guard lock(peer_mutex_);
      peer_addr_ = d->addr_be;
    }
    if (auto reply = server_.handle(d->data)) command_socket_.send_to(*reply, d->addr_be, d->port);
  }
}

void UdpLinkServer::telemetry_loop(std::stop_token st) {
  const auto period = std::chrono::duration<double>(1.0 / telemetry_rate_hz_);
  auto next = std::chrono::steady_clock::now();
  while (!st.stop_requested()) {
    next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    std::optional<std::uint32_t> peer;
    {
      std::lock_guard lock(peer_mutex_);
      peer = peer_addr_;
    }
    if (peer) telemetry_socket_.send_to(server_.telemetry_line(), *peer, telemetry_port_);
    std::this_thread::sleep_until(next);
  }
}

}  // namespace tagnav::link
