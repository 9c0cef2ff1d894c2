#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "tagnav/drone_link.hpp"

namespace tagnav::link {

inline constexpr std::uint16_t kDefaultCommandPort = 8889;
inline constexpr std::uint16_t kDefaultTelemetryPort = 8890;

/// Owned IPv4 datagram socket.
class UdpSocket {
 public:
  UdpSocket();
  ~UdpSocket();
  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  /// Binds to 127.0.0.1 (or INADDR_ANY when `any` is set); port 0 picks one.
  void bind(std::uint16_t port, bool any = false);
  std::uint16_t local_port() const;

  void send_to(std::string_view data, std::uint32_t addr_be, std::uint16_t port);
  struct Datagram {
    std::string data;
    std::uint32_t addr_be = 0;
    std::uint16_t port = 0;
  };
  std::optional<Datagram> receive(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
};

std::uint32_t resolve_ipv4(const std::string& host);

class UdpClientTransport final : public Transport {
 public:
  UdpClientTransport(const std::string& host, std::uint16_t port);

  void send(std::string_view datagram) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;

 private:
  UdpSocket socket_;
  std::uint32_t addr_;
  std::uint16_t port_;
};

/// Serves a LinkServer over UDP: commands on one port, and a telemetry line
/// pushed at `telemetry_rate_hz` to the telemetry port of the most recent
/// commanding host.
class UdpLinkServer {
 public:
  UdpLinkServer(LinkServer& server, std::uint16_t command_port, std::uint16_t telemetry_port,
                double telemetry_rate_hz, bool bind_any = false);
  ~UdpLinkServer();

  UdpLinkServer(const UdpLinkServer&) = delete;
  UdpLinkServer& operator=(const UdpLinkServer&) = delete;

  std::uint16_t command_port() const { return command_port_; }
  void stop();

 private:
  void command_loop(std::stop_token st);
  void telemetry_loop(std::stop_token st);

  LinkServer& server_;
  UdpSocket command_socket_;
  UdpSocket telemetry_socket_;
  std::uint16_t command_port_;
  std::uint16_t telemetry_port_;
  double telemetry_rate_hz_;
  std::mutex peer_mutex_;
  std::optional<std::uint32_t> peer_addr_;
  std::jthread command_thread_;
  std::jthread telemetry_thread_;
};

}  // namespace tagnav::link
