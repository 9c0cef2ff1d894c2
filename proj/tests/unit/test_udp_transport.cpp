#include <gtest/gtest.h>

#include "tagnav/drone_link.hpp"
#include "tagnav/error.hpp"
#include "tagnav/udp_transport.hpp"

using namespace tagnav;
using namespace tagnav::link;

TEST(Udp, CommandRoundTripAndTelemetryPush) {
  WorldModel world;
  Simulator sim(world, {});
  LinkServer server(sim);

  UdpSocket telemetry_listener;
  telemetry_listener.bind(0);
  UdpLinkServer udp(server, 0, telemetry_listener.local_port(), 50.0);

  UdpClientTransport transport("127.0.0.1", udp.command_port());
  LinkClient client(transport, {std::chrono::milliseconds{1000}, 2}, 3);
  EXPECT_EQ(client.request(Command::simple(Verb::Takeoff)), Reply::ok());
  EXPECT_EQ(client.request(Command::simple(Verb::Height)), Reply::value("80"));

  std::optional<TelemetryLine> line;
  for (int i = 0; i < 20 && !line; ++i) {
    if (auto d = telemetry_listener.receive(std::chrono::milliseconds{200})) line = parse_telemetry(d->data);
  }
  ASSERT_TRUE(line.has_value());
  EXPECT_EQ(line->height_cm, 80);
  EXPECT_EQ(line->battery_pct, 100);
}

TEST(Udp, NoServerMeansLinkDown) {
  UdpSocket unused;
  unused.bind(0);
  const auto port = unused.local_port();
  UdpClientTransport transport("127.0.0.1", port);
  LinkClient client(transport, {std::chrono::milliseconds{30}, 1}, 3);
  EXPECT_THROW(client.request(Command::simple(Verb::Battery)), Error);
}

TEST(Udp, ResolvesLoopback) { EXPECT_EQ(resolve_ipv4("127.0.0.1"), resolve_ipv4("localhost")); }
