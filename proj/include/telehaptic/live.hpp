#pragma once

#include "telehaptic/endpoints.hpp"
#include "telehaptic/gateway.hpp"
#include "telehaptic/scenario.hpp"
#include "telehaptic/socket_transport.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace telehaptic {

struct LiveOptions {
  ScenarioSpec spec;
  std::uint16_t slave_port = 7420;
  std::uint16_t ui_port = 8765;
  std::string address = "127.0.0.1";
  bool realtime = false;  // pace the simulated clock to wall time
  double frame_hz = 30.0;
};

/// Operator mode: slave and master joined by a real TCP connection, with the
/// master driven from the console gateway instead of a scripted policy.
class LiveSession {
 public:
  explicit LiveSession(LiveOptions opts);

  std::uint16_t slave_port() const { return listener_.port(); }
  std::uint16_t ui_port() const { return server_.port(); }

  /// Services the console, then advances both endpoints to the next due
  /// instant unless the console has stopped the trial. Returns the sim time.
  std::uint64_t step();

  /// Steps until `duration_s` of simulated time have passed (0 runs forever)
  /// or `stop` returns true.
  void run(double duration_s, const std::function<bool()>& stop = {});

  const SlaveEndpoint& slave() const { return *slave_; }
  MasterEndpoint& master() { return *master_; }
  GatewayHandler& handler() { return *handler_; }
  GatewayServer& server() { return server_; }
  std::uint64_t now_us() const { return now_us_; }

 private:
  void service_console();
  void pace();

  LiveOptions opts_;
  TcpListener listener_;
  std::unique_ptr<SlaveEndpoint> slave_;
  std::unique_ptr<MasterEndpoint> master_;
  std::unique_ptr<GatewayHandler> handler_;
  GatewayServer server_;
  FrameDecimator decimator_;
  std::uint64_t now_us_ = 0;
  // Wall time matching simulated zero; reset after every pause.
  std::optional<std::chrono::steady_clock::time_point> wall_origin_;
};

}  // namespace telehaptic
