#pragma once

#include "telehaptic/endpoints.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace telehaptic {

/// What the console currently asks of the master handle.
struct ConsoleControls {
  HapticInput input;
  bool running = true;  // cleared by a trial stop, set again by a start
};

/// JSON side of the operator console, free of any I/O. Inbound commands act on
/// the master endpoint; outbound frames summarise the master view.
class GatewayHandler {
 public:
  explicit GatewayHandler(MasterEndpoint& master);

  /// Applies one inbound text message. Returns the replies for the sender:
  /// an error object for malformed or invalid commands, nothing otherwise.
  /// Unknown message types are ignored and counted as warnings.
  std::vector<nlohmann::json> handle(std::string_view text);

  const ConsoleControls& controls() const { return controls_; }
  std::uint64_t warnings() const { return warnings_; }
  const std::string& last_warning() const { return last_warning_; }

  /// Input source for the master that reads the latest console controls.
  InputSource input_source();

  /// Queues a scene event for the next outbound frame.
  void note_event(const wire::SceneEventMsg& event, std::uint64_t t_us);

  /// Outbound messages for one console frame: state, force, tactile,
  /// electrode, ledger and any queued events.
  std::vector<nlohmann::json> frame();

 private:
  static nlohmann::json error(std::string reason);

  MasterEndpoint& master_;
  ConsoleControls controls_;
  std::vector<nlohmann::json> events_;
  std::uint64_t warnings_ = 0;
  std::string last_warning_;
};

/// Limits console frames to a maximum rate on a microsecond clock.
class FrameDecimator {
 public:
  explicit FrameDecimator(double max_hz = 30.0);
  bool due(std::uint64_t now_us);

 private:
  std::uint64_t interval_us_;
  std::optional<std::uint64_t> last_us_;
};

/// WebSocket server for the console. Runs its own I/O thread; inbound text
/// lands in a mailbox drained by the simulation loop, outbound text is
/// broadcast to every connected client.
class GatewayServer {
 public:
  /// Port 0 picks a free port.
  explicit GatewayServer(std::uint16_t port, const std::string& address = "127.0.0.1");
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  std::uint16_t port() const;
  std::size_t clients() const;

  struct Inbound {
    std::uint64_t client = 0;
    std::string text;
  };

  std::vector<Inbound> drain_inbound();
  void send(std::uint64_t client, std::string text);
  void broadcast(std::string text);

 private:
  friend class GatewaySession;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace telehaptic
