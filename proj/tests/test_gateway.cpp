#include "doctest.h"

#include "telehaptic/errors.hpp"
#include "telehaptic/gateway.hpp"
#include "telehaptic/live.hpp"
#include "telehaptic/socket_transport.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <thread>

using namespace telehaptic;
using nlohmann::json;

namespace {

struct Rig {
  SceneConfig cfg;
  std::unique_ptr<SlaveEndpoint> slave;
  std::unique_ptr<MasterEndpoint> master;
  std::unique_ptr<GatewayHandler> handler;
  std::vector<wire::GripperCommand> grips;

  Rig() {
    auto [a, b] = make_loopback_pair();
    const SceneState s0 = initial_state(cfg);
    slave = std::make_unique<SlaveEndpoint>(cfg, s0, std::move(a));
    MasterOptions mo;
    mo.home = s0.robot;
    master = std::make_unique<MasterEndpoint>(mo, std::move(b));
    handler = std::make_unique<GatewayHandler>(*master);
    master->set_input_source(handler->input_source());
    master->set_observer([this](Direction, const wire::WireMessage& m) {
      if (const auto* g = std::get_if<wire::GripperCommand>(&m.payload)) grips.push_back(*g);
    });
  }

  void run_for(double s) {
    co_simulate(*slave, *master, master->now_us() + static_cast<std::uint64_t>(s * 1e6));
  }
};

const json* find_type(const std::vector<json>& msgs, const std::string& type) {
  for (const auto& m : msgs) {
    if (m["type"] == type) return &m;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("grip 0.5 reaches the wire as 500 permille") {
  Rig rig;
  CHECK(rig.handler->handle(R"({"type":"grip","value":0.5})").empty());
  rig.run_for(0.05);
  REQUIRE_FALSE(rig.grips.empty());
  CHECK(rig.grips.back().opening_permille == 500);
}

TEST_CASE("grip outside [0, 1] is refused") {
  Rig rig;
  const auto r = rig.handler->handle(R"({"type":"grip","value":1.5})");
  REQUIRE(r.size() == 1);
  CHECK(r[0]["type"] == "error");
  CHECK(rig.handler->controls().input.grip_command == 1.0);
}

TEST_CASE("scale factor must be an integer in 1..5") {
  Rig rig;
  for (const char* bad : {R"({"type":"scale","factor":7})", R"({"type":"scale","factor":0})",
                          R"({"type":"scale","factor":2.5})", R"({"type":"scale","factor":"3"})",
                          R"({"type":"scale"})"}) {
    const auto r = rig.handler->handle(bad);
    REQUIRE(r.size() == 1);
    CHECK(r[0]["type"] == "error");
    CHECK(r[0]["reason"].is_string());
  }
  CHECK(rig.master->workspace().scale_factor == 2);
  CHECK(rig.handler->handle(R"({"type":"scale","factor":5})").empty());
  CHECK(rig.master->workspace().scale_factor == 5);
}

TEST_CASE("malformed JSON gets an error reply") {
  Rig rig;
  for (const char* bad : {"{not json", "[1,2]", R"({"value":1})", R"({"type":3})"}) {
    const auto r = rig.handler->handle(bad);
    REQUIRE(r.size() == 1);
    CHECK(r[0]["type"] == "error");
  }
  CHECK(rig.handler->warnings() == 0);
}

TEST_CASE("unknown message types are ignored with a warning") {
  Rig rig;
  CHECK(rig.handler->handle(R"({"type":"dance","speed":3})").empty());
  CHECK(rig.handler->warnings() == 1);
  CHECK(rig.handler->last_warning().find("dance") != std::string::npos);
}

TEST_CASE("jog with an X lock leaves X where it was") {
  Rig rig;
  const Eigen::Vector3d home = rig.master->view().home.position_mm;
  CHECK(rig.handler->handle(R"({"type":"lock","axes":["x"]})").empty());
  CHECK(rig.handler->handle(R"({"type":"jog","dx":20,"dy":15,"dz":0})").empty());
  rig.run_for(1.0);
  const Eigen::Vector3d target = rig.master->last_target().position_mm;
  CHECK(target.x() == home.x());
  CHECK(std::abs(target.y() - home.y()) > 10.0);
  // The remote robot follows, so its X stays put too.
  CHECK(std::abs(rig.slave->state().robot.position_mm.x() - home.x()) < 1e-6);

  const auto frame = rig.handler->frame();
  const json* state = find_type(frame, "state");
  REQUIRE(state);
  CHECK((*state)["locks"] == json::array({"x"}));

  CHECK(rig.handler->handle(R"({"type":"lock","axes":["y","rotation"]})").empty());
  CHECK(rig.master->workspace().locks.has(Lock::Y));
  CHECK(rig.master->workspace().locks.has(Lock::Rotation));
  CHECK_FALSE(rig.master->workspace().locks.has(Lock::X));
  CHECK(rig.handler->handle(R"({"type":"lock","axes":["w"]})").at(0)["type"] == "error");
}

TEST_CASE("trial start and stop toggle the running flag") {
  Rig rig;
  CHECK(rig.handler->controls().running);
  CHECK(rig.handler->handle(R"({"type":"trial","action":"stop"})").empty());
  CHECK_FALSE(rig.handler->controls().running);
  CHECK(rig.handler->handle(R"({"type":"trial","action":"start"})").empty());
  CHECK(rig.handler->controls().running);
  CHECK(rig.handler->handle(R"({"type":"trial","action":"pause"})").at(0)["type"] == "error");
}

TEST_CASE("outbound frame carries every channel") {
  Rig rig;
  rig.handler->handle(R"({"type":"grip","value":0.0})");
  rig.run_for(2.0);
  const auto frame = rig.handler->frame();
  for (const char* type : {"state", "force", "tactile", "electrode", "ledger"}) {
    CHECK_MESSAGE(find_type(frame, type), type);
  }
  const json& e = *find_type(frame, "electrode");
  for (const char* side : {"left", "right"}) {
    REQUIRE(e[side].size() == 20);
    for (const auto& v : e[side]) {
      CHECK(v.get<double>() >= 0.0);
      CHECK(v.get<double>() <= 1.0);
    }
  }
  const json& t = *find_type(frame, "tactile");
  CHECK(t["left"].size() == 50);
  CHECK(t["right"].size() == 50);
  // Cells mirror the master's latest pattern in row-major order.
  const auto& pattern = (*rig.master->view().patterns)[0];
  CHECK(e["left"][6].get<double>() == pattern.cells(1, 1));
}

TEST_CASE("scene events are forwarded once") {
  Rig rig;
  wire::SceneEventMsg ev{};
  ev.event_code = static_cast<std::uint8_t>(EventCode::LiquidTransfer);
  ev.microliters = 250;
  rig.handler->note_event(ev, 1234);
  auto first = rig.handler->frame();
  const json* e = find_type(first, "event");
  REQUIRE(e);
  CHECK((*e)["name"] == "liquid_transfer");
  CHECK((*e)["ml"] == doctest::Approx(0.25));
  CHECK(find_type(rig.handler->frame(), "event") == nullptr);
}

TEST_CASE("frame decimator caps the rate at 30 Hz") {
  FrameDecimator d(30.0);
  CHECK(d.due(0));
  CHECK_FALSE(d.due(33'000));
  CHECK(d.due(33'334));
  int fired = 0;
  for (std::uint64_t t = 40'000; t <= 1'040'000; t += 1'000) fired += d.due(t);
  CHECK(fired <= 31);
  CHECK(fired >= 29);
  CHECK_THROWS_AS(FrameDecimator(0.0), ConfigError);
}

TEST_CASE("TCP streams carry bytes and notice a closed peer") {
  TcpListener listener(0);
  REQUIRE(listener.port() != 0);
  auto client = tcp_connect("127.0.0.1", listener.port());
  auto server = listener.accept();

  const std::vector<std::uint8_t> payload{1, 2, 3, 250, 0, 7};
  client->write(payload);
  std::vector<std::uint8_t> got;
  for (int i = 0; i < 200 && got.size() < payload.size(); ++i) {
    auto chunk = server->read_available();
    got.insert(got.end(), chunk.begin(), chunk.end());
    if (got.size() < payload.size()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  CHECK(got == payload);
  CHECK(server->read_available().empty());
  CHECK(server->is_open());

  client->close();
  for (int i = 0; i < 200 && server->is_open(); ++i) {
    server->read_available();
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  CHECK_FALSE(server->is_open());
}

TEST_CASE("endpoints over TCP keep the twin current") {
  TcpListener listener(0);
  auto master_link = tcp_connect("127.0.0.1", listener.port());
  auto slave_link = listener.accept();
  const SceneConfig cfg;
  const SceneState s0 = initial_state(cfg);
  SlaveEndpoint slave(cfg, s0, std::move(slave_link));
  MasterOptions mo;
  mo.home = s0.robot;
  MasterEndpoint master(mo, std::move(master_link));
  co_simulate(slave, master, 1'000'000);
  CHECK(master.twin().valid);
  CHECK(master.stats().decode_errors == 0);
  CHECK((master.twin().pose.position_mm - slave.state().robot.position_mm).norm() <= 0.1);
}

TEST_CASE("slave port falls back to 7420 unless the environment overrides it") {
  ::unsetenv("TELEHAPTIC_PORT");
  CHECK(default_slave_port() == 7420);
  ::setenv("TELEHAPTIC_PORT", "9100", 1);
  CHECK(default_slave_port() == 9100);
  ::setenv("TELEHAPTIC_PORT", "junk", 1);
  CHECK(default_slave_port() == 7420);
  ::unsetenv("TELEHAPTIC_PORT");
}

TEST_CASE("console over WebSocket: handshake, grip round trip, frames") {
  namespace net = boost::asio;
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;

  LiveOptions opts;
  opts.slave_port = 0;
  opts.ui_port = 0;
  opts.realtime = true;
  LiveSession session(opts);
  const std::uint16_t ui_port = session.ui_port();

  std::atomic<int> last_grip{-1};
  session.master().set_observer([&](Direction, const wire::WireMessage& m) {
    if (const auto* g = std::get_if<wire::GripperCommand>(&m.payload)) last_grip = g->opening_permille;
  });
  std::atomic<bool> stop{false};
  std::thread loop([&] { session.run(0.0, [&] { return stop.load(); }); });

  net::io_context io;
  websocket::stream<beast::tcp_stream> ws(io);
  ws.next_layer().connect(net::ip::tcp::endpoint(net::ip::make_address("127.0.0.1"), ui_port));
  ws.next_layer().expires_after(std::chrono::seconds(10));
  REQUIRE_NOTHROW(ws.handshake("127.0.0.1", "/"));
  ws.text(true);
  ws.write(net::buffer(std::string(R"({"type":"grip","value":0.5})")));
  ws.write(net::buffer(std::string(R"({"type":"scale","factor":7})")));

  bool saw_error = false, saw_electrode = false;
  std::optional<double> first_gripper, last_gripper;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (std::chrono::steady_clock::now() < deadline) {
    beast::flat_buffer buf;
    ws.read(buf);
    const json msg = json::parse(beast::buffers_to_string(buf.data()));
    if (msg["type"] == "error") saw_error = true;
    if (msg["type"] == "electrode") saw_electrode = msg["left"].size() == 20;
    if (msg["type"] == "state" && msg["valid"].get<bool>()) {
      if (!first_gripper) first_gripper = msg["gripper"].get<double>();
      last_gripper = msg["gripper"].get<double>();
    }
    if (saw_error && saw_electrode && last_gripper && *last_gripper < 0.9) break;
  }
  beast::error_code ec;
  ws.close(websocket::close_code::normal, ec);
  stop = true;
  loop.join();

  CHECK(saw_error);
  CHECK(saw_electrode);
  CHECK(last_grip.load() == 500);
  REQUIRE(last_gripper);
  CHECK(*last_gripper < 0.9);
}
