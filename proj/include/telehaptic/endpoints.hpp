#pragma once

#include "telehaptic/control.hpp"
#include "telehaptic/haptic.hpp"
#include "telehaptic/protocol.hpp"
#include "telehaptic/sim.hpp"
#include "telehaptic/tactile.hpp"
#include "telehaptic/transport.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace telehaptic {

/// Fixed-rate schedule on the simulated clock: the k-th firing is due at
/// origin + floor(k * 1e6 / rate) microseconds, so counts never drift.
class RateSchedule {
 public:
  explicit RateSchedule(std::uint64_t rate_hz, std::uint64_t origin_us = 0)
      : rate_hz_(rate_hz), origin_us_(origin_us) {}

  std::uint64_t next_due() const { return origin_us_ + fired_ * 1'000'000ULL / rate_hz_; }
  void fire() { ++fired_; }
  std::uint64_t fired() const { return fired_; }
  std::uint64_t rate_hz() const { return rate_hz_; }

 private:
  std::uint64_t rate_hz_;
  std::uint64_t origin_us_;
  std::uint64_t fired_ = 0;
};

enum class Direction { MasterToSlave, SlaveToMaster };

/// Called once for every message an endpoint puts on the wire.
using MessageObserver = std::function<void(Direction, const wire::WireMessage&)>;

struct LinkStats {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t seq_gaps = 0;
  std::uint64_t seq_missing = 0;
};

struct SlaveOptions {
  PidGains gains;
  std::uint64_t control_rate_hz = 125;
  std::uint64_t tactile_rate_hz = 120;
  std::uint64_t state_rate_hz = 50;
};

/// Remote side: owns the scene, runs the TCP PID at the control rate, streams
/// tactile pairs and robot state, and halts safely when the link drops.
class SlaveEndpoint {
 public:
  SlaveEndpoint(SceneConfig cfg, std::unique_ptr<ByteStream> link, SlaveOptions opts = {});
  SlaveEndpoint(SceneConfig cfg, SceneState initial, std::unique_ptr<ByteStream> link,
                SlaveOptions opts = {});

  std::uint64_t next_due_us() const;
  void advance_to(std::uint64_t t_us);

  const SceneState& state() const { return state_; }
  const SceneConfig& config() const { return cfg_; }
  const RobotTarget& target() const { return target_; }
  const Vector6d& last_velocity() const { return velocity_; }
  bool halted() const { return halted_; }
  std::optional<std::uint32_t> last_rendered_force_mn() const { return rendered_force_mn_; }
  std::uint8_t scale_setting() const { return scale_setting_; }
  LockMask lock_setting() const { return lock_setting_; }

  std::uint64_t tactile_sent(Finger f) const { return tactile_sent_[static_cast<int>(f)]; }
  std::uint64_t state_sent() const { return state_sent_; }
  const LinkStats& stats() const { return stats_; }

  void set_observer(MessageObserver observer) { observer_ = std::move(observer); }
  void set_event_sink(std::function<void(const SceneEvent&)> sink) { event_sink_ = std::move(sink); }

 private:
  void poll_link();
  void apply(const wire::WireMessage& msg);
  void send(wire::Payload payload, std::uint64_t t_us);
  void control_tick(std::uint64_t t_us);
  void publish_tactile(std::uint64_t t_us);
  void publish_state(std::uint64_t t_us);
  void raise(const SceneEvent& event);

  SceneConfig cfg_;
  SceneState state_;
  std::unique_ptr<ByteStream> link_;
  SlaveOptions opts_;

  RateSchedule control_;
  RateSchedule tactile_;
  RateSchedule state_sched_;

  wire::StreamDecoder decoder_;
  wire::SequenceTracker inbound_seq_;
  std::uint32_t next_seq_ = 0;

  RobotTarget target_;
  double grip_command_;
  PidState pid_;
  Vector6d velocity_ = Vector6d::Zero();
  bool halted_ = false;
  std::optional<std::uint32_t> rendered_force_mn_;
  std::uint8_t scale_setting_ = 1;
  LockMask lock_setting_;

  std::array<std::uint64_t, 2> tactile_sent_{};
  std::uint64_t state_sent_ = 0;
  LinkStats stats_;
  MessageObserver observer_;
  std::function<void(const SceneEvent&)> event_sink_;
};

/// Master-side mirror of the remote robot built from the state stream.
struct TwinState {
  RobotTarget pose;
  double gripper_opening = 1.0;
  std::optional<double> contact_opening;
  std::uint64_t last_update_us = 0;
  bool valid = false;

  std::uint64_t staleness_us(std::uint64_t now_us) const {
    return now_us > last_update_us ? now_us - last_update_us : 0;
  }
};

/// Liquid levels reconstructed from scene events (microlitre resolution).
struct LedgerMirror {
  double beaker_ml = 0.0;
  std::vector<double> tube_ml;
  double pipette_ml = 0.0;
  double spill_ml = 0.0;

  void apply(const wire::SceneEventMsg& event);
};

struct MasterOptions {
  WorkspaceConfig workspace{2, LockMask{}, kRobotReachMm};
  RobotTarget home;
  std::uint64_t command_rate_hz = 125;
  std::uint64_t force_rate_hz = 120;
  std::uint64_t grip_keepalive_hz = 10;
  LedgerMirror initial_ledger;
};

struct MasterView {
  std::uint64_t now_us = 0;
  TwinState twin;
  std::optional<KinestheticForce> force;
  std::optional<std::array<TactileFrame, 2>> frames;
  std::optional<std::array<ElectrodePattern, 2>> patterns;
  WorkspaceConfig workspace;
  RobotTarget home;
};

using InputSource = std::function<HapticInput(const MasterView&)>;

/// Operator side: samples the haptic input at the command rate, maps it through
/// the workspace scaling, renders grasp force from each tactile pair and keeps
/// the digital twin current.
class MasterEndpoint {
 public:
  MasterEndpoint(MasterOptions opts, std::unique_ptr<ByteStream> link);

  std::uint64_t next_due_us() const;
  void advance_to(std::uint64_t t_us);

  void set_input_source(InputSource source) { input_source_ = std::move(source); }
  void set_observer(MessageObserver observer) { observer_ = std::move(observer); }
  void set_event_sink(std::function<void(const wire::SceneEventMsg&, std::uint64_t)> sink) {
    event_sink_ = std::move(sink);
  }

  /// Throws ConfigError unless 1 <= factor <= 5.
  void set_scale(int factor);
  void set_locks(LockMask locks);

  MasterView view() const;
  const TwinState& twin() const { return twin_; }
  const std::optional<KinestheticForce>& latest_force() const { return force_; }
  const LedgerMirror& ledger() const { return ledger_; }
  const WorkspaceConfig& workspace() const { return opts_.workspace; }
  const HapticInput& last_input() const { return last_input_; }
  const RobotTarget& last_target() const { return last_target_; }
  bool connected() const { return connected_; }
  const LinkStats& stats() const { return stats_; }
  std::uint64_t force_sent() const { return force_sent_; }
  std::uint64_t now_us() const { return now_us_; }

 private:
  void poll_link();
  void apply(const wire::WireMessage& msg);
  void send(wire::Payload payload);
  void command_tick();
  void force_tick();
  void send_grip(std::uint16_t permille);

  MasterOptions opts_;
  std::unique_ptr<ByteStream> link_;
  RateSchedule command_;
  RateSchedule force_sched_;
  RateSchedule keepalive_;
  std::uint64_t now_us_ = 0;

  wire::StreamDecoder decoder_;
  wire::SequenceTracker inbound_seq_;
  std::uint32_t next_seq_ = 0;

  InputSource input_source_;
  HapticInput last_input_;
  RobotTarget last_target_;
  std::optional<std::uint16_t> last_grip_sent_;
  std::uint64_t last_grip_time_us_ = 0;

  TwinState twin_;
  std::array<std::optional<TactileFrame>, 2> frames_;
  std::optional<std::array<ElectrodePattern, 2>> patterns_;
  std::optional<KinestheticForce> force_;
  std::uint64_t force_sent_ = 0;
  LedgerMirror ledger_;
  bool connected_ = true;

  LinkStats stats_;
  MessageObserver observer_;
  std::function<void(const wire::SceneEventMsg&, std::uint64_t)> event_sink_;
};

/// Steps both endpoints on the shared simulated clock, slave first at each
/// instant. Stops after `t_end_us` or when `stop` returns true.
std::uint64_t co_simulate(SlaveEndpoint& slave, MasterEndpoint& master, std::uint64_t t_end_us,
                          const std::function<bool()>& stop = {});

}  // namespace telehaptic
