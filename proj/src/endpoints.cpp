#include "telehaptic/endpoints.hpp"

#include "telehaptic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace telehaptic {

namespace {

wire::SceneEventMsg to_message(const SceneEvent& e) {
  return {static_cast<std::uint8_t>(e.code), std::llround(e.volume_delta_ml * 1000.0), e.location};
}

void record_inbound(LinkStats& stats, wire::SequenceTracker& seq, std::uint32_t s) {
  ++stats.received;
  seq.observe(s);
  stats.seq_gaps = seq.gaps();
  stats.seq_missing = seq.missing();
}

}  // namespace

// ---------------------------------------------------------------------------
// Slave

SlaveEndpoint::SlaveEndpoint(SceneConfig cfg, std::unique_ptr<ByteStream> link, SlaveOptions opts)
    : SlaveEndpoint(cfg, initial_state(cfg), std::move(link), opts) {}

SlaveEndpoint::SlaveEndpoint(SceneConfig cfg, SceneState initial, std::unique_ptr<ByteStream> link,
                             SlaveOptions opts)
    : cfg_(std::move(cfg)),
      state_(std::move(initial)),
      link_(std::move(link)),
      opts_(opts),
      control_(opts.control_rate_hz, state_.sim_time_us),
      tactile_(opts.tactile_rate_hz, state_.sim_time_us),
      state_sched_(opts.state_rate_hz, state_.sim_time_us),
      target_(state_.robot),
      grip_command_(state_.gripper.commanded_opening) {
  // The first control tick integrates the interval ending one period after start.
  control_.fire();
}

std::uint64_t SlaveEndpoint::next_due_us() const {
  return std::min({control_.next_due(), tactile_.next_due(), state_sched_.next_due()});
}

void SlaveEndpoint::advance_to(std::uint64_t t_us) {
  for (std::uint64_t next = next_due_us(); next <= t_us; next = next_due_us()) {
    poll_link();
    if (control_.next_due() == next) {
      control_tick(next);
      control_.fire();
    }
    if (tactile_.next_due() == next) {
      publish_tactile(next);
      tactile_.fire();
    }
    if (state_sched_.next_due() == next) {
      publish_state(next);
      state_sched_.fire();
    }
  }
}

void SlaveEndpoint::poll_link() {
  const auto bytes = link_->read_available();
  decoder_.feed(bytes);
  while (auto res = decoder_.next()) {
    if (res->status != wire::DecodeStatus::Ok) {
      ++stats_.decode_errors;
      continue;
    }
    record_inbound(stats_, inbound_seq_, res->message->seq);
    apply(*res->message);
  }
}

void SlaveEndpoint::apply(const wire::WireMessage& msg) {
  if (const auto* tcp = std::get_if<wire::TcpCommand>(&msg.payload)) {
    target_ = wire::dequantize_pose(tcp->pose, msg.sim_timestamp_us);
  } else if (const auto* grip = std::get_if<wire::GripperCommand>(&msg.payload)) {
    grip_command_ = wire::from_permille(grip->opening_permille);
  } else if (const auto* force = std::get_if<wire::ForceFeedback>(&msg.payload)) {
    rendered_force_mn_ = force->millinewtons;
  } else if (const auto* config = std::get_if<wire::ConfigSet>(&msg.payload)) {
    if (config->key == static_cast<std::uint8_t>(wire::ConfigKey::Scale)) {
      scale_setting_ = config->value;
    } else if (config->key == static_cast<std::uint8_t>(wire::ConfigKey::Lock)) {
      lock_setting_ = LockMask(config->value);
    }
  }
}

void SlaveEndpoint::send(wire::Payload payload, std::uint64_t t_us) {
  if (!link_->is_open()) return;
  wire::WireMessage msg{next_seq_++, t_us, std::move(payload)};
  link_->write(wire::encode(msg));
  ++stats_.sent;
  if (observer_) observer_(Direction::SlaveToMaster, msg);
}

void SlaveEndpoint::raise(const SceneEvent& event) {
  if (event_sink_) event_sink_(event);
  send(to_message(event), event.sim_time_us);
}

void SlaveEndpoint::control_tick(std::uint64_t t_us) {
  if (!halted_ && !link_->is_open()) {
    halted_ = true;
    raise({EventCode::SessionClosed, 0.0, kLocationNone, state_.sim_time_us});
  }
  const double dt = static_cast<double>(t_us - state_.sim_time_us) / 1e6;
  ActuatorCommand cmd;
  if (halted_) {
    velocity_.setZero();
    cmd.gripper_opening = state_.gripper.p_current;
  } else {
    const PidOutput out = pid_step(target_, state_.robot, opts_.gains, pid_, dt);
    pid_ = out.state;
    velocity_ = out.command;
    cmd.gripper_opening = grip_command_;
  }
  cmd.velocity = velocity_;

  std::vector<SceneEvent> events;
  state_ = tick(state_, cmd, dt, cfg_, &events);
  for (const auto& e : events) raise(e);
}

void SlaveEndpoint::publish_tactile(std::uint64_t t_us) {
  auto [left, right] = synthesize_tactile(state_, cfg_);
  left.timestamp_us = t_us;
  right.timestamp_us = t_us;
  send(wire::to_message(left), t_us);
  send(wire::to_message(right), t_us);
  if (link_->is_open()) {
    ++tactile_sent_[0];
    ++tactile_sent_[1];
  }
}

void SlaveEndpoint::publish_state(std::uint64_t t_us) {
  wire::RobotState msg;
  msg.pose = wire::quantize_pose(state_.robot);
  msg.opening_permille = wire::to_permille(state_.gripper.p_current);
  msg.contact_permille =
      state_.gripper.p_contact ? wire::to_permille(*state_.gripper.p_contact) : wire::kContactUnset;
  if (link_->is_open()) ++state_sent_;
  send(msg, t_us);
}

// ---------------------------------------------------------------------------
// Master

void LedgerMirror::apply(const wire::SceneEventMsg& e) {
  const double ml = static_cast<double>(e.microliters) / 1000.0;
  double* where = nullptr;
  if (e.location == kLocationBeaker) {
    where = &beaker_ml;
  } else if (e.location == kLocationSpill) {
    where = &spill_ml;
  } else if (e.location >= kLocationTubeBase) {
    const std::size_t i = e.location - kLocationTubeBase;
    if (i >= tube_ml.size()) tube_ml.resize(i + 1, 0.0);
    where = &tube_ml[i];
  }
  if (!where) return;
  *where += ml;
  pipette_ml -= ml;
}

MasterEndpoint::MasterEndpoint(MasterOptions opts, std::unique_ptr<ByteStream> link)
    : opts_(std::move(opts)),
      link_(std::move(link)),
      command_(opts_.command_rate_hz),
      force_sched_(opts_.force_rate_hz),
      keepalive_(opts_.grip_keepalive_hz),
      last_target_(opts_.home),
      ledger_(opts_.initial_ledger) {
  if (!is_valid_scale(opts_.workspace.scale_factor)) {
    throw ConfigError("scale factor must be within 1..5");
  }
  twin_.pose = opts_.home;
}

std::uint64_t MasterEndpoint::next_due_us() const {
  return std::min({command_.next_due(), force_sched_.next_due(), keepalive_.next_due()});
}

void MasterEndpoint::advance_to(std::uint64_t t_us) {
  for (std::uint64_t next = next_due_us(); next <= t_us; next = next_due_us()) {
    now_us_ = next;
    poll_link();
    if (command_.next_due() == next) {
      command_tick();
      command_.fire();
    }
    if (force_sched_.next_due() == next) {
      force_tick();
      force_sched_.fire();
    }
    if (keepalive_.next_due() == next) {
      const std::uint64_t period = 1'000'000ULL / opts_.grip_keepalive_hz;
      if (last_grip_sent_ && now_us_ >= last_grip_time_us_ + period) send_grip(*last_grip_sent_);
      keepalive_.fire();
    }
  }
  now_us_ = std::max(now_us_, t_us);
}

void MasterEndpoint::set_scale(int factor) {
  if (!is_valid_scale(factor)) {
    throw ConfigError("scale factor " + std::to_string(factor) + " outside 1..5");
  }
  opts_.workspace.scale_factor = factor;
  send(wire::ConfigSet{static_cast<std::uint8_t>(wire::ConfigKey::Scale),
                       static_cast<std::uint8_t>(factor)});
}

void MasterEndpoint::set_locks(LockMask locks) {
  opts_.workspace.locks = locks;
  send(wire::ConfigSet{static_cast<std::uint8_t>(wire::ConfigKey::Lock), locks.bits()});
}

MasterView MasterEndpoint::view() const {
  MasterView v;
  v.now_us = now_us_;
  v.twin = twin_;
  v.force = force_;
  if (frames_[0] && frames_[1]) v.frames = std::array<TactileFrame, 2>{*frames_[0], *frames_[1]};
  v.patterns = patterns_;
  v.workspace = opts_.workspace;
  v.home = opts_.home;
  return v;
}

void MasterEndpoint::poll_link() {
  if (!link_->is_open()) connected_ = false;
  const auto bytes = link_->read_available();
  decoder_.feed(bytes);
  while (auto res = decoder_.next()) {
    if (res->status != wire::DecodeStatus::Ok) {
      ++stats_.decode_errors;
      continue;
    }
    record_inbound(stats_, inbound_seq_, res->message->seq);
    apply(*res->message);
  }
}

void MasterEndpoint::apply(const wire::WireMessage& msg) {
  if (const auto* tactile = std::get_if<wire::TactileFrameMsg>(&msg.payload)) {
    const auto idx = static_cast<std::size_t>(tactile->finger) & 1U;
    frames_[idx] = wire::from_message(*tactile, msg.sim_timestamp_us);
    if (frames_[0] && frames_[1] && frames_[0]->timestamp_us == frames_[1]->timestamp_us) {
      patterns_ = std::array<ElectrodePattern, 2>{resample_bicubic(*frames_[0]),
                                                  resample_bicubic(*frames_[1])};
    }
  } else if (const auto* state = std::get_if<wire::RobotState>(&msg.payload)) {
    twin_.pose = wire::dequantize_pose(state->pose, msg.sim_timestamp_us);
    twin_.gripper_opening = wire::from_permille(state->opening_permille);
    if (state->contact_permille == wire::kContactUnset) {
      twin_.contact_opening.reset();
    } else {
      twin_.contact_opening = wire::from_permille(state->contact_permille);
    }
    twin_.last_update_us = msg.sim_timestamp_us;
    twin_.valid = true;
  } else if (const auto* event = std::get_if<wire::SceneEventMsg>(&msg.payload)) {
    ledger_.apply(*event);
    if (event_sink_) event_sink_(*event, msg.sim_timestamp_us);
  }
}

void MasterEndpoint::send(wire::Payload payload) {
  if (!link_->is_open()) {
    connected_ = false;
    return;
  }
  wire::WireMessage msg{next_seq_++, now_us_, std::move(payload)};
  link_->write(wire::encode(msg));
  ++stats_.sent;
  if (observer_) observer_(Direction::MasterToSlave, msg);
}

void MasterEndpoint::send_grip(std::uint16_t permille) {
  last_grip_sent_ = permille;
  last_grip_time_us_ = now_us_;
  send(wire::GripperCommand{permille});
}

void MasterEndpoint::command_tick() {
  HapticInput input = input_source_ ? input_source_(view()) : last_input_;
  input.timestamp_us = now_us_;
  input.handle_displacement_mm = clamp_to_device_workspace(input.handle_displacement_mm);
  input.grip_command = std::clamp(input.grip_command, 0.0, 1.0);
  last_input_ = input;

  last_target_ = scale_workspace(input, opts_.workspace, opts_.home);
  send(wire::TcpCommand{wire::quantize_pose(last_target_)});

  const std::uint16_t permille = wire::to_permille(input.grip_command);
  if (!last_grip_sent_ || *last_grip_sent_ != permille) send_grip(permille);
}

void MasterEndpoint::force_tick() {
  if (!frames_[0] || !frames_[1] || frames_[0]->timestamp_us != frames_[1]->timestamp_us) return;
  GripperState grip;
  grip.p_current = twin_.gripper_opening;
  grip.p_contact = twin_.contact_opening;
  grip.commanded_opening = last_input_.grip_command;
  force_ = kinesthetic_force(*frames_[0], *frames_[1], grip);
  ++force_sent_;
  send(wire::to_message(*force_));
}

std::uint64_t co_simulate(SlaveEndpoint& slave, MasterEndpoint& master, std::uint64_t t_end_us,
                          const std::function<bool()>& stop) {
  std::uint64_t last = 0;
  while (true) {
    const std::uint64_t t = std::min(slave.next_due_us(), master.next_due_us());
    if (t > t_end_us) break;
    slave.advance_to(t);
    master.advance_to(t);
    last = t;
    if (stop && stop()) break;
  }
  return last;
}

}  // namespace telehaptic
