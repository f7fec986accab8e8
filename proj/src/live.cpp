#include "telehaptic/live.hpp"

#include "telehaptic/trial.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace telehaptic {

LiveSession::LiveSession(LiveOptions opts)
    : opts_(std::move(opts)),
      listener_(opts_.slave_port, opts_.address),
      server_(opts_.ui_port, opts_.address),
      decimator_(opts_.frame_hz) {
  validate(opts_.spec);
  const SceneConfig cfg = realize_scene(opts_.spec);
  const SceneState s0 = initial_state(cfg);

  // The kernel completes the handshake from the backlog, so one thread can
  // connect first and accept afterwards.
  auto master_link = tcp_connect(opts_.address, listener_.port());
  auto slave_link = listener_.accept();

  SlaveOptions so;
  so.gains = opts_.spec.gains;
  slave_ = std::make_unique<SlaveEndpoint>(cfg, s0, std::move(slave_link), so);

  MasterOptions mo;
  mo.workspace.scale_factor = opts_.spec.scale_factor;
  mo.home = cfg.home;
  mo.initial_ledger.beaker_ml = s0.ledger.beaker_ml;
  mo.initial_ledger.tube_ml = s0.ledger.tube_ml;
  mo.initial_ledger.pipette_ml = s0.ledger.pipette_ml;
  master_ = std::make_unique<MasterEndpoint>(mo, std::move(master_link));

  handler_ = std::make_unique<GatewayHandler>(*master_);
  master_->set_input_source(handler_->input_source());
  master_->set_event_sink([this](const wire::SceneEventMsg& e, std::uint64_t t) { handler_->note_event(e, t); });
}

void LiveSession::service_console() {
  for (auto& in : server_.drain_inbound()) {
    for (const auto& reply : handler_->handle(in.text)) server_.send(in.client, reply.dump());
  }
  if (decimator_.due(now_us_)) {
    for (const auto& msg : handler_->frame()) server_.broadcast(msg.dump());
  }
}

void LiveSession::pace() {
  using namespace std::chrono;
  const auto now = steady_clock::now();
  if (!wall_origin_) wall_origin_ = now - microseconds(now_us_);
  const auto due = *wall_origin_ + microseconds(now_us_);
  if (due > now) std::this_thread::sleep_for(due - now);
}

std::uint64_t LiveSession::step() {
  service_console();
  if (!handler_->controls().running) {
    wall_origin_.reset();
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    return now_us_;
  }
  now_us_ = std::min(slave_->next_due_us(), master_->next_due_us());
  if (opts_.realtime) pace();
  slave_->advance_to(now_us_);
  master_->advance_to(now_us_);
  return now_us_;
}

void LiveSession::run(double duration_s, const std::function<bool()>& stop) {
  const auto end_us = static_cast<std::uint64_t>(std::llround(duration_s * 1e6));
  while (duration_s <= 0.0 || now_us_ < end_us) {
    if (stop && stop()) break;
    step();
  }
}

}  // namespace telehaptic
