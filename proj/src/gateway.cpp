#include "telehaptic/gateway.hpp"

#include "telehaptic/errors.hpp"

#include <cmath>
#include <iostream>

namespace telehaptic {

using nlohmann::json;

namespace {

std::string_view event_name(std::uint8_t code) {
  switch (static_cast<EventCode>(code)) {
    case EventCode::LiquidTransfer: return "liquid_transfer";
    case EventCode::PipetteGrasped: return "pipette_grasped";
    case EventCode::PipetteReleased: return "pipette_released";
    case EventCode::PipetteDropped: return "pipette_dropped";
    case EventCode::TrialDone: return "trial_done";
    case EventCode::SessionClosed: return "session_closed";
  }
  return "unknown";
}

template <typename Grid>
json cells(const Grid& g) {
  return json(std::vector<double>(g.data(), g.data() + g.size()));  // row-major
}

double number(const json& msg, const char* key, double fallback) {
  const auto it = msg.find(key);
  if (it == msg.end()) return fallback;
  if (!it->is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ConfigError(std::string("'") + key + "' must be finite");
  return v;
}

}  // namespace

GatewayHandler::GatewayHandler(MasterEndpoint& master) : master_(master) {}

json GatewayHandler::error(std::string reason) { return json{{"type", "error"}, {"reason", std::move(reason)}}; }

std::vector<json> GatewayHandler::handle(std::string_view text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    return {error(std::string("malformed JSON: ") + e.what())};
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    return {error("message must be an object with a string 'type'")};
  }
  const std::string type = msg["type"];
  try {
    if (type == "jog") {
      HapticInput& in = controls_.input;
      in.handle_displacement_mm = {number(msg, "dx", 0.0), number(msg, "dy", 0.0), number(msg, "dz", 0.0)};
      in.handle_tilt_deg = {number(msg, "rx", 0.0), number(msg, "ry", 0.0), number(msg, "rz", 0.0)};
    } else if (type == "grip") {
      const double v = number(msg, "value", std::nan(""));
      if (!(v >= 0.0 && v <= 1.0)) return {error("grip value must lie in [0, 1]")};
      controls_.input.grip_command = v;
    } else if (type == "scale") {
      const double f = number(msg, "factor", std::nan(""));
      if (!(f == std::floor(f)) || !is_valid_scale(static_cast<int>(f))) {
        return {error("scale factor must be an integer within 1..5")};
      }
      master_.set_scale(static_cast<int>(f));
    } else if (type == "lock") {
      const auto axes = msg.find("axes");
      if (axes == msg.end() || !axes->is_array()) return {error("lock needs an 'axes' array")};
      LockMask mask;
      for (const auto& a : *axes) {
        const std::string name = a.is_string() ? a.get<std::string>() : "";
        if (name == "x") mask = mask.with(Lock::X);
        else if (name == "y") mask = mask.with(Lock::Y);
        else if (name == "z") mask = mask.with(Lock::Z);
        else if (name == "rotation" || name == "rot") mask = mask.with(Lock::Rotation);
        else return {error("unknown lock axis " + a.dump())};
      }
      master_.set_locks(mask);
    } else if (type == "trial") {
      const std::string action = msg.value("action", "");
      if (action == "start") controls_.running = true;
      else if (action == "stop") controls_.running = false;
      else return {error("trial action must be 'start' or 'stop'")};
    } else {
      ++warnings_;
      last_warning_ = "ignoring console message of unknown type '" + type + "'";
      std::clog << "gateway: " << last_warning_ << '\n';
    }
  } catch (const ConfigError& e) {
    return {error(e.what())};
  }
  return {};
}

InputSource GatewayHandler::input_source() {
  return [this](const MasterView&) { return controls_.input; };
}

void GatewayHandler::note_event(const wire::SceneEventMsg& e, std::uint64_t t_us) {
  events_.push_back(json{{"type", "event"},
                         {"t", t_us},
                         {"code", e.event_code},
                         {"name", event_name(e.event_code)},
                         {"ml", static_cast<double>(e.microliters) / 1000.0},
                         {"location", e.location}});
}

std::vector<json> GatewayHandler::frame() {
  const MasterView v = master_.view();
  std::vector<json> out;

  json locks = json::array();
  const LockMask mask = v.workspace.locks;
  if (mask.has(Lock::X)) locks.push_back("x");
  if (mask.has(Lock::Y)) locks.push_back("y");
  if (mask.has(Lock::Z)) locks.push_back("z");
  if (mask.has(Lock::Rotation)) locks.push_back("rotation");
  const auto& pose = v.twin.pose;
  out.push_back(json{{"type", "state"},
                     {"t", v.now_us},
                     {"valid", v.twin.valid},
                     {"pose",
                      {pose.position_mm.x(), pose.position_mm.y(), pose.position_mm.z(), pose.orientation_deg.x(),
                       pose.orientation_deg.y(), pose.orientation_deg.z()}},
                     {"gripper", v.twin.gripper_opening},
                     {"contact", v.twin.contact_opening ? json(*v.twin.contact_opening) : json(nullptr)},
                     {"scale", v.workspace.scale_factor},
                     {"locks", locks},
                     {"running", controls_.running}});
  out.push_back(json{{"type", "force"}, {"t", v.now_us}, {"value_n", v.force ? v.force->magnitude_n : 0.0}});
  if (v.frames) {
    out.push_back(json{{"type", "tactile"},
                       {"t", v.now_us},
                       {"rows", kSensorRows},
                       {"cols", kSensorCols},
                       {"left", cells((*v.frames)[0].cells)},
                       {"right", cells((*v.frames)[1].cells)}});
  }
  if (v.patterns) {
    out.push_back(json{{"type", "electrode"},
                       {"t", v.now_us},
                       {"rows", kElectrodeRows},
                       {"cols", kElectrodeCols},
                       {"left", cells((*v.patterns)[0].cells)},
                       {"right", cells((*v.patterns)[1].cells)}});
  }
  const LedgerMirror& l = master_.ledger();
  out.push_back(json{{"type", "ledger"},
                     {"t", v.now_us},
                     {"beaker_ml", l.beaker_ml},
                     {"tube_ml", l.tube_ml},
                     {"pipette_ml", l.pipette_ml},
                     {"spill_ml", l.spill_ml}});
  for (auto& e : events_) out.push_back(std::move(e));
  events_.clear();
  return out;
}

FrameDecimator::FrameDecimator(double max_hz)
    : interval_us_(static_cast<std::uint64_t>(std::ceil(1e6 / max_hz))) {
  if (!(max_hz > 0.0)) throw ConfigError("frame rate must be positive");
}

bool FrameDecimator::due(std::uint64_t now_us) {
  if (last_us_ && now_us < *last_us_ + interval_us_) return false;
  last_us_ = now_us;
  return true;
}

}  // namespace telehaptic
