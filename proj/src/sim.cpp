#include "telehaptic/sim.hpp"

#include "telehaptic/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace telehaptic {

namespace {

constexpr double kEpsilon = 1e-12;

bool within_xy(const Eigen::Vector3d& p, const Vessel& v) {
  return (p.head<2>() - v.center_xy).norm() <= v.radius_mm;
}

std::uint8_t location_code(const TipRegion& region) {
  switch (region.kind) {
    case TipRegion::Kind::OverTube:
      return static_cast<std::uint8_t>(kLocationTubeBase + region.tube);
    case TipRegion::Kind::OverBeakerSubmerged:
    case TipRegion::Kind::OverBeakerAir:
      return kLocationBeaker;
    case TipRegion::Kind::Elsewhere:
      break;
  }
  return kLocationSpill;
}

double& destination(LiquidLedger& ledger, const TipRegion& region) {
  switch (region.kind) {
    case TipRegion::Kind::OverTube:
      return ledger.tube_ml.at(static_cast<std::size_t>(region.tube));
    case TipRegion::Kind::OverBeakerSubmerged:
    case TipRegion::Kind::OverBeakerAir:
      return ledger.beaker_ml;
    case TipRegion::Kind::Elsewhere:
      break;
  }
  return ledger.spill_ml;
}

void emit(std::vector<SceneEvent>* events, EventCode code, double volume, std::uint8_t location) {
  if (events) events->push_back({code, volume, location, 0});
}

// FNV-1a over raw bit patterns.
struct Digest {
  std::uint64_t h = 1469598103934665603ULL;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(const Eigen::Vector3d& v) {
    for (int i = 0; i < 3; ++i) add(v[i]);
  }
};

}  // namespace

double LiquidLedger::total() const {
  return beaker_ml + std::accumulate(tube_ml.begin(), tube_ml.end(), 0.0) + pipette_ml + spill_ml;
}

SceneState initial_state(const SceneConfig& cfg) {
  SceneState s;
  s.robot = cfg.home;
  s.pipette = cfg.pipette;
  s.pipette.compression = 0.0;
  s.ledger.beaker_ml = cfg.initial_beaker_ml;
  s.ledger.tube_ml = cfg.initial_tube_ml;
  s.ledger.pipette_ml = cfg.pipette.held_liquid_ml;
  s.gripper.p_current = 1.0;
  s.gripper.commanded_opening = 1.0;
  if (cfg.start_grasped) {
    s.robot.position_mm = cfg.geometry.rack_grasp_point_mm;
    const double contact = normalized_opening(cfg.pipette.outer_diameter_mm, cfg.gripper);
    s.gripper.p_current = contact;
    s.gripper.commanded_opening = contact;
    s.gripper.p_contact = contact;
    s.grasped = true;
  }
  s.tip_region = tip_region_of(s, cfg);
  return s;
}

double normalized_opening(double opening_mm, const GripperSpec& gripper) {
  return opening_mm / gripper.stroke_mm;
}

double compression_from_opening(double opening, const PipetteModel& p, const GripperSpec& g) {
  const double opening_mm = opening * g.stroke_mm;
  const double span = p.outer_diameter_mm - p.min_squeezed_diameter_mm;
  return std::clamp((p.outer_diameter_mm - opening_mm) / span, 0.0, 1.0);
}

double opening_for_compression(double c, const PipetteModel& p, const GripperSpec& g) {
  const double span = p.outer_diameter_mm - p.min_squeezed_diameter_mm;
  return (p.outer_diameter_mm - std::clamp(c, 0.0, 1.0) * span) / g.stroke_mm;
}

double beaker_surface_z(double beaker_ml, const Vessel& beaker) {
  const double area = std::numbers::pi * beaker.radius_mm * beaker.radius_mm;
  return beaker.bottom_z_mm + beaker_ml * 1000.0 / area;
}

TipRegion tip_region_of(const SceneState& s, const SceneConfig& cfg) {
  if (s.dropped) return {};
  const Eigen::Vector3d holder = s.grasped ? s.robot.position_mm : cfg.geometry.rack_grasp_point_mm;
  const Eigen::Vector3d tip = holder - Eigen::Vector3d(0.0, 0.0, s.pipette.tip_length_mm);

  const Vessel& beaker = cfg.geometry.beaker;
  if (within_xy(tip, beaker) && tip.z() >= beaker.bottom_z_mm) {
    return {tip.z() < beaker_surface_z(s.ledger.beaker_ml, beaker)
                ? TipRegion::Kind::OverBeakerSubmerged
                : TipRegion::Kind::OverBeakerAir,
            -1};
  }
  for (std::size_t i = 0; i < cfg.geometry.tubes.size(); ++i) {
    const Vessel& tube = cfg.geometry.tubes[i];
    if (within_xy(tip, tube) && tip.z() >= tube.bottom_z_mm) {
      return TipRegion::over_tube(static_cast<int>(i));
    }
  }
  return {};
}

std::pair<PipetteModel, LiquidLedger> pipette_flow(const PipetteModel& pipette, double dc,
                                                   const TipRegion& region,
                                                   const LiquidLedger& ledger,
                                                   std::vector<SceneEvent>* events) {
  PipetteModel p = pipette;
  LiquidLedger l = ledger;
  double c_new = p.compression + dc;
  if (c_new < -kEpsilon || c_new > 1.0 + kEpsilon) {
    throw Error("pipette_flow: compression " + std::to_string(c_new) + " outside [0, 1]");
  }
  c_new = std::clamp(c_new, 0.0, 1.0);

  if (dc > 0.0) {
    const double expel = std::min(p.held_liquid_ml, p.bulb_capacity_ml * dc);
    if (expel > 0.0) {
      p.held_liquid_ml -= expel;
      l.pipette_ml -= expel;
      destination(l, region) += expel;
      emit(events, EventCode::LiquidTransfer, expel, location_code(region));
    }
  } else if (dc < 0.0 && region.kind == TipRegion::Kind::OverBeakerSubmerged) {
    const double room = p.bulb_capacity_ml * (1.0 - c_new) - p.held_liquid_ml;
    const double draw = std::max(0.0, std::min({p.bulb_capacity_ml * -dc, l.beaker_ml, room}));
    if (draw > 0.0) {
      l.beaker_ml -= draw;
      p.held_liquid_ml += draw;
      l.pipette_ml += draw;
      emit(events, EventCode::LiquidTransfer, -draw, kLocationBeaker);
    }
  }
  p.compression = c_new;
  return {p, l};
}

TactileGrid contact_footprint(double c, const PipetteModel& pipette) {
  TactileGrid raw = TactileGrid::Zero();
  const double peak = 1.0 + 8.0 * c;
  const double half_width = 0.6 + 2.4 * c;
  const double center_col = (kSensorCols - 1) / 2.0;
  const int first = std::max(0, pipette.body_first_row);
  const int last = std::min(kSensorRows - 1, pipette.body_last_row);
  for (int r = first; r <= last; ++r) {
    for (int col = 0; col < kSensorCols; ++col) {
      const double u = (col - center_col) / half_width;
      raw(r, col) = peak * std::exp(-u * u);
    }
  }
  return raw;
}

std::pair<TactileFrame, TactileFrame> synthesize_tactile(const SceneState& s,
                                                         const SceneConfig& cfg) {
  TactileGrid raw = TactileGrid::Zero();
  if (s.grasped &&
      s.gripper.p_current <= normalized_opening(s.pipette.outer_diameter_mm, cfg.gripper)) {
    raw = contact_footprint(s.pipette.compression, s.pipette);
  }
  return {clamp_sensor(Finger::Left, raw, s.sim_time_us),
          clamp_sensor(Finger::Right, raw, s.sim_time_us)};
}

SceneState tick(const SceneState& state, const ActuatorCommand& cmd, double dt,
                const SceneConfig& cfg, std::vector<SceneEvent>* events) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidTimestep("tick: dt must be positive, got " + std::to_string(dt));
  }
  if (!cmd.velocity.allFinite() || !std::isfinite(cmd.gripper_opening)) {
    throw Error("tick: non-finite actuator command");
  }
  const std::size_t first_event = events ? events->size() : 0;
  SceneState s = state;

  s.robot.position_mm =
      clamp_to_reach(s.robot.position_mm + cmd.velocity.head<3>() * dt, kRobotReachMm);
  s.robot.orientation_deg += cmd.velocity.tail<3>() * dt;

  const double floor_opening =
      normalized_opening(s.pipette.min_squeezed_diameter_mm, cfg.gripper);
  const double contact_opening = normalized_opening(s.pipette.outer_diameter_mm, cfg.gripper);
  const double step = cfg.gripper.max_speed * dt;
  s.gripper.commanded_opening = std::clamp(cmd.gripper_opening, 0.0, 1.0);
  s.gripper.p_current += std::clamp(s.gripper.commanded_opening - s.gripper.p_current, -step, step);

  const double near_rack =
      (s.robot.position_mm - cfg.geometry.rack_grasp_point_mm).norm() <= cfg.geometry.grasp_tolerance_mm;
  if (!s.grasped && !s.dropped && near_rack && s.gripper.p_current <= contact_opening) {
    s.grasped = true;
    emit(events, EventCode::PipetteGrasped, 0.0, kLocationNone);
  } else if (s.grasped && s.gripper.p_current > contact_opening) {
    s.grasped = false;
    if (near_rack) {
      emit(events, EventCode::PipetteReleased, 0.0, kLocationNone);
    } else {
      s.dropped = true;
      const double lost = s.pipette.held_liquid_ml;
      s.pipette.held_liquid_ml = 0.0;
      s.ledger.pipette_ml -= lost;
      s.ledger.spill_ml += lost;
      emit(events, EventCode::PipetteDropped, lost, kLocationSpill);
    }
  }
  if (s.grasped) s.gripper.p_current = std::max(s.gripper.p_current, floor_opening);

  const double c_new =
      s.grasped ? compression_from_opening(s.gripper.p_current, s.pipette, cfg.gripper) : 0.0;
  s.tip_region = tip_region_of(s, cfg);
  std::tie(s.pipette, s.ledger) =
      pipette_flow(s.pipette, c_new - s.pipette.compression, s.tip_region, s.ledger, events);
  // Drawing lowers the beaker surface.
  s.tip_region = tip_region_of(s, cfg);

  s.sim_time_us += static_cast<std::uint64_t>(std::llround(dt * 1e6));

  const auto [left, right] = synthesize_tactile(s, cfg);
  const bool touching = left.cells.any() || right.cells.any();
  if (touching && !s.gripper.p_contact) {
    s.gripper.p_contact = s.gripper.p_current;
  } else if (!touching) {
    s.gripper.p_contact.reset();
  }

  if (events) {
    for (std::size_t i = first_event; i < events->size(); ++i) (*events)[i].sim_time_us = s.sim_time_us;
  }
  return s;
}

std::uint64_t state_digest(const SceneState& s) {
  Digest d;
  d.add(s.robot.position_mm);
  d.add(s.robot.orientation_deg);
  d.add(s.gripper.p_current);
  d.add(s.gripper.p_contact.value_or(-1.0));
  d.add(s.gripper.commanded_opening);
  d.add(s.pipette.held_liquid_ml);
  d.add(s.pipette.compression);
  d.add(s.pipette.outer_diameter_mm);
  d.add(s.ledger.beaker_ml);
  for (double t : s.ledger.tube_ml) d.add(t);
  d.add(s.ledger.pipette_ml);
  d.add(s.ledger.spill_ml);
  d.add(static_cast<std::uint64_t>(s.grasped) | (static_cast<std::uint64_t>(s.dropped) << 1));
  d.add(static_cast<std::uint64_t>(s.tip_region.kind) |
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.tip_region.tube)) << 8));
  d.add(s.sim_time_us);
  return d.h;
}

}  // namespace telehaptic
