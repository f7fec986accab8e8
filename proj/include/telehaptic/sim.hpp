#pragma once

#include "telehaptic/control.hpp"
#include "telehaptic/haptic.hpp"
#include "telehaptic/tactile.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

namespace telehaptic {

/// Vertical cylinder (beaker or test tube), mm in the robot base frame.
struct Vessel {
  Eigen::Vector2d center_xy = Eigen::Vector2d::Zero();
  double radius_mm = 10.0;
  double bottom_z_mm = 0.0;
  double height_mm = 100.0;
};

struct SceneGeometry {
  Vessel beaker{Eigen::Vector2d(300.0, -100.0), 35.0, 20.0, 80.0};
  std::vector<Vessel> tubes{{Eigen::Vector2d(300.0, 40.0), 6.0, 20.0, 100.0},
                            {Eigen::Vector2d(300.0, 80.0), 6.0, 20.0, 100.0}};
  // TCP position that grasps the pipette standing in its rack.
  Eigen::Vector3d rack_grasp_point_mm{250.0, 130.0, 160.0};
  double grasp_tolerance_mm = 5.0;
};

/// Transfer pipette: bulb parameters plus its current contents and squeeze.
struct PipetteModel {
  double bulb_capacity_ml = 1.5;
  double outer_diameter_mm = 12.0;
  double min_squeezed_diameter_mm = 4.0;
  double tip_length_mm = 100.0;
  // Pad rows covered by the pipette body, inclusive.
  int body_first_row = 1;
  int body_last_row = 8;

  double held_liquid_ml = 0.0;
  double compression = 0.0;

  double free_volume_ml() const { return bulb_capacity_ml * (1.0 - compression); }
};

struct GripperSpec {
  double stroke_mm = 85.0;
  double max_speed = 0.8;  // normalised opening per second
};

struct SceneConfig {
  SceneGeometry geometry;
  PipetteModel pipette;
  GripperSpec gripper;
  double initial_beaker_ml = 60.0;
  std::vector<double> initial_tube_ml{0.0, 0.0};
  RobotTarget home{Eigen::Vector3d(300.0, 0.0, 200.0), Eigen::Vector3d::Zero(), 0};
  bool start_grasped = false;
};

struct LiquidLedger {
  double beaker_ml = 0.0;
  std::vector<double> tube_ml;
  double pipette_ml = 0.0;
  double spill_ml = 0.0;

  double total() const;
};

struct TipRegion {
  enum class Kind : std::uint8_t { OverBeakerSubmerged, OverBeakerAir, OverTube, Elsewhere };
  Kind kind = Kind::Elsewhere;
  int tube = -1;

  static TipRegion over_tube(int i) { return {Kind::OverTube, i}; }
  bool operator==(const TipRegion&) const = default;
};

enum class EventCode : std::uint8_t {
  LiquidTransfer = 1,
  PipetteGrasped = 2,
  PipetteReleased = 3,
  PipetteDropped = 4,
  TrialDone = 5,
  SessionClosed = 6,
};

// Location codes carried by scene events; tubes are kLocationTubeBase + index.
inline constexpr std::uint8_t kLocationNone = 0;
inline constexpr std::uint8_t kLocationBeaker = 1;
inline constexpr std::uint8_t kLocationSpill = 2;
inline constexpr std::uint8_t kLocationPipette = 3;
inline constexpr std::uint8_t kLocationTubeBase = 10;

struct SceneEvent {
  EventCode code = EventCode::LiquidTransfer;
  double volume_delta_ml = 0.0;  // signed change at `location`
  std::uint8_t location = kLocationNone;
  std::uint64_t sim_time_us = 0;
};

struct SceneState {
  RobotTarget robot;
  GripperState gripper;
  PipetteModel pipette;
  LiquidLedger ledger;
  bool grasped = false;
  bool dropped = false;
  TipRegion tip_region;
  std::uint64_t sim_time_us = 0;
};

struct ActuatorCommand {
  Vector6d velocity = Vector6d::Zero();  // mm/s then deg/s
  double gripper_opening = 1.0;
};

SceneState initial_state(const SceneConfig& cfg);

double normalized_opening(double opening_mm, const GripperSpec& gripper);

/// Squeeze implied by a gripper opening on a grasped pipette, in [0, 1].
double compression_from_opening(double opening, const PipetteModel& pipette,
                                 const GripperSpec& gripper);

/// Opening that realises a squeeze `c` on the pipette.
double opening_for_compression(double c, const PipetteModel& pipette, const GripperSpec& gripper);

double beaker_surface_z(double beaker_ml, const Vessel& beaker);

/// Where the pipette tip sits; a pure function of pose, grasp and geometry.
TipRegion tip_region_of(const SceneState& state, const SceneConfig& cfg);

/// Bulb displacement exchange for a compression change `dc`. Expels liquid
/// before air when squeezed; draws from the beaker only when submerged.
std::pair<PipetteModel, LiquidLedger> pipette_flow(const PipetteModel& pipette, double dc,
                                                   const TipRegion& region,
                                                   const LiquidLedger& ledger,
                                                   std::vector<SceneEvent>* events = nullptr);

/// Contact footprint on both pads for the current grasp.
std::pair<TactileFrame, TactileFrame> synthesize_tactile(const SceneState& state,
                                                         const SceneConfig& cfg);

/// Raw per-cell footprint force for squeeze `c` before sensor clamping.
TactileGrid contact_footprint(double c, const PipetteModel& pipette);

/// Advances the scene by dt seconds. Deterministic; throws InvalidTimestep on dt <= 0.
SceneState tick(const SceneState& state, const ActuatorCommand& cmd, double dt,
                const SceneConfig& cfg, std::vector<SceneEvent>* events = nullptr);

/// Bitwise digest of every numeric field; equal digests imply bit-identical states.
std::uint64_t state_digest(const SceneState& state);

}  // namespace telehaptic
