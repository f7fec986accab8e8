#pragma once

#include "telehaptic/control.hpp"
#include "telehaptic/sim.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace telehaptic {

/// How the scripted operator perceives each feedback channel.
struct PerceptionModel {
  // Camera view of the bulb squeeze: a per-trial bias plus per-glance noise.
  double visual_compression_bias_sd = 0.08;
  double visual_compression_noise_sd = 0.03;
  // Reading the tube level against its markers.
  double visual_volume_noise_sd_ml = 0.15;
  // Felt grasp force: per-trial gain error and per-reading noise, both relative.
  double force_gain_sd = 0.10;
  double force_noise_sd = 0.03;
  // Electrode percept: a cell counts as active at or above this level, and
  // intensity is resolved to this many steps.
  int electrode_active_level = 32;
  int electrode_intensity_steps = 16;
};

/// Operator pacing for one feedback condition.
struct Pacing {
  double squeeze_rate = 0.4;   // normalised opening per second
  double verify_dwell_s = 1.0; // looking at the tube before deciding
  int verify_glances = 3;
};

struct OperatorModel {
  PerceptionModel perception;
  // Squeeze held while carrying liquid, chosen to keep clear of a slip.
  double hold_compression = 0.3;
  double travel_speed_mm_s = 150.0;
  double waypoint_tolerance_mm = 3.0;
  double correction_threshold_ml = 0.04;
  int max_corrections = 2;
  int max_fills = 4;
  // Indexed by FeedbackCondition.
  std::array<Pacing, 4> pacing{Pacing{0.25, 2.0, 4}, Pacing{0.4, 1.2, 3}, Pacing{0.4, 1.2, 3},
                               Pacing{0.4, 1.0, 3}};
};

struct ScenarioSpec {
  SceneConfig scene;
  // Pipettes differ slightly; each trial draws its true outer diameter from
  // this spread around the nominal value, unknown to the operator.
  double pipette_diameter_sd_mm = 0.6;
  double target_volume_ml = 2.0;
  int target_tube = 0;
  std::vector<double> tube_markers_ml{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  PidGains gains;
  int scale_factor = 2;
  std::uint64_t seed = 7;
  double timeout_s = 600.0;
  // Squeeze above the tube and over the beaker happens this far above the rim.
  double approach_height_mm = 230.0;
  double beaker_dip_z_mm = 125.0;
  double tube_dispense_z_mm = 150.0;
  OperatorModel op;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const ScenarioSpec& spec);

void to_json(nlohmann::json& j, const ScenarioSpec& spec);
void from_json(const nlohmann::json& j, ScenarioSpec& spec);

/// Parses YAML (a JSON document is valid YAML too). Missing keys keep defaults.
ScenarioSpec load_scenario(const std::string& path);
ScenarioSpec parse_scenario(const std::string& yaml_text);

nlohmann::json yaml_to_json(const std::string& yaml_text);

/// Stable identifier of a spec: CRC-32 of its canonical JSON, as 8 hex digits.
std::string spec_hash(const ScenarioSpec& spec);

}  // namespace telehaptic
