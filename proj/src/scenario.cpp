#include "telehaptic/scenario.hpp"

#include "telehaptic/errors.hpp"
#include "telehaptic/protocol.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace telehaptic {

using nlohmann::json;

namespace {

json vec(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }
json vec(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

template <int N>
Eigen::Matrix<double, N, 1> read_vec(const json& j, const char* what) {
  if (!j.is_array() || j.size() != N) {
    throw ConfigError(std::string(what) + ": expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = j[static_cast<std::size_t>(i)].get<double>();
  return out;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

json vessel_json(const Vessel& v) {
  return {{"center", vec(v.center_xy)},
          {"radius", v.radius_mm},
          {"bottom_z", v.bottom_z_mm},
          {"height", v.height_mm}};
}

Vessel vessel_from(const json& j, Vessel v) {
  if (const auto it = j.find("center"); it != j.end()) v.center_xy = read_vec<2>(*it, "center");
  read(j, "radius", v.radius_mm);
  read(j, "bottom_z", v.bottom_z_mm);
  read(j, "height", v.height_mm);
  return v;
}

json gains_json(const PidGains& g) {
  // Per-axis gains are written as scalars when uniform, which is the usual case.
  auto axis = [](const Vector6d& v) -> json {
    if ((v.array() == v[0]).all()) return v[0];
    return json(std::vector<double>(v.data(), v.data() + 6));
  };
  return {{"kp", axis(g.kp)},
          {"ki", axis(g.ki)},
          {"kd", axis(g.kd)},
          {"integral_limit", g.integral_limit},
          {"output_limit", g.output_limit}};
}

void gains_from(const json& j, PidGains& g) {
  auto axis = [&](const char* key, Vector6d& v) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    if (it->is_number()) {
      v.setConstant(it->get<double>());
    } else {
      v = read_vec<6>(*it, key);
    }
  };
  axis("kp", g.kp);
  axis("ki", g.ki);
  axis("kd", g.kd);
  read(j, "integral_limit", g.integral_limit);
  read(j, "output_limit", g.output_limit);
}

json pacing_json(const Pacing& p) {
  return {{"squeeze_rate", p.squeeze_rate},
          {"verify_dwell_s", p.verify_dwell_s},
          {"verify_glances", p.verify_glances}};
}

Pacing pacing_from(const json& j, Pacing p) {
  read(j, "squeeze_rate", p.squeeze_rate);
  read(j, "verify_dwell_s", p.verify_dwell_s);
  read(j, "verify_glances", p.verify_glances);
  return p;
}

constexpr std::array<const char*, 4> kConditionKeys = {"v", "vf", "ve", "vfe"};

json scalar_json(const YAML::Node& node) {
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  try {
    std::size_t used = 0;
    const long long i = std::stoll(s, &used);
    if (used == s.size()) return i;
  } catch (const std::exception&) {
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::exception&) {
  }
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  if (s == "null" || s == "~") return nullptr;
  return s;
}

json node_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Sequence: {
      json out = json::array();
      for (const auto& child : node) out.push_back(node_to_json(child));
      return out;
    }
    case YAML::NodeType::Map: {
      json out = json::object();
      for (const auto& kv : node) out[kv.first.as<std::string>()] = node_to_json(kv.second);
      return out;
    }
    case YAML::NodeType::Scalar:
      return scalar_json(node);
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      break;
  }
  return nullptr;
}

}  // namespace

void validate(const ScenarioSpec& s) {
  auto fail = [](const std::string& why) { throw ConfigError("scenario: " + why); };
  if (!(s.target_volume_ml > 0.0)) fail("target_volume_ml must be positive");
  if (s.scene.initial_beaker_ml < 0.0) fail("initial_beaker_ml must be non-negative");
  if (s.scene.geometry.tubes.empty()) fail("at least one tube is required");
  if (s.scene.initial_tube_ml.size() != s.scene.geometry.tubes.size()) {
    fail("initial_tube_ml needs one entry per tube");
  }
  for (double v : s.scene.initial_tube_ml) {
    if (v < 0.0) fail("tube volumes must be non-negative");
  }
  if (s.target_tube < 0 || static_cast<std::size_t>(s.target_tube) >= s.scene.geometry.tubes.size()) {
    fail("target_tube out of range");
  }
  const PipetteModel& p = s.scene.pipette;
  if (!(p.bulb_capacity_ml > 0.0)) fail("pipette capacity must be positive");
  if (!(p.min_squeezed_diameter_mm > 0.0 && p.min_squeezed_diameter_mm < p.outer_diameter_mm)) {
    fail("pipette diameters must satisfy 0 < min_squeezed < outer");
  }
  if (p.outer_diameter_mm > s.scene.gripper.stroke_mm) fail("pipette wider than the gripper stroke");
  if (p.held_liquid_ml < 0.0 || p.held_liquid_ml > p.bulb_capacity_ml) {
    fail("initial pipette contents outside [0, capacity]");
  }
  if (p.body_first_row < 0 || p.body_last_row >= kSensorRows || p.body_first_row > p.body_last_row) {
    fail("pipette body rows outside the pad");
  }
  if (!(s.scene.gripper.max_speed > 0.0)) fail("gripper max_speed must be positive");
  if (!is_valid_scale(s.scale_factor)) fail("scale_factor must be within 1..5");
  if (!is_valid(s.gains)) fail("controller gains must be non-negative with positive limits");
  if (!(s.timeout_s > 0.0)) fail("timeout_s must be positive");
  if (s.pipette_diameter_sd_mm < 0.0) fail("pipette diameter_sd must be non-negative");
  if (s.op.max_fills < 1 || s.op.max_corrections < 0) fail("operator fill and correction limits");
  const double h = s.op.hold_compression;
  if (!(h > 0.0 && h < 1.0)) fail("operator hold_compression must lie in (0, 1)");
  for (const Pacing& pace : s.op.pacing) {
    if (!(pace.squeeze_rate > 0.0) || pace.verify_dwell_s < 0.0 || pace.verify_glances < 1) {
      fail("operator pacing needs a positive squeeze rate and at least one glance");
    }
  }
}

void to_json(json& j, const ScenarioSpec& s) {
  const SceneGeometry& g = s.scene.geometry;
  json tubes = json::array();
  for (const Vessel& t : g.tubes) tubes.push_back(vessel_json(t));
  const PerceptionModel& pm = s.op.perception;
  json pacing = json::object();
  for (std::size_t i = 0; i < kConditionKeys.size(); ++i) pacing[kConditionKeys[i]] = pacing_json(s.op.pacing[i]);

  j = json{
      {"target_volume_ml", s.target_volume_ml},
      {"target_tube", s.target_tube},
      {"tube_markers_ml", s.tube_markers_ml},
      {"scale_factor", s.scale_factor},
      {"seed", s.seed},
      {"timeout_s", s.timeout_s},
      {"scene",
       {{"beaker", vessel_json(g.beaker)},
        {"tubes", tubes},
        {"rack_grasp_point", vec(g.rack_grasp_point_mm)},
        {"grasp_tolerance", g.grasp_tolerance_mm},
        {"initial_beaker_ml", s.scene.initial_beaker_ml},
        {"initial_tube_ml", s.scene.initial_tube_ml},
        {"home", vec(s.scene.home.position_mm)},
        {"start_grasped", s.scene.start_grasped}}},
      {"pipette",
       {{"capacity_ml", s.scene.pipette.bulb_capacity_ml},
        {"outer_diameter", s.scene.pipette.outer_diameter_mm},
        {"min_squeezed_diameter", s.scene.pipette.min_squeezed_diameter_mm},
        {"tip_length", s.scene.pipette.tip_length_mm},
        {"body_rows", {s.scene.pipette.body_first_row, s.scene.pipette.body_last_row}},
        {"held_liquid_ml", s.scene.pipette.held_liquid_ml},
        {"diameter_sd", s.pipette_diameter_sd_mm}}},
      {"gripper", {{"stroke", s.scene.gripper.stroke_mm}, {"max_speed", s.scene.gripper.max_speed}}},
      {"controller", gains_json(s.gains)},
      {"motion",
       {{"approach_height", s.approach_height_mm},
        {"beaker_dip_z", s.beaker_dip_z_mm},
        {"tube_dispense_z", s.tube_dispense_z_mm}}},
      {"operator",
       {{"hold_compression", s.op.hold_compression},
        {"travel_speed", s.op.travel_speed_mm_s},
        {"waypoint_tolerance", s.op.waypoint_tolerance_mm},
        {"correction_threshold_ml", s.op.correction_threshold_ml},
        {"max_corrections", s.op.max_corrections},
        {"max_fills", s.op.max_fills},
        {"perception",
         {{"visual_compression_bias_sd", pm.visual_compression_bias_sd},
          {"visual_compression_noise_sd", pm.visual_compression_noise_sd},
          {"visual_volume_noise_sd_ml", pm.visual_volume_noise_sd_ml},
          {"force_gain_sd", pm.force_gain_sd},
          {"force_noise_sd", pm.force_noise_sd},
          {"electrode_active_level", pm.electrode_active_level},
          {"electrode_intensity_steps", pm.electrode_intensity_steps}}},
        {"pacing", pacing}}},
  };
}

void from_json(const json& j, ScenarioSpec& s) {
  if (!j.is_object()) throw ConfigError("scenario: top level must be a mapping");
  try {
    read(j, "target_volume_ml", s.target_volume_ml);
    read(j, "target_tube", s.target_tube);
    read(j, "tube_markers_ml", s.tube_markers_ml);
    read(j, "scale_factor", s.scale_factor);
    read(j, "seed", s.seed);
    read(j, "timeout_s", s.timeout_s);

    if (const auto it = j.find("scene"); it != j.end()) {
      const json& sc = *it;
      SceneGeometry& g = s.scene.geometry;
      if (const auto b = sc.find("beaker"); b != sc.end()) g.beaker = vessel_from(*b, g.beaker);
      if (const auto t = sc.find("tubes"); t != sc.end()) {
        std::vector<Vessel> tubes;
        for (std::size_t i = 0; i < t->size(); ++i) {
          tubes.push_back(vessel_from((*t)[i], i < g.tubes.size() ? g.tubes[i] : Vessel{}));
        }
        g.tubes = std::move(tubes);
        if (!sc.contains("initial_tube_ml")) s.scene.initial_tube_ml.assign(g.tubes.size(), 0.0);
      }
      if (const auto r = sc.find("rack_grasp_point"); r != sc.end()) {
        g.rack_grasp_point_mm = read_vec<3>(*r, "rack_grasp_point");
      }
      read(sc, "grasp_tolerance", g.grasp_tolerance_mm);
      read(sc, "initial_beaker_ml", s.scene.initial_beaker_ml);
      read(sc, "initial_tube_ml", s.scene.initial_tube_ml);
      if (const auto h = sc.find("home"); h != sc.end()) s.scene.home.position_mm = read_vec<3>(*h, "home");
      read(sc, "start_grasped", s.scene.start_grasped);
    }
    if (const auto it = j.find("pipette"); it != j.end()) {
      PipetteModel& p = s.scene.pipette;
      read(*it, "capacity_ml", p.bulb_capacity_ml);
      read(*it, "outer_diameter", p.outer_diameter_mm);
      read(*it, "min_squeezed_diameter", p.min_squeezed_diameter_mm);
      read(*it, "tip_length", p.tip_length_mm);
      read(*it, "held_liquid_ml", p.held_liquid_ml);
      read(*it, "diameter_sd", s.pipette_diameter_sd_mm);
      if (const auto rows = it->find("body_rows"); rows != it->end()) {
        const auto v = read_vec<2>(*rows, "body_rows");
        p.body_first_row = static_cast<int>(v[0]);
        p.body_last_row = static_cast<int>(v[1]);
      }
    }
    if (const auto it = j.find("gripper"); it != j.end()) {
      read(*it, "stroke", s.scene.gripper.stroke_mm);
      read(*it, "max_speed", s.scene.gripper.max_speed);
    }
    if (const auto it = j.find("controller"); it != j.end()) gains_from(*it, s.gains);
    if (const auto it = j.find("motion"); it != j.end()) {
      read(*it, "approach_height", s.approach_height_mm);
      read(*it, "beaker_dip_z", s.beaker_dip_z_mm);
      read(*it, "tube_dispense_z", s.tube_dispense_z_mm);
    }
    if (const auto it = j.find("operator"); it != j.end()) {
      OperatorModel& op = s.op;
      read(*it, "hold_compression", op.hold_compression);
      read(*it, "travel_speed", op.travel_speed_mm_s);
      read(*it, "waypoint_tolerance", op.waypoint_tolerance_mm);
      read(*it, "correction_threshold_ml", op.correction_threshold_ml);
      read(*it, "max_corrections", op.max_corrections);
      read(*it, "max_fills", op.max_fills);
      if (const auto p = it->find("perception"); p != it->end()) {
        PerceptionModel& pm = op.perception;
        read(*p, "visual_compression_bias_sd", pm.visual_compression_bias_sd);
        read(*p, "visual_compression_noise_sd", pm.visual_compression_noise_sd);
        read(*p, "visual_volume_noise_sd_ml", pm.visual_volume_noise_sd_ml);
        read(*p, "force_gain_sd", pm.force_gain_sd);
        read(*p, "force_noise_sd", pm.force_noise_sd);
        read(*p, "electrode_active_level", pm.electrode_active_level);
        read(*p, "electrode_intensity_steps", pm.electrode_intensity_steps);
      }
      if (const auto p = it->find("pacing"); p != it->end()) {
        for (std::size_t i = 0; i < kConditionKeys.size(); ++i) {
          if (const auto c = p->find(kConditionKeys[i]); c != p->end()) {
            op.pacing[i] = pacing_from(*c, op.pacing[i]);
          }
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.scene.home.orientation_deg.setZero();
  validate(s);
}

json yaml_to_json(const std::string& yaml_text) {
  try {
    return node_to_json(YAML::Load(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

ScenarioSpec parse_scenario(const std::string& yaml_text) {
  ScenarioSpec spec;
  from_json(yaml_to_json(yaml_text), spec);
  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string spec_hash(const ScenarioSpec& spec) {
  const std::string canonical = json(spec).dump();
  const auto crc = wire::crc32(
      std::span(reinterpret_cast<const std::uint8_t*>(canonical.data()), canonical.size()));
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", crc);
  return hex;
}

}  // namespace telehaptic
