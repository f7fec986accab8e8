#include "telehaptic/control.hpp"

#include "telehaptic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace telehaptic {

bool inside_device_workspace(const Eigen::Vector3d& d) {
  const double radius = kDeviceWorkspaceDiameterMm / 2.0;
  const double half_length = kDeviceWorkspaceLengthMm / 2.0;
  return std::abs(d.x()) <= half_length && d.tail<2>().norm() <= radius;
}

Eigen::Vector3d clamp_to_device_workspace(const Eigen::Vector3d& d) {
  const double radius = kDeviceWorkspaceDiameterMm / 2.0;
  const double half_length = kDeviceWorkspaceLengthMm / 2.0;
  Eigen::Vector3d out = d;
  out.x() = std::clamp(d.x(), -half_length, half_length);
  const double r = d.tail<2>().norm();
  if (r > radius) out.tail<2>() *= radius / r;
  return out;
}

Eigen::Vector3d clamp_to_reach(const Eigen::Vector3d& p, double reach_mm) {
  const double n = p.norm();
  if (n <= reach_mm) return p;
  return p * (reach_mm / n);
}

RobotTarget scale_workspace(const HapticInput& input, const WorkspaceConfig& cfg,
                            const RobotTarget& home) {
  Eigen::Vector3d offset = static_cast<double>(cfg.scale_factor) * input.handle_displacement_mm;
  if (cfg.locks.has(Lock::X)) offset.x() = 0.0;
  if (cfg.locks.has(Lock::Y)) offset.y() = 0.0;
  if (cfg.locks.has(Lock::Z)) offset.z() = 0.0;

  RobotTarget out;
  out.timestamp_us = input.timestamp_us;
  out.position_mm = clamp_to_reach(home.position_mm + offset, cfg.robot_reach_mm);
  out.orientation_deg = cfg.locks.has(Lock::Rotation)
                            ? home.orientation_deg
                            : Eigen::Vector3d(home.orientation_deg + input.handle_tilt_deg);
  return out;
}

bool is_valid(const PidGains& g) {
  return (g.kp.array() >= 0.0).all() && (g.ki.array() >= 0.0).all() &&
         (g.kd.array() >= 0.0).all() && g.integral_limit > 0.0 && g.output_limit > 0.0;
}

PidOutput pid_step(const RobotTarget& target, const RobotTarget& current, const PidGains& gains,
                   const PidState& state, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidTimestep("pid_step: dt must be positive, got " + std::to_string(dt));
  }
  Vector6d error;
  error << target.position_mm - current.position_mm,
      target.orientation_deg - current.orientation_deg;

  const Vector6d derivative =
      state.primed ? Vector6d((error - state.prev_error) / dt) : Vector6d::Zero();

  PidOutput out;
  out.state.prev_error = error;
  out.state.primed = true;
  for (int i = 0; i < 6; ++i) {
    const double candidate = std::clamp(state.integral[i] + error[i] * dt, -gains.integral_limit,
                                        gains.integral_limit);
    const double raw = gains.kp[i] * error[i] + gains.ki[i] * candidate + gains.kd[i] * derivative[i];
    const bool winding = std::abs(raw) > gains.output_limit && raw * error[i] > 0.0;
    out.state.integral[i] = winding ? state.integral[i] : candidate;
    const double v =
        gains.kp[i] * error[i] + gains.ki[i] * out.state.integral[i] + gains.kd[i] * derivative[i];
    out.command[i] = std::clamp(v, -gains.output_limit, gains.output_limit);
  }
  return out;
}

}  // namespace telehaptic
