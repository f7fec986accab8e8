#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace telehaptic {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Haptic handle workspace: a cylinder along the device forward (x) axis.
inline constexpr double kDeviceWorkspaceDiameterMm = 160.0;
inline constexpr double kDeviceWorkspaceLengthMm = 110.0;
inline constexpr double kRobotReachMm = 500.0;

struct HapticInput {
  Eigen::Vector3d handle_displacement_mm = Eigen::Vector3d::Zero();
  Eigen::Vector3d handle_tilt_deg = Eigen::Vector3d::Zero();  // roll, pitch, yaw
  double grip_command = 1.0;
  std::uint64_t timestamp_us = 0;
};

bool inside_device_workspace(const Eigen::Vector3d& displacement_mm);

/// Nearest point of the device workspace cylinder.
Eigen::Vector3d clamp_to_device_workspace(const Eigen::Vector3d& displacement_mm);

enum class Lock : std::uint8_t { X = 1, Y = 2, Z = 4, Rotation = 8 };

class LockMask {
 public:
  constexpr LockMask() = default;
  constexpr explicit LockMask(std::uint8_t bits) : bits_(bits & 0x0F) {}

  constexpr LockMask with(Lock l) const { return LockMask(bits_ | static_cast<std::uint8_t>(l)); }
  constexpr bool has(Lock l) const { return (bits_ & static_cast<std::uint8_t>(l)) != 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool operator==(const LockMask&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

struct WorkspaceConfig {
  int scale_factor = 1;
  LockMask locks;
  double robot_reach_mm = kRobotReachMm;
};

inline bool is_valid_scale(int factor) { return factor >= 1 && factor <= 5; }

/// TCP pose in the robot base frame.
struct RobotTarget {
  Eigen::Vector3d position_mm = Eigen::Vector3d::Zero();
  Eigen::Vector3d orientation_deg = Eigen::Vector3d::Zero();
  std::uint64_t timestamp_us = 0;
};

/// Radial projection onto the reach sphere when outside it.
Eigen::Vector3d clamp_to_reach(const Eigen::Vector3d& position_mm, double reach_mm = kRobotReachMm);

/// Position-mode mapping from handle offset to TCP target around `home`.
RobotTarget scale_workspace(const HapticInput& input, const WorkspaceConfig& cfg,
                            const RobotTarget& home);

/// Per-axis gains; the first three axes act on mm, the last three on degrees.
struct PidGains {
  Vector6d kp = Vector6d::Constant(4.0);
  Vector6d ki = Vector6d::Constant(0.5);
  Vector6d kd = Vector6d::Constant(0.05);
  double integral_limit = 50.0;  // mm*s
  double output_limit = 250.0;   // mm/s
};

bool is_valid(const PidGains& gains);

struct PidState {
  Vector6d integral = Vector6d::Zero();
  Vector6d prev_error = Vector6d::Zero();
  bool primed = false;
};

struct PidOutput {
  Vector6d command = Vector6d::Zero();
  PidState state;
};

/// One discrete PID step on the six TCP axes. The integral is clamped to
/// +/- integral_limit and is held while an axis output is saturated in the
/// direction of its error. Throws InvalidTimestep if dt <= 0.
PidOutput pid_step(const RobotTarget& target, const RobotTarget& current, const PidGains& gains,
                   const PidState& state, double dt);

}  // namespace telehaptic
