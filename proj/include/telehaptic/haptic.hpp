#pragma once

#include "telehaptic/tactile.hpp"

#include <cstdint>
#include <optional>

namespace telehaptic {

// Grasp-force ceiling of the desktop haptic display, newtons.
inline constexpr double kMaxGraspForceN = 8.0;

/// Gripper positions as normalised opening, 0 = closed, 1 = fully open.
struct GripperState {
  double p_current = 1.0;
  // Opening at first contact of the current grasp episode.
  std::optional<double> p_contact;
  double commanded_opening = 1.0;
};

struct KinestheticForce {
  double magnitude_n = 0.0;
  std::uint64_t timestamp_us = 0;
};

bool is_valid(const GripperState& grip);

/// Grasp force for the haptic handle: the mean cell force over both pads times
/// the squeeze travelled since first contact, clamped to [0, kMaxGraspForceN].
/// Throws FrameSyncError if the two frames carry different timestamps.
KinestheticForce kinesthetic_force(const TactileFrame& left, const TactileFrame& right,
                                   const GripperState& grip);

}  // namespace telehaptic
