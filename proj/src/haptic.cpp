#include "telehaptic/haptic.hpp"

#include "telehaptic/errors.hpp"

#include <algorithm>
#include <string>

namespace telehaptic {

namespace {
bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }
}  // namespace

bool is_valid(const GripperState& grip) {
  return unit_interval(grip.p_current) && unit_interval(grip.commanded_opening) &&
         (!grip.p_contact || unit_interval(*grip.p_contact));
}

KinestheticForce kinesthetic_force(const TactileFrame& left, const TactileFrame& right,
                                   const GripperState& grip) {
  if (left.timestamp_us != right.timestamp_us) {
    throw FrameSyncError("tactile frames out of sync: " + std::to_string(left.timestamp_us) +
                         " vs " + std::to_string(right.timestamp_us));
  }
  KinestheticForce out;
  out.timestamp_us = left.timestamp_us;
  if (!grip.p_contact) return out;

  const double mean = (left.cells.sum() + right.cells.sum()) / 100.0;
  const double squeeze = std::max(0.0, *grip.p_contact - grip.p_current);
  out.magnitude_n = std::clamp(mean * squeeze, 0.0, kMaxGraspForceN);
  return out;
}

}  // namespace telehaptic
