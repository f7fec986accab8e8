#include "telehaptic/tactile.hpp"

#include "telehaptic/errors.hpp"

#include <cmath>
#include <string>

namespace telehaptic {

TactileFrame clamp_sensor(Finger finger, const TactileGrid& raw, std::uint64_t timestamp_us) {
  TactileFrame frame;
  frame.finger = finger;
  frame.timestamp_us = timestamp_us;
  for (int r = 0; r < kSensorRows; ++r) {
    for (int c = 0; c < kSensorCols; ++c) {
      const double v = raw(r, c);
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidSensorValue("sensor cell (" + std::to_string(r) + ", " + std::to_string(c) +
                                 ") holds " + std::to_string(v));
      }
      if (v < kSensorFloorN) {
        frame.cells(r, c) = 0.0;
      } else {
        frame.cells(r, c) = std::min(v, kSensorSaturationN);
      }
    }
  }
  return frame;
}

ElectrodePattern resample_bicubic(const TactileFrame& frame) {
  const auto force = resample_bicubic(frame.cells, kElectrodeRows, kElectrodeCols);
  ElectrodePattern pattern;
  pattern.finger = frame.finger;
  pattern.source_timestamp_us = frame.timestamp_us;
  pattern.cells = force.cwiseMax(0.0).cwiseMin(kSensorSaturationN) / kSensorSaturationN;
  return pattern;
}

ElectrodeLevels pattern_to_levels(const ElectrodePattern& pattern) {
  ElectrodeLevels levels;
  for (int r = 0; r < kElectrodeRows; ++r) {
    for (int c = 0; c < kElectrodeCols; ++c) {
      levels(r, c) = static_cast<int>(std::floor(pattern.cells(r, c) * 255.0 + 0.5));
    }
  }
  return levels;
}

}  // namespace telehaptic
