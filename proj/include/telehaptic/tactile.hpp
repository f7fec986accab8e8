#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace telehaptic {

enum class Finger : std::uint8_t { Left = 0, Right = 1 };

inline constexpr int kSensorRows = 10;
inline constexpr int kSensorCols = 5;
inline constexpr int kElectrodeRows = 4;
inline constexpr int kElectrodeCols = 5;

// Sensor detection floor and saturation, newtons per cell.
inline constexpr double kSensorFloorN = 1.0;
inline constexpr double kSensorSaturationN = 9.0;

template <typename Scalar>
using TactileGridT = Eigen::Matrix<Scalar, kSensorRows, kSensorCols, Eigen::RowMajor>;
template <typename Scalar>
using ElectrodeGridT = Eigen::Matrix<Scalar, kElectrodeRows, kElectrodeCols, Eigen::RowMajor>;

using TactileGrid = TactileGridT<double>;
using ElectrodeGrid = ElectrodeGridT<double>;
using ElectrodeLevels = Eigen::Matrix<int, kElectrodeRows, kElectrodeCols, Eigen::RowMajor>;

/// One finger's pad reading. Rows run along the pad's long axis.
/// Every cell is exactly 0 or lies in [1, 9] N.
struct TactileFrame {
  Finger finger = Finger::Left;
  TactileGrid cells = TactileGrid::Zero();
  std::uint64_t timestamp_us = 0;
};

/// One finger's electrode stimulation map, intensities in [0, 1].
struct ElectrodePattern {
  Finger finger = Finger::Left;
  ElectrodeGrid cells = ElectrodeGrid::Zero();
  std::uint64_t source_timestamp_us = 0;
};

/// Applies the sensor's detection floor and saturation to raw contact forces.
/// Throws InvalidSensorValue on negative or non-finite input.
TactileFrame clamp_sensor(Finger finger, const TactileGrid& raw, std::uint64_t timestamp_us);

/// Keys cubic convolution kernel.
template <typename Scalar>
Scalar cubic_convolution(Scalar x, Scalar a = Scalar(-0.5)) {
  using std::abs;
  const Scalar t = abs(x);
  if (t <= Scalar(1)) {
    return ((a + Scalar(2)) * t - (a + Scalar(3))) * t * t + Scalar(1);
  }
  if (t < Scalar(2)) {
    return ((a * t - Scalar(5) * a) * t + Scalar(8) * a) * t - Scalar(4) * a;
  }
  return Scalar(0);
}

/// Separable bicubic resampling with edge-clamped borders and align-corners
/// coordinate mapping (first and last output samples land on the first and
/// last source samples).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
resample_bicubic(const Eigen::MatrixBase<Derived>& src, Eigen::Index out_rows, Eigen::Index out_cols,
                 typename Derived::Scalar a = typename Derived::Scalar(-0.5)) {
  using Scalar = typename Derived::Scalar;
  using Index = Eigen::Index;
  using Weights = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // Dense (out x in) weight matrix for one axis; clamped taps fold into the border sample.
  auto axis_weights = [a](Index in, Index out) {
    Weights w = Weights::Zero(out, in);
    for (Index o = 0; o < out; ++o) {
      const Scalar pos = out > 1 ? Scalar(o) * Scalar(in - 1) / Scalar(out - 1) : Scalar(0);
      const Index base = static_cast<Index>(std::floor(pos));
      for (Index k = base - 1; k <= base + 2; ++k) {
        const Index clamped = std::clamp<Index>(k, 0, in - 1);
        w(o, clamped) += cubic_convolution<Scalar>(pos - Scalar(k), a);
      }
    }
    return w;
  };

  const Weights row_w = axis_weights(src.rows(), out_rows);
  const Weights col_w = axis_weights(src.cols(), out_cols);
  return row_w * src.derived() * col_w.transpose();
}

/// Downsamples a 10x5 tactile frame to a 4x5 electrode pattern. The force-domain
/// result is clamped to [0, 9] N and normalised by the 9 N saturation.
ElectrodePattern resample_bicubic(const TactileFrame& frame);

/// Quantises intensities to 8-bit stimulation levels, round half up.
ElectrodeLevels pattern_to_levels(const ElectrodePattern& pattern);

inline bool is_valid_frame(const TactileFrame& frame) {
  for (Eigen::Index i = 0; i < frame.cells.size(); ++i) {
    const double v = frame.cells.data()[i];
    if (!(v == 0.0 || (v >= kSensorFloorN && v <= kSensorSaturationN))) return false;
  }
  return true;
}

}  // namespace telehaptic
