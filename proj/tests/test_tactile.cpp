#include "doctest.h"
#include "oracles.hpp"

#include "telehaptic/errors.hpp"
#include "telehaptic/tactile.hpp"

#include <limits>
#include <random>

using namespace telehaptic;

namespace {

TactileFrame frame_of(const TactileGrid& raw) { return clamp_sensor(Finger::Left, raw, 0); }

oracle::Grid to_grid(const TactileGrid& g) {
  oracle::Grid out(kSensorRows, std::vector<long double>(kSensorCols));
  for (int r = 0; r < kSensorRows; ++r)
    for (int c = 0; c < kSensorCols; ++c) out[r][c] = g(r, c);
  return out;
}

// Expected pattern from the reference resampler, clamped and normalised.
ElectrodeGrid oracle_pattern(const TactileGrid& cells) {
  const auto ref = oracle::bicubic(to_grid(cells), kElectrodeRows, kElectrodeCols);
  ElectrodeGrid out;
  for (int r = 0; r < kElectrodeRows; ++r)
    for (int c = 0; c < kElectrodeCols; ++c)
      out(r, c) = static_cast<double>(std::clamp<long double>(ref[r][c], 0.0L, 9.0L) / 9.0L);
  return out;
}

TactileGrid random_valid_cells(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> force(0.0, 12.0);
  TactileGrid raw;
  for (int i = 0; i < raw.size(); ++i) raw.data()[i] = force(rng);
  return frame_of(raw).cells;
}

}  // namespace

TEST_CASE("clamp_sensor applies floor and saturation") {
  CHECK(frame_of(TactileGrid::Zero()).cells.isZero());
  CHECK((frame_of(TactileGrid::Constant(12.0)).cells.array() == 9.0).all());

  TactileGrid raw = TactileGrid::Zero();
  raw.row(0) << 0.5, 1.0, 5.0, 9.0, 9.5;
  const auto f = frame_of(raw);
  CHECK(f.cells(0, 0) == 0.0);
  CHECK(f.cells(0, 1) == 1.0);
  CHECK(f.cells(0, 2) == 5.0);
  CHECK(f.cells(0, 3) == 9.0);
  CHECK(f.cells(0, 4) == 9.0);
  CHECK(is_valid_frame(f));
}

TEST_CASE("clamp_sensor rejects negative and non-finite cells") {
  TactileGrid raw = TactileGrid::Zero();
  raw(3, 2) = -0.1;
  CHECK_THROWS_AS(frame_of(raw), InvalidSensorValue);
  raw(3, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(frame_of(raw), InvalidSensorValue);
  raw(3, 2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(frame_of(raw), InvalidSensorValue);
}

TEST_CASE("cubic kernel matches the reference and interpolates") {
  for (double x = -2.5; x <= 2.5; x += 0.125) {
    CHECK(cubic_convolution(x) == doctest::Approx(double(oracle::keys_kernel(x, -0.5))).epsilon(1e-14));
  }
  CHECK(cubic_convolution(0.0) == 1.0);
  CHECK(cubic_convolution(1.0) == 0.0);
  CHECK(cubic_convolution(2.0) == 0.0);
}

TEST_CASE("constant frames resample to constant patterns") {
  for (double c : {1.0, 4.5, 7.25, 9.0}) {
    const auto p = resample_bicubic(frame_of(TactileGrid::Constant(c)));
    CHECK((p.cells.array() - c / 9.0).abs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("linear ramp along the long axis") {
  TactileGrid raw;
  for (int r = 0; r < kSensorRows; ++r) raw.row(r).setConstant(1.0 + 0.8 * r);
  const auto p = resample_bicubic(frame_of(raw));
  for (int r = 0; r < kElectrodeRows; ++r) {
    for (int c = 0; c < kElectrodeCols; ++c) {
      CHECK(std::abs(p.cells(r, c) - (1.0 + 0.8 * (r * 3)) / 9.0) <= 1e-9);
    }
  }
}

TEST_CASE("single hot cell peaks at the electrode over it") {
  // Row 6 maps exactly onto electrode row 2 under align-corners (6 = 2 * 9 / 3).
  TactileGrid raw = TactileGrid::Zero();
  raw(6, 2) = 7.2;
  const auto f = frame_of(raw);
  const auto p = resample_bicubic(f);
  Eigen::Index r = 0, c = 0;
  p.cells.maxCoeff(&r, &c);
  CHECK(r == 2);
  CHECK(c == 2);
  CHECK((p.cells - oracle_pattern(f.cells)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(p.cells(2, 2) == doctest::Approx(0.8));
}

TEST_CASE("generic resampler agrees with the reference off the sample grid") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(0.0, 9.0);
  Eigen::MatrixXd src(10, 5);
  for (int i = 0; i < src.size(); ++i) src.data()[i] = v(rng);
  oracle::Grid g(10, std::vector<long double>(5));
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 5; ++c) g[r][c] = src(r, c);

  for (auto [rows, cols] : {std::pair{7, 3}, std::pair{4, 4}, std::pair{13, 9}}) {
    const auto ours = resample_bicubic(src, rows, cols);
    const auto ref = oracle::bicubic(g, rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) CHECK(std::abs(ours(r, c) - double(ref[r][c])) <= 1e-9);
  }
}

TEST_CASE("resampler is generic over the scalar type") {
  Eigen::Matrix<float, 10, 5> src = Eigen::Matrix<float, 10, 5>::Constant(3.0f);
  const auto out = resample_bicubic(src, 4, 5);
  static_assert(std::is_same_v<std::decay_t<decltype(out(0, 0))>, float>);
  CHECK(std::abs(out(1, 1) - 3.0f) < 1e-5f);
}

TEST_CASE("random frames: oracle equivalence and range safety") {
  std::mt19937_64 rng(20240601);
  for (int i = 0; i < 100; ++i) {
    const auto f = frame_of(random_valid_cells(rng));
    REQUIRE(is_valid_frame(f));
    const auto p = resample_bicubic(f);
    CHECK((p.cells - oracle_pattern(f.cells)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(p.cells.minCoeff() >= 0.0);
    CHECK(p.cells.maxCoeff() <= 1.0);
  }
}

TEST_CASE("pattern levels") {
  ElectrodePattern p;
  CHECK(pattern_to_levels(p).isZero());
  p.cells.setConstant(1.0);
  CHECK((pattern_to_levels(p).array() == 255).all());
  p.cells.setConstant(0.5);
  CHECK((pattern_to_levels(p).array() == 128).all());

  // Monotone in intensity.
  int prev = 0;
  for (int k = 0; k <= 1000; ++k) {
    p.cells(0, 0) = k / 1000.0;
    const int level = pattern_to_levels(p)(0, 0);
    CHECK(level >= prev);
    prev = level;
  }
}

TEST_CASE("zero frame stays zero end to end") {
  const auto p = resample_bicubic(frame_of(TactileGrid::Zero()));
  CHECK(p.cells.isZero());
  CHECK(pattern_to_levels(p).isZero());
}
