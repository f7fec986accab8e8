#include "doctest.h"
#include "oracles.hpp"

#include "telehaptic/errors.hpp"
#include "telehaptic/haptic.hpp"

#include <random>

using namespace telehaptic;

namespace {

TactileFrame constant_frame(Finger f, double v, std::uint64_t ts = 5) {
  TactileFrame frame;
  frame.finger = f;
  frame.cells.setConstant(v);
  frame.timestamp_us = ts;
  return frame;
}

GripperState grip(std::optional<double> contact, double current) {
  GripperState g;
  g.p_contact = contact;
  g.p_current = current;
  g.commanded_opening = current;
  return g;
}

std::vector<double> cells_of(const TactileFrame& l, const TactileFrame& r) {
  std::vector<double> out(l.cells.data(), l.cells.data() + l.cells.size());
  out.insert(out.end(), r.cells.data(), r.cells.data() + r.cells.size());
  return out;
}

// Valid cells: 0 or a value in [1, 9].
void randomize(TactileFrame& f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> v(1.0, 9.0);
  std::bernoulli_distribution on(0.6);
  for (int i = 0; i < f.cells.size(); ++i) f.cells.data()[i] = on(rng) ? v(rng) : 0.0;
}

}  // namespace

TEST_CASE("zero tactile input renders no force") {
  const auto l = constant_frame(Finger::Left, 0.0);
  const auto r = constant_frame(Finger::Right, 0.0);
  CHECK(kinesthetic_force(l, r, grip(0.7, 0.1)).magnitude_n == 0.0);
}

TEST_CASE("uniform 4 N with quarter squeeze gives 1 N") {
  const auto l = constant_frame(Finger::Left, 4.0);
  const auto r = constant_frame(Finger::Right, 4.0);
  const auto f = kinesthetic_force(l, r, grip(0.5, 0.25));
  CHECK(f.magnitude_n == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f.timestamp_us == 5);
}

TEST_CASE("seeded frames summing to 250 N") {
  // 25 pairs of cells (5 + d, 5 - d) with d in [0, 4] keep every cell valid.
  std::mt19937_64 rng(250);
  std::uniform_real_distribution<double> d(0.0, 4.0);
  auto l = constant_frame(Finger::Left, 0.0);
  auto r = constant_frame(Finger::Right, 0.0);
  std::vector<int> slots(100);
  for (int i = 0; i < 100; ++i) slots[i] = i;
  std::shuffle(slots.begin(), slots.end(), rng);
  auto cell = [&](int idx) -> double& {
    return idx < 50 ? l.cells.data()[idx] : r.cells.data()[idx - 50];
  };
  for (int p = 0; p < 25; ++p) {
    const double delta = d(rng);
    cell(slots[2 * p]) = 5.0 + delta;
    cell(slots[2 * p + 1]) = 5.0 - delta;
  }
  const long double total = oracle::sum(cells_of(l, r));
  REQUIRE(std::abs(double(total) - 250.0) < 1e-12);
  const auto f = kinesthetic_force(l, r, grip(0.8, 0.3));
  CHECK(std::abs(f.magnitude_n - 1.25) < 1e-12);
}

TEST_CASE("saturated pads clamp at the device ceiling") {
  const auto l = constant_frame(Finger::Left, 9.0);
  const auto r = constant_frame(Finger::Right, 9.0);
  CHECK(kinesthetic_force(l, r, grip(1.0, 0.0)).magnitude_n == kMaxGraspForceN);
}

TEST_CASE("no recorded contact means no force") {
  const auto l = constant_frame(Finger::Left, 6.0);
  const auto r = constant_frame(Finger::Right, 6.0);
  CHECK(kinesthetic_force(l, r, grip(std::nullopt, 0.1)).magnitude_n == 0.0);
}

TEST_CASE("reopening past the contact point renders no pull") {
  const auto l = constant_frame(Finger::Left, 6.0);
  const auto r = constant_frame(Finger::Right, 6.0);
  CHECK(kinesthetic_force(l, r, grip(0.3, 0.5)).magnitude_n == 0.0);
}

TEST_CASE("mismatched frame timestamps are a sync error") {
  const auto l = constant_frame(Finger::Left, 2.0, 100);
  const auto r = constant_frame(Finger::Right, 2.0, 101);
  CHECK_THROWS_AS(kinesthetic_force(l, r, grip(0.5, 0.4)), FrameSyncError);
}

TEST_CASE("random inputs: exact formula, monotonicity, homogeneity, bounds") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    auto l = constant_frame(Finger::Left, 0.0);
    auto r = constant_frame(Finger::Right, 0.0);
    randomize(l, rng);
    randomize(r, rng);
    const double contact = unit(rng);
    const double current = unit(rng);
    const auto f = kinesthetic_force(l, r, grip(contact, current));

    const long double mean = oracle::sum(cells_of(l, r)) / 100.0L;
    const long double diff = contact > current ? contact - current : 0.0L;
    const long double expected = std::clamp<long double>(mean * diff, 0.0L, 8.0L);
    CHECK(std::abs(f.magnitude_n - double(expected)) <= 1e-12);
    CHECK(f.magnitude_n >= 0.0);
    CHECK(f.magnitude_n <= kMaxGraspForceN);

    // Opening further never increases the force.
    const double wider = current + (1.0 - current) * unit(rng);
    CHECK(kinesthetic_force(l, r, grip(contact, wider)).magnitude_n <= f.magnitude_n);

    // Scaling every cell scales the unclamped force.
    const double k = 0.5 * unit(rng);
    auto ls = l, rs = r;
    ls.cells *= k;
    rs.cells *= k;
    const double raw = double(mean * diff);
    if (raw * k < kMaxGraspForceN) {
      CHECK(kinesthetic_force(ls, rs, grip(contact, current)).magnitude_n ==
            doctest::Approx(raw * k).epsilon(1e-12));
    }
  }
}
