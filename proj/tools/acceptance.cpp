// Headless acceptance run: one PASS/FAIL line per primary criterion, exit
// status nonzero if any fails. Uses only the in-process loopback transport.
#include "oracles.hpp"

#include "telehaptic/endpoints.hpp"
#include "telehaptic/haptic.hpp"
#include "telehaptic/protocol.hpp"
#include "telehaptic/sim.hpp"
#include "telehaptic/tactile.hpp"
#include "telehaptic/trial.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace telehaptic;
using Eigen::Vector3d;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int g_failed = 0;

void report(const char* name, const std::function<Outcome()>& check, double budget_s = 0.0) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0 && secs >= budget_s) {
    o.pass = false;
    o.detail += fmt("; over the %.0f s budget", budget_s);
  }
  g_failed += !o.pass;
  std::printf("[%s] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

// ---- bicubic ---------------------------------------------------------------

double pattern_error(const TactileGrid& cells) {
  oracle::Grid g(kSensorRows, std::vector<long double>(kSensorCols));
  for (int r = 0; r < kSensorRows; ++r)
    for (int c = 0; c < kSensorCols; ++c) g[r][c] = cells(r, c);
  const auto ref = oracle::bicubic(g, kElectrodeRows, kElectrodeCols);
  TactileFrame f;
  f.cells = cells;
  const auto p = resample_bicubic(f);
  double worst = 0.0;
  for (int r = 0; r < kElectrodeRows; ++r)
    for (int c = 0; c < kElectrodeCols; ++c) {
      const double want = double(std::clamp<long double>(ref[r][c], 0.0L, 9.0L) / 9.0L);
      worst = std::max(worst, std::abs(p.cells(r, c) - want));
    }
  return worst;
}

Outcome bicubic_oracle() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> force(0.0, 12.0);
  double worst = 0.0;
  int frames = 0;
  for (int i = 0; i < 100; ++i, ++frames) {
    TactileGrid raw;
    for (int k = 0; k < raw.size(); ++k) raw.data()[k] = force(rng);
    worst = std::max(worst, pattern_error(clamp_sensor(Finger::Left, raw, 0).cells));
  }
  for (double v : {0.0, 1.0, 4.5, 9.0}) {
    worst = std::max(worst, pattern_error(TactileGrid::Constant(v)));
    ++frames;
  }
  TactileGrid ramp_rows, ramp_cols;
  for (int r = 0; r < kSensorRows; ++r)
    for (int c = 0; c < kSensorCols; ++c) {
      ramp_rows(r, c) = 1.0 + 8.0 * r / (kSensorRows - 1);
      ramp_cols(r, c) = 1.0 + 2.0 * c;
    }
  worst = std::max({worst, pattern_error(ramp_rows), pattern_error(ramp_cols)});
  frames += 2;
  return {worst <= 1e-9, fmt("max deviation %.2e over %d frames", worst, frames)};
}

// ---- force law -------------------------------------------------------------

Outcome force_law() {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> unit(0.0, 1.0), cell(1.0, 9.0);
  std::bernoulli_distribution on(0.6);
  auto grip = [](std::optional<double> contact, double current) {
    GripperState g;
    g.p_contact = contact;
    g.p_current = current;
    g.commanded_opening = current;
    return g;
  };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    TactileFrame l, r;
    l.finger = Finger::Left;
    r.finger = Finger::Right;
    std::vector<double> all;
    for (auto* f : {&l, &r})
      for (int k = 0; k < f->cells.size(); ++k) {
        f->cells.data()[k] = on(rng) ? cell(rng) : 0.0;
        all.push_back(f->cells.data()[k]);
      }
    const double contact = unit(rng), current = unit(rng);
    const long double diff = contact > current ? contact - current : 0.0L;
    const long double want = std::clamp<long double>(oracle::sum(all) / 100.0L * diff, 0.0L, 8.0L);
    worst = std::max(worst, std::abs(kinesthetic_force(l, r, grip(contact, current)).magnitude_n - double(want)));
  }
  TactileFrame full, half;
  full.cells.setConstant(9.0);
  half.cells.setConstant(4.0);
  full.finger = half.finger = Finger::Left;
  auto right = [](TactileFrame f) { f.finger = Finger::Right; return f; };
  const bool zero_contact = kinesthetic_force(full, right(full), grip(std::nullopt, 0.2)).magnitude_n == 0.0 &&
                            kinesthetic_force(full, right(full), grip(0.3, 0.3)).magnitude_n == 0.0 &&
                            kinesthetic_force(full, right(full), grip(0.3, 0.5)).magnitude_n == 0.0;
  // Mean 9 N, so the ceiling is reached exactly at 8/9 of full travel.
  const bool saturation = kinesthetic_force(full, right(full), grip(1.0, 0.0)).magnitude_n == 8.0 &&
                          kinesthetic_force(half, right(half), grip(0.5, 0.25)).magnitude_n == 1.0 &&
                          kinesthetic_force(full, right(full), grip(0.75, 0.0)).magnitude_n == 6.75;
  return {worst <= 1e-12 && zero_contact && saturation,
          fmt("max deviation %.2e over 1000 inputs; zero-contact %s, boundaries %s", worst,
              zero_contact ? "exact" : "WRONG", saturation ? "exact" : "WRONG")};
}

// ---- conservation ----------------------------------------------------------

Outcome conservation() {
  SceneConfig cfg;
  const std::vector<Vector3d> anchors = {cfg.geometry.rack_grasp_point_mm, {300.0, -100.0, 125.0},
                                         {300.0, 40.0, 150.0}, {300.0, 80.0, 150.0}, {200.0, 0.0, 250.0}};
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.5);
  SceneState s = initial_state(cfg);
  const double total = s.ledger.total();
  double worst = 0.0;
  int transfers = 0;
  std::vector<SceneEvent> events;
  Vector3d goal = anchors[0];
  double opening = 1.0;
  for (int i = 0; i < 10000; ++i) {
    if (i % 150 == 0) {
      goal = anchors[pick(rng)] + Vector3d(jitter(rng), jitter(rng), jitter(rng));
      if (s.dropped) s.dropped = false;
    }
    if (i % 37 == 0) opening = unit(rng) < 0.8 ? 0.16 * unit(rng) : unit(rng);
    ActuatorCommand cmd;
    cmd.gripper_opening = opening;
    cmd.velocity.head<3>() = ((goal - s.robot.position_mm) * 8.0).cwiseMax(-300.0).cwiseMin(300.0);
    events.clear();
    s = tick(s, cmd, 1.0 / 125.0, cfg, &events);
    for (const auto& e : events) transfers += e.code == EventCode::LiquidTransfer;
    worst = std::max(worst, std::abs(s.ledger.total() - total));
  }
  return {worst <= 1e-9 && transfers > 0, fmt("drift %.2e ml over 10000 ticks, %d transfers", worst, transfers)};
}

// ---- protocol --------------------------------------------------------------

wire::WireMessage random_message(std::mt19937_64& rng, int type) {
  auto u16 = [&] { return static_cast<std::uint16_t>(rng()); };
  auto pose = [&] {
    wire::QuantizedPose p;
    for (auto& v : p) v = static_cast<std::int32_t>(rng());
    return p;
  };
  wire::WireMessage m;
  m.seq = static_cast<std::uint32_t>(rng());
  m.sim_timestamp_us = rng();
  switch (type) {
    case 0: m.payload = wire::TcpCommand{pose()}; break;
    case 1: m.payload = wire::GripperCommand{u16()}; break;
    case 2: m.payload = wire::RobotState{pose(), u16(), u16()}; break;
    case 3: {
      wire::TactileFrameMsg t;
      t.finger = (rng() & 1) ? Finger::Right : Finger::Left;
      for (auto& v : t.centinewtons) v = u16();
      m.payload = t;
      break;
    }
    case 4: m.payload = wire::ForceFeedback{static_cast<std::uint32_t>(rng())}; break;
    case 5:
      m.payload = wire::SceneEventMsg{static_cast<std::uint8_t>(rng()), static_cast<std::int64_t>(rng()),
                                      static_cast<std::uint8_t>(rng())};
      break;
    default: m.payload = wire::ConfigSet{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
  }
  return m;
}

Outcome protocol() {
  std::mt19937_64 rng(20240607);
  int roundtrip_bad = 0, crc_bad = 0;
  for (int type = 0; type < 7; ++type) {
    for (int i = 0; i < 10000; ++i) {
      const auto m = random_message(rng, type);
      const auto bytes = encode(m);
      const std::uint32_t trailer = bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
                                    (bytes[bytes.size() - 2] << 16) | (std::uint32_t(bytes.back()) << 24);
      crc_bad += trailer != oracle::crc32(bytes.data(), bytes.size() - 4);
      const auto res = wire::decode(bytes);
      roundtrip_bad += !(res.status == wire::DecodeStatus::Ok && res.consumed == bytes.size() && *res.message == m);
    }
  }
  int flips = 0, missed = 0;
  for (int type = 0; type < 7; ++type) {
    for (int rep = 0; rep < 4; ++rep) {
      const auto clean = encode(random_message(rng, type));
      for (std::size_t bit = 0; bit < clean.size() * 8; ++bit, ++flips) {
        auto bad = clean;
        bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        missed += wire::decode(bad).status == wire::DecodeStatus::Ok;
      }
    }
  }
  int resync_bad = 0, resync_cases = 0;
  for (std::size_t victim : {0u, 3u, 9u}) {
    for (std::size_t offset : {0u, 1u, 5u, 18u, 30u}) {
      ++resync_cases;
      std::vector<wire::WireMessage> sent, expected;
      std::vector<std::uint8_t> stream;
      for (int i = 0; i < 10; ++i) {
        sent.push_back(random_message(rng, i % 7));
        auto f = encode(sent.back());
        if (std::size_t(i) == victim) f[std::min(offset, f.size() - 1)] ^= 0x04;
        else expected.push_back(sent.back());
        stream.insert(stream.end(), f.begin(), f.end());
      }
      wire::StreamDecoder dec;
      dec.feed(stream);
      std::vector<wire::WireMessage> got;
      int errors = 0;
      while (auto r = dec.next()) {
        if (r->status == wire::DecodeStatus::Ok) got.push_back(*r->message);
        else ++errors;
      }
      resync_bad += !(errors == 1 && got == expected);
    }
  }
  return {roundtrip_bad == 0 && crc_bad == 0 && missed == 0 && resync_bad == 0,
          fmt("70000 roundtrips (%d bad, %d CRC mismatches), %d/%d bit flips caught, %d/%d resyncs clean",
              roundtrip_bad, crc_bad, flips - missed, flips, resync_cases - resync_bad, resync_cases)};
}

// ---- rates and twin --------------------------------------------------------

struct Link {
  std::unique_ptr<SlaveEndpoint> slave;
  std::unique_ptr<MasterEndpoint> master;
  Link(const SceneConfig& cfg, const SceneState& s0) {
    auto [a, b] = make_loopback_pair();
    slave = std::make_unique<SlaveEndpoint>(cfg, s0, std::move(a));
    MasterOptions mo;
    mo.home = s0.robot;
    master = std::make_unique<MasterEndpoint>(mo, std::move(b));
  }
};

Outcome rates_and_twin() {
  SceneConfig cfg;
  Link link(cfg, initial_state(cfg));
  std::array<std::uint64_t, 2> tactile{};
  std::uint64_t state = 0;
  link.slave->set_observer([&](Direction, const wire::WireMessage& m) {
    if (const auto* t = std::get_if<wire::TactileFrameMsg>(&m.payload)) ++tactile[static_cast<int>(t->finger)];
    state += std::holds_alternative<wire::RobotState>(m.payload);
  });
  co_simulate(*link.slave, *link.master, 10'000'000);
  auto within = [](std::uint64_t n, std::uint64_t want) { return n + 1 >= want && n <= want + 1; };
  const bool rates_ok = within(tactile[0], 1200) && within(tactile[1], 1200) && within(state, 500);

  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> coord(-250.0, 250.0);
  double worst = 0.0;
  for (int i = 0; i < 25; ++i) {
    SceneState s0 = initial_state(cfg);
    s0.robot.position_mm = Vector3d(coord(rng), coord(rng), coord(rng) * 0.5 + 200.0);
    Link l(cfg, s0);
    co_simulate(*l.slave, *l.master, 500'000);
    if (!l.master->twin().valid) worst = 1e9;
    worst = std::max(worst, (l.master->twin().pose.position_mm - l.slave->state().robot.position_mm).norm());
  }
  return {rates_ok && worst <= 0.1,
          fmt("tactile %llu/%llu, state %llu in 10 s; twin error %.4f mm over 25 poses",
              (unsigned long long)tactile[0], (unsigned long long)tactile[1], (unsigned long long)state, worst)};
}

// ---- footprint progression -------------------------------------------------

Outcome footprint_progression() {
  SceneConfig cfg;
  bool monotone = true;
  TactileGrid prev = TactileGrid::Zero();
  std::string counts;
  for (double c : {0.05, 0.25, 0.5, 0.75, 1.0}) {
    SceneState s = initial_state(cfg);
    s.grasped = true;
    s.robot.position_mm = cfg.geometry.rack_grasp_point_mm;
    s.gripper.p_current = opening_for_compression(c, cfg.pipette, cfg.gripper);
    s.gripper.commanded_opening = s.gripper.p_current;
    s.pipette.compression = c;
    const auto cells = synthesize_tactile(s, cfg).first.cells;
    const auto nz = (cells.array() > 0.0).count();
    monotone &= nz >= (prev.array() > 0.0).count() && (cells.array() >= prev.array()).all();
    counts += (counts.empty() ? "" : "/") + std::to_string(nz);
    prev = cells;
  }
  const bool centre = prev.col(kSensorCols / 2).segment(cfg.pipette.body_first_row,
                                                         cfg.pipette.body_last_row - cfg.pipette.body_first_row + 1)
                          .isConstant(9.0);
  return {monotone && centre, fmt("nonzero cells %s, %s; centre column at 9 N when fully squeezed: %s",
                                  counts.c_str(), monotone ? "nondecreasing" : "NOT monotone",
                                  centre ? "yes" : "no")};
}

// ---- dosing, ablation, determinism ------------------------------------------

std::vector<BenchRow> g_rows;
double g_vfe_seconds = 0.0;

const BenchRow& row(FeedbackCondition c) {
  for (const auto& r : g_rows)
    if (r.condition == c) return r;
  throw std::runtime_error("missing bench row");
}

Outcome dosing() {
  // One pass over every condition; the timing covers all four, VFE included.
  const auto t0 = std::chrono::steady_clock::now();
  g_rows = bench(ScenarioSpec{}, 20, 1);
  g_vfe_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const BenchRow& vfe = row(FeedbackCondition::VFE);
  return {vfe.mean_error <= 0.09 && vfe.incomplete == 0 && g_vfe_seconds < 60.0,
          fmt("VFE mean error %.2f%% of 2 ml over 20 seeds (limit 9%%), %d incomplete; all four conditions in %.1f s",
              100.0 * vfe.mean_error, vfe.incomplete, g_vfe_seconds)};
}

Outcome ablation() {
  const auto &v = row(FeedbackCondition::V), &vf = row(FeedbackCondition::VF), &ve = row(FeedbackCondition::VE),
             &vfe = row(FeedbackCondition::VFE);
  const bool order = vfe.mean_error <= ve.mean_error && ve.mean_error <= v.mean_error &&
                     vfe.mean_error <= vf.mean_error && vf.mean_error <= v.mean_error;
  const bool faster = vfe.mean_time_s < v.mean_time_s;
  return {order && faster, fmt("error V %.4f, VF %.4f, VE %.4f, VFE %.4f; time V %.1f s, VFE %.1f s", v.mean_error,
                               vf.mean_error, ve.mean_error, vfe.mean_error, v.mean_time_s, vfe.mean_time_s)};
}

Outcome determinism() {
  ScenarioSpec spec;
  spec.seed = 7;
  const auto a = run_trial(spec, FeedbackCondition::VFE);
  const auto b = run_trial(spec, FeedbackCondition::VFE);
  const std::string la = a.log.to_jsonl(), lb = b.log.to_jsonl();
  std::istringstream in(la);
  const ReplayReport rep = replay(TrialLog::parse(in));
  const bool ok = la == lb && rep.ok() && rep.metrics == a.metrics && rep.state_matches;
  return {ok, fmt("two runs of seed 7 %s (%zu bytes); replay %s, metrics %s", la == lb ? "byte-identical" : "DIFFER",
                  la.size(), rep.ok() ? "clean" : "diverged", rep.metrics == a.metrics ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  report("Bicubic oracle equivalence", bicubic_oracle, 1.0);
  report("Grasp force law exactness", force_law);
  report("Liquid conservation", conservation, 5.0);
  report("Protocol roundtrip, CRC and resync", protocol);
  report("Stream rates and twin precision", rates_and_twin, 2.0);
  report("Tactile footprint progression", footprint_progression);
  report("Dosing benchmark (VFE, 20 seeds)", dosing);
  report("Ablation direction (error and time)", ablation);
  report("Determinism and replay", determinism);
  std::printf("%s: %d of 9 criteria failed\n", g_failed ? "FAIL" : "PASS", g_failed);
  return g_failed ? 1 : 0;
}
