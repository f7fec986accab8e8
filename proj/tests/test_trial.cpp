#include "doctest.h"

#include "telehaptic/errors.hpp"
#include "telehaptic/trial.hpp"

#include <cmath>
#include <map>
#include <sstream>

using namespace telehaptic;
using nlohmann::json;

namespace {

LiquidLedger ledger_with_tube(double ml) {
  LiquidLedger l;
  l.tube_ml = {ml, 0.0};
  return l;
}

TrialLog reparse(const TrialLog& log) {
  std::istringstream in(log.to_jsonl());
  return TrialLog::parse(in);
}

// One recorded trial shared by the log and replay cases.
const TrialResult& seed7() {
  static const TrialResult r = [] {
    ScenarioSpec spec;
    spec.seed = 7;
    return run_trial(spec, FeedbackCondition::VFE);
  }();
  return r;
}

}  // namespace

TEST_CASE("relative error arithmetic") {
  const ScenarioSpec spec;
  CHECK(metrics_from(spec, ledger_with_tube(2.07), false, 1'000'000, 1'000'000, 1).relative_error ==
        doctest::Approx(0.035).epsilon(1e-12));
  CHECK(metrics_from(spec, ledger_with_tube(2.0), false, 1'000'000, 1'000'000, 1).relative_error == 0.0);
  CHECK(metrics_from(spec, ledger_with_tube(1.8), false, 1'000'000, 1'000'000, 1).relative_error ==
        doctest::Approx(0.10).epsilon(1e-12));

  const Metrics timed_out = metrics_from(spec, ledger_with_tube(0.5), false, std::nullopt, 600'000'000, 2);
  CHECK_FALSE(timed_out.complete);
  CHECK(timed_out.task_time_s == 600.0);
  CHECK(metrics_from(spec, ledger_with_tube(2.0), true, 5'000'000, 5'000'000, 1).complete == false);
}

TEST_CASE("squeezes are counted at closing onsets") {
  SqueezeCounter n;
  for (std::uint16_t v : {1000, 1000, 900, 800, 800, 700, 750, 900, 600, 500, 500, 1000}) n.observe(v);
  CHECK(n.count() == 2);
}

TEST_CASE("oracle policy doses within 2 percent") {
  ScenarioSpec spec;
  const SceneConfig cfg = realize_scene(spec);
  const SceneState s0 = initial_state(cfg);
  const TrialResult r = run_trial(spec, FeedbackCondition::V, {PolicyKind::Oracle, false});
  CHECK(r.metrics.complete);
  CHECK(r.metrics.relative_error <= 0.02);
  CHECK(r.metrics.task_time_s > 0.0);
  CHECK(r.metrics.spill_ml == 0.0);
  CHECK(r.final_state.ledger.total() == doctest::Approx(s0.ledger.total()).epsilon(1e-12));
  CHECK(r.log.records.empty());
}

TEST_CASE("realised pipette varies with the seed only") {
  ScenarioSpec a, b;
  a.seed = b.seed = 3;
  CHECK(realize_scene(a).pipette.outer_diameter_mm == realize_scene(b).pipette.outer_diameter_mm);
  b.seed = 4;
  CHECK(realize_scene(a).pipette.outer_diameter_mm != realize_scene(b).pipette.outer_diameter_mm);
  a.pipette_diameter_sd_mm = 0.0;
  CHECK(realize_scene(a).pipette.outer_diameter_mm == a.scene.pipette.outer_diameter_mm);
  for (std::uint64_t s = 0; s < 200; ++s) {
    a.pipette_diameter_sd_mm = 5.0;
    a.seed = s;
    const double d = realize_scene(a).pipette.outer_diameter_mm;
    CHECK(std::abs(d - 12.0) <= 1.5);
  }
}

TEST_CASE("trial log structure") {
  const TrialLog& log = seed7().log;
  REQUIRE(log.records.size() > 10);
  const json& header = log.header();
  CHECK(header["format_version"] == kLogFormatVersion);
  CHECK(header["condition"] == "vfe");
  CHECK(header["spec_hash"] == spec_hash(header["spec"].get<ScenarioSpec>()));

  std::uint64_t last_t = 0;
  int metrics_blocks = 0;
  std::map<std::string, std::int64_t> next_seq{{"m2s", 0}, {"s2m", 0}};
  for (const auto& r : log.records) {
    const std::uint64_t t = r["t"];
    CHECK(t >= last_t);
    last_t = t;
    metrics_blocks += r["type"] == "metrics";
    if (r["type"] == "msg") {
      // Every message appears once, in order.
      const std::string dir = r["dir"];
      CHECK(r["seq"].get<std::int64_t>() == next_seq[dir]);
      ++next_seq[dir];
    }
  }
  CHECK(metrics_blocks == 1);
  CHECK(log.records.back()["type"] == "metrics");
  CHECK(next_seq["m2s"] > 1000);
  CHECK(next_seq["s2m"] > 1000);
}

TEST_CASE("logged metrics agree with the ledger") {
  const TrialResult& r = seed7();
  const Metrics logged = r.log.metrics_block()["metrics"].get<Metrics>();
  CHECK(logged == r.metrics);
  const ScenarioSpec spec = r.log.header()["spec"].get<ScenarioSpec>();
  CHECK(compute_metrics(r.log, spec) == r.metrics);
  const double tube = r.final_state.ledger.tube_ml[0];
  CHECK(logged.relative_error == std::abs(tube - spec.target_volume_ml) / spec.target_volume_ml);
  CHECK(logged.complete);
  CHECK(logged.squeeze_count >= 2);
}

TEST_CASE("runs are byte-identical") {
  ScenarioSpec spec;
  spec.seed = 7;
  const std::string again = run_trial(spec, FeedbackCondition::VFE).log.to_jsonl();
  CHECK(again == seed7().log.to_jsonl());
}

TEST_CASE("replay reproduces the final state and metrics") {
  const TrialLog log = reparse(seed7().log);
  const ReplayReport report = replay(log);
  CHECK(report.ok());
  CHECK(report.state_matches);
  CHECK(report.metrics_match);
  CHECK(report.sequence_gaps == 0);
  CHECK(report.metrics == seed7().metrics);
  CHECK(report.final_state.ledger.tube_ml == seed7().final_state.ledger.tube_ml);
  CHECK(state_digest(report.final_state) == state_digest(seed7().final_state));
}

TEST_CASE("a deleted command record is reported") {
  TrialLog log = reparse(seed7().log);
  // Remove a gripper command in the middle of the trial.
  std::size_t victim = 0;
  int seen = 0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (log.records[i].value("kind", "") == "gripper_command" && ++seen == 40) victim = i;
  }
  REQUIRE(victim > 0);
  log.records.erase(log.records.begin() + static_cast<std::ptrdiff_t>(victim));
  const ReplayReport report = replay(log);
  CHECK_FALSE(report.ok());
  CHECK(report.sequence_gaps == 1);
}

TEST_CASE("replay refuses incompatible logs") {
  TrialLog log = reparse(seed7().log);
  log.records.front()["format_version"] = kLogFormatVersion + 1;
  CHECK_THROWS_AS(replay(log), ReplayIncompatible);

  TrialLog other_build = reparse(seed7().log);
  other_build.records.front()["build_version"] = "0.0.0-other";
  CHECK_THROWS_AS(replay(other_build), ReplayIncompatible);

  TrialLog headless = reparse(seed7().log);
  headless.records.erase(headless.records.begin());
  CHECK_THROWS_AS(replay(headless), ReplayIncompatible);

  TrialLog doubled = reparse(seed7().log);
  doubled.records.push_back(doubled.records.back());
  CHECK_THROWS_AS(doubled.metrics_block(), ReplayIncompatible);

  std::istringstream garbage("{\"type\":\"header\"}\nnot json\n");
  CHECK_THROWS_AS(TrialLog::parse(garbage), ReplayIncompatible);
}

TEST_CASE("timeout yields partial metrics") {
  ScenarioSpec spec;
  spec.timeout_s = 5.0;
  const TrialResult r = run_trial(spec, FeedbackCondition::VF);
  CHECK_FALSE(r.metrics.complete);
  CHECK(r.metrics.task_time_s == doctest::Approx(5.0).epsilon(1e-3));
  bool saw_timeout = false;
  for (const auto& rec : r.log.records) saw_timeout |= rec["type"] == "timeout";
  CHECK(saw_timeout);
  CHECK(replay(r.log).ok());
}

TEST_CASE("bench emits one row per condition") {
  const auto rows = bench(ScenarioSpec{}, 2, 1);
  REQUIRE(rows.size() == 4);
  const std::string csv = bench_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "condition,trials,mean_error,sd_error,mean_time_s,sd_time_s");
  int n = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
    ++n;
  }
  CHECK(n == 4);
  for (const auto& r : rows) {
    CHECK(r.trials == 2);
    CHECK(r.mean_error >= 0.0);
    CHECK(r.mean_time_s > 0.0);
  }
  CHECK_THROWS_AS(bench(ScenarioSpec{}, 0, 1), ConfigError);
}
