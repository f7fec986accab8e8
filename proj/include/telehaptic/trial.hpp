#pragma once

#include "telehaptic/policy.hpp"
#include "telehaptic/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace telehaptic {

inline constexpr int kLogFormatVersion = 1;
inline constexpr const char* kBuildVersion = "0.1.0";

struct Metrics {
  std::vector<double> dispensed_ml;  // final volume per tube
  double relative_error = 0.0;       // against the target tube
  double task_time_s = 0.0;
  int squeeze_count = 0;
  double spill_ml = 0.0;
  bool complete = false;  // false marks partial metrics (timeout or incomplete log)
  bool dropped = false;

  bool operator==(const Metrics&) const = default;
};

void to_json(nlohmann::json& j, const Metrics& m);
void from_json(const nlohmann::json& j, Metrics& m);

/// Metrics from a final ledger. `done_us` is empty when the trial timed out,
/// in which case task time runs to `end_us`.
Metrics metrics_from(const ScenarioSpec& spec, const LiquidLedger& ledger, bool dropped,
                     std::optional<std::uint64_t> done_us, std::uint64_t end_us, int squeeze_count);

/// Counts squeezes as onsets of a decreasing gripper command.
class SqueezeCounter {
 public:
  void observe(std::uint16_t opening_permille);
  int count() const { return count_; }

 private:
  std::optional<std::uint16_t> last_;
  bool closing_ = false;
  int count_ = 0;
};

/// Ordered JSON records; serialised as one compact object per line.
struct TrialLog {
  std::vector<nlohmann::json> records;

  std::string to_jsonl() const;
  void write(std::ostream& out) const;
  static TrialLog parse(std::istream& in);
  static TrialLog load(const std::string& path);

  const nlohmann::json& header() const;
  /// The single metrics block; throws ReplayIncompatible if there is not exactly one.
  const nlohmann::json& metrics_block() const;
};

/// Scene for one trial: the nominal scene with this seed's pipette diameter.
SceneConfig realize_scene(const ScenarioSpec& spec);

enum class PolicyKind { Scripted, Oracle };

struct TrialOptions {
  PolicyKind policy = PolicyKind::Scripted;
  bool record = true;  // keep the full log; metrics are produced either way
};

struct TrialResult {
  Metrics metrics;
  SceneState final_state;
  TrialLog log;  // empty unless recorded
};

TrialResult run_trial(const ScenarioSpec& spec, FeedbackCondition condition, TrialOptions options = {});

/// Recomputes metrics from a log alone (final ledger, completion and gripper commands).
Metrics compute_metrics(const TrialLog& log, const ScenarioSpec& spec);

struct ReplayReport {
  SceneState final_state;
  Metrics metrics;
  std::uint64_t commands_replayed = 0;
  std::uint64_t sequence_gaps = 0;  // missing master-to-slave records
  bool state_matches = false;       // digest equals the logged final state
  bool metrics_match = false;
  std::vector<std::string> divergences;

  bool ok() const { return divergences.empty(); }
};

/// Feeds the logged master-to-slave stream into a fresh slave and compares the
/// outcome with the logged final state and metrics. Throws ReplayIncompatible
/// on a format or build mismatch.
ReplayReport replay(const TrialLog& log);

struct BenchRow {
  FeedbackCondition condition;
  int trials = 0;
  double mean_error = 0.0;
  double sd_error = 0.0;
  double mean_time_s = 0.0;
  double sd_time_s = 0.0;
  int incomplete = 0;
};

/// Runs seeds base_seed .. base_seed + trials - 1 under every condition.
std::vector<BenchRow> bench(const ScenarioSpec& spec, int trials, std::uint64_t base_seed);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace telehaptic
