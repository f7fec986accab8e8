#include "telehaptic/trial.hpp"

#include "telehaptic/endpoints.hpp"
#include "telehaptic/errors.hpp"
#include "telehaptic/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace telehaptic {

using nlohmann::json;

void to_json(json& j, const Metrics& m) {
  j = json{{"dispensed_ml", m.dispensed_ml}, {"relative_error", m.relative_error},
           {"task_time_s", m.task_time_s},   {"squeeze_count", m.squeeze_count},
           {"spill_ml", m.spill_ml},         {"complete", m.complete},
           {"dropped", m.dropped}};
}

void from_json(const json& j, Metrics& m) {
  j.at("dispensed_ml").get_to(m.dispensed_ml);
  j.at("relative_error").get_to(m.relative_error);
  j.at("task_time_s").get_to(m.task_time_s);
  j.at("squeeze_count").get_to(m.squeeze_count);
  j.at("spill_ml").get_to(m.spill_ml);
  j.at("complete").get_to(m.complete);
  j.at("dropped").get_to(m.dropped);
}

Metrics metrics_from(const ScenarioSpec& spec, const LiquidLedger& ledger, bool dropped,
                     std::optional<std::uint64_t> done_us, std::uint64_t end_us, int squeeze_count) {
  Metrics m;
  m.dispensed_ml = ledger.tube_ml;
  const double dispensed = ledger.tube_ml.at(static_cast<std::size_t>(spec.target_tube));
  m.relative_error = std::abs(dispensed - spec.target_volume_ml) / spec.target_volume_ml;
  m.task_time_s = static_cast<double>(done_us.value_or(end_us)) / 1e6;
  m.squeeze_count = squeeze_count;
  m.spill_ml = ledger.spill_ml;
  m.complete = done_us.has_value() && !dropped;
  m.dropped = dropped;
  return m;
}

void SqueezeCounter::observe(std::uint16_t opening) {
  if (last_) {
    if (opening < *last_) {
      if (!closing_) ++count_;
      closing_ = true;
    } else if (opening > *last_) {
      closing_ = false;
    }
  }
  last_ = opening;
}

// ---------------------------------------------------------------------------
// Log records

namespace {

json pose_json(const wire::QuantizedPose& p) { return json(std::vector<std::int32_t>(p.begin(), p.end())); }

wire::QuantizedPose pose_from(const json& j) {
  wire::QuantizedPose p{};
  if (!j.is_array() || j.size() != p.size()) throw ReplayIncompatible("pose must hold 6 integers");
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = j[i].get<std::int32_t>();
  return p;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json message_record(Direction dir, const wire::WireMessage& m) {
  json r{{"type", "msg"},
         {"t", m.sim_timestamp_us},
         {"dir", dir == Direction::MasterToSlave ? "m2s" : "s2m"},
         {"seq", m.seq},
         {"kind", wire::to_string(m.type())}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, wire::TcpCommand>) {
          r["pose"] = pose_json(p.pose);
        } else if constexpr (std::is_same_v<T, wire::GripperCommand>) {
          r["opening_permille"] = p.opening_permille;
        } else if constexpr (std::is_same_v<T, wire::RobotState>) {
          r["pose"] = pose_json(p.pose);
          r["opening_permille"] = p.opening_permille;
          r["contact_permille"] = p.contact_permille;
        } else if constexpr (std::is_same_v<T, wire::TactileFrameMsg>) {
          r["finger"] = static_cast<int>(p.finger);
          const auto* bytes = reinterpret_cast<const std::uint8_t*>(p.centinewtons.data());
          r["digest"] = wire::crc32(std::span(bytes, sizeof p.centinewtons));
          std::uint32_t total = 0;
          for (auto c : p.centinewtons) total += c;
          r["sum_cn"] = total;
        } else if constexpr (std::is_same_v<T, wire::ForceFeedback>) {
          r["millinewtons"] = p.millinewtons;
        } else if constexpr (std::is_same_v<T, wire::SceneEventMsg>) {
          r["code"] = p.event_code;
          r["microliters"] = p.microliters;
          r["location"] = p.location;
        } else if constexpr (std::is_same_v<T, wire::ConfigSet>) {
          r["key"] = p.key;
          r["value"] = p.value;
        }
      },
      m.payload);
  return r;
}

/// Rebuilds a master-to-slave message from its record.
wire::WireMessage command_from(const json& r) {
  wire::WireMessage m;
  m.seq = r.at("seq").get<std::uint32_t>();
  m.sim_timestamp_us = r.at("t").get<std::uint64_t>();
  const std::string kind = r.at("kind").get<std::string>();
  if (kind == wire::to_string(wire::MsgType::TcpCommand)) {
    m.payload = wire::TcpCommand{pose_from(r.at("pose"))};
  } else if (kind == wire::to_string(wire::MsgType::GripperCommand)) {
    m.payload = wire::GripperCommand{r.at("opening_permille").get<std::uint16_t>()};
  } else if (kind == wire::to_string(wire::MsgType::ForceFeedback)) {
    m.payload = wire::ForceFeedback{r.at("millinewtons").get<std::uint32_t>()};
  } else if (kind == wire::to_string(wire::MsgType::ConfigSet)) {
    m.payload = wire::ConfigSet{r.at("key").get<std::uint8_t>(), r.at("value").get<std::uint8_t>()};
  } else {
    throw ReplayIncompatible("unexpected master-to-slave message kind '" + kind + "'");
  }
  return m;
}

json ledger_json(const LiquidLedger& l) {
  return json{{"beaker_ml", l.beaker_ml},
              {"tube_ml", l.tube_ml},
              {"pipette_ml", l.pipette_ml},
              {"spill_ml", l.spill_ml}};
}

LiquidLedger ledger_from(const json& j) {
  LiquidLedger l;
  j.at("beaker_ml").get_to(l.beaker_ml);
  j.at("tube_ml").get_to(l.tube_ml);
  j.at("pipette_ml").get_to(l.pipette_ml);
  j.at("spill_ml").get_to(l.spill_ml);
  return l;
}

const json* find_record(const TrialLog& log, std::string_view type) {
  for (const auto& r : log.records) {
    if (r.value("type", "") == type) return &r;
  }
  return nullptr;
}

SlaveOptions slave_options(const ScenarioSpec& spec) {
  SlaveOptions o;
  o.gains = spec.gains;
  return o;
}

}  // namespace

std::string TrialLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void TrialLog::write(std::ostream& out) const {
  for (const auto& r : records) out << r.dump() << '\n';
}

TrialLog TrialLog::parse(std::istream& in) {
  TrialLog log;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      log.records.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ReplayIncompatible("log line " + std::to_string(n) + ": " + e.what());
    }
  }
  return log;
}

TrialLog TrialLog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open log '" + path + "'");
  return parse(in);
}

const json& TrialLog::header() const {
  if (records.empty() || records.front().value("type", "") != "header") {
    throw ReplayIncompatible("log does not start with a header record");
  }
  return records.front();
}

const json& TrialLog::metrics_block() const {
  const json* found = nullptr;
  for (const auto& r : records) {
    if (r.value("type", "") != "metrics") continue;
    if (found) throw ReplayIncompatible("log holds more than one metrics block");
    found = &r;
  }
  if (!found) throw ReplayIncompatible("log has no metrics block");
  return *found;
}

// ---------------------------------------------------------------------------

SceneConfig realize_scene(const ScenarioSpec& spec) {
  SceneConfig cfg = spec.scene;
  std::seed_seq seq{spec.seed, std::uint64_t{0}};
  std::mt19937_64 rng(seq);
  const double sd = spec.pipette_diameter_sd_mm;
  double jitter = sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0;
  jitter = std::clamp(jitter, -1.5, 1.5);
  auto& p = cfg.pipette;
  p.outer_diameter_mm = std::max(p.outer_diameter_mm + jitter, p.min_squeezed_diameter_mm + 1.0);
  return cfg;
}

TrialResult run_trial(const ScenarioSpec& spec, FeedbackCondition condition, TrialOptions options) {
  validate(spec);
  const SceneConfig cfg = realize_scene(spec);
  const SceneState s0 = initial_state(cfg);

  ScriptedOperator op = options.policy == PolicyKind::Oracle ? ScriptedOperator::oracle(spec, cfg)
                                                             : ScriptedOperator(spec, condition);

  auto [slave_link, master_link] = make_loopback_pair();
  SlaveEndpoint slave(cfg, s0, std::move(slave_link), slave_options(spec));
  MasterOptions mo;
  mo.workspace.scale_factor = spec.scale_factor;
  mo.home = cfg.home;
  mo.initial_ledger.beaker_ml = s0.ledger.beaker_ml;
  mo.initial_ledger.tube_ml = s0.ledger.tube_ml;
  mo.initial_ledger.pipette_ml = s0.ledger.pipette_ml;
  MasterEndpoint master(mo, std::move(master_link));

  TrialResult result;
  auto& records = result.log.records;
  if (options.record) {
    records.push_back(json{{"type", "header"},
                           {"t", 0},
                           {"format_version", kLogFormatVersion},
                           {"build_version", kBuildVersion},
                           {"condition", to_string(condition)},
                           {"policy", options.policy == PolicyKind::Oracle ? "oracle" : "scripted"},
                           {"seed", spec.seed},
                           {"spec_hash", spec_hash(spec)},
                           {"spec", spec},
                           {"pipette_diameter_mm", cfg.pipette.outer_diameter_mm}});
  }

  SqueezeCounter squeezes;
  auto observe = [&](Direction dir, const wire::WireMessage& m) {
    if (const auto* g = std::get_if<wire::GripperCommand>(&m.payload)) squeezes.observe(g->opening_permille);
    if (options.record) records.push_back(message_record(dir, m));
  };
  slave.set_observer(observe);
  master.set_observer(observe);
  master.set_input_source([&](const MasterView& view) { return op.act(view, slave.state()); });

  const auto timeout_us = static_cast<std::uint64_t>(std::llround(spec.timeout_s * 1e6));
  const std::uint64_t end_us = co_simulate(slave, master, timeout_us, [&] { return op.done(); });

  const SceneState& final_state = slave.state();
  const std::optional<std::uint64_t> done =
      op.done() ? std::optional<std::uint64_t>(op.done_at_us()) : std::nullopt;
  result.metrics = metrics_from(spec, final_state.ledger, final_state.dropped, done, end_us, squeezes.count());
  result.final_state = final_state;

  if (options.record) {
    if (final_state.dropped) records.push_back(json{{"type", "failure"}, {"t", end_us}, {"reason", "pipette dropped"}});
    if (done) {
      records.push_back(json{{"type", "trial_done"}, {"t", end_us}, {"done_at", *done}});
    } else {
      records.push_back(json{{"type", "timeout"}, {"t", end_us}});
    }
    records.push_back(json{{"type", "final_state"},
                           {"t", end_us},
                           {"digest", hex64(state_digest(final_state))},
                           {"ledger", ledger_json(final_state.ledger)},
                           {"dropped", final_state.dropped}});
    records.push_back(json{{"type", "metrics"}, {"t", end_us}, {"metrics", result.metrics}});
  }
  return result;
}

Metrics compute_metrics(const TrialLog& log, const ScenarioSpec& spec) {
  SqueezeCounter squeezes;
  std::uint64_t last_t = 0;
  for (const auto& r : log.records) {
    last_t = std::max(last_t, r.value("t", std::uint64_t{0}));
    if (r.value("type", "") == "msg" && r.value("kind", "") == wire::to_string(wire::MsgType::GripperCommand)) {
      squeezes.observe(r.at("opening_permille").get<std::uint16_t>());
    }
  }
  const json* final_rec = find_record(log, "final_state");
  if (!final_rec) {
    // Incomplete log: no final ledger, so only the activity so far is known.
    Metrics m;
    m.task_time_s = static_cast<double>(last_t) / 1e6;
    m.squeeze_count = squeezes.count();
    m.relative_error = 1.0;
    return m;
  }
  const json* done_rec = find_record(log, "trial_done");
  std::optional<std::uint64_t> done;
  if (done_rec) done = done_rec->at("done_at").get<std::uint64_t>();
  return metrics_from(spec, ledger_from(final_rec->at("ledger")), final_rec->value("dropped", false), done,
                      final_rec->at("t").get<std::uint64_t>(), squeezes.count());
}

ReplayReport replay(const TrialLog& log) {
  const json& header = log.header();
  const int version = header.value("format_version", -1);
  if (version != kLogFormatVersion) {
    throw ReplayIncompatible("log format version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kLogFormatVersion) + ")");
  }
  if (header.value("build_version", "") != kBuildVersion) {
    throw ReplayIncompatible("log was written by build " + header.value("build_version", std::string("?")) +
                             ", this is " + kBuildVersion);
  }
  ScenarioSpec spec;
  try {
    spec = header.at("spec").get<ScenarioSpec>();
  } catch (const json::exception& e) {
    throw ReplayIncompatible(std::string("header spec unreadable: ") + e.what());
  }

  ReplayReport report;
  if (spec_hash(spec) != header.value("spec_hash", "")) {
    report.divergences.push_back("spec hash differs from the header");
  }

  const SceneConfig cfg = realize_scene(spec);
  auto [slave_link, feed] = make_loopback_pair();
  SlaveEndpoint slave(cfg, initial_state(cfg), std::move(slave_link), slave_options(spec));

  std::optional<std::uint32_t> last_seq;
  for (const auto& r : log.records) {
    if (r.value("type", "") != "msg" || r.value("dir", "") != "m2s") continue;
    const wire::WireMessage m = command_from(r);
    if (last_seq && m.seq != *last_seq + 1) {
      report.sequence_gaps += m.seq > *last_seq ? m.seq - *last_seq - 1 : 1;
      report.divergences.push_back("master-to-slave sequence jumps from " + std::to_string(*last_seq) + " to " +
                                   std::to_string(m.seq));
    }
    last_seq = m.seq;
    slave.advance_to(m.sim_timestamp_us);
    const auto bytes = wire::encode(m);
    feed->write(bytes);
    // Keep the slave's outbound traffic from piling up in the loopback.
    (void)feed->read_available();
    ++report.commands_replayed;
  }

  const json* final_rec = find_record(log, "final_state");
  if (!final_rec) throw ReplayIncompatible("log has no final_state record");
  slave.advance_to(final_rec->at("t").get<std::uint64_t>());
  report.final_state = slave.state();

  report.state_matches = hex64(state_digest(report.final_state)) == final_rec->value("digest", "");
  if (!report.state_matches) report.divergences.push_back("final state digest differs from the log");

  // Metrics from the replayed ledger, with completion and squeezes read from the log.
  Metrics logged;
  try {
    logged = log.metrics_block().at("metrics").get<Metrics>();
  } catch (const json::exception& e) {
    throw ReplayIncompatible(std::string("metrics block unreadable: ") + e.what());
  }
  std::optional<std::uint64_t> done;
  if (const json* done_rec = find_record(log, "trial_done")) done = done_rec->at("done_at").get<std::uint64_t>();
  report.metrics = metrics_from(spec, report.final_state.ledger, report.final_state.dropped, done,
                                final_rec->at("t").get<std::uint64_t>(), compute_metrics(log, spec).squeeze_count);
  report.metrics_match = report.metrics == logged;
  if (!report.metrics_match) report.divergences.push_back("replayed metrics differ from the logged metrics");
  return report;
}

// ---------------------------------------------------------------------------

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

std::vector<BenchRow> bench(const ScenarioSpec& spec, int trials, std::uint64_t base_seed) {
  if (trials < 1) throw ConfigError("bench needs at least one trial");
  std::vector<BenchRow> rows;
  for (FeedbackCondition c : kAllConditions) {
    std::vector<double> errors, times;
    BenchRow row{c};
    for (int i = 0; i < trials; ++i) {
      ScenarioSpec s = spec;
      s.seed = base_seed + static_cast<std::uint64_t>(i);
      const Metrics m = run_trial(s, c, {PolicyKind::Scripted, false}).metrics;
      errors.push_back(m.relative_error);
      times.push_back(m.task_time_s);
      row.incomplete += !m.complete;
    }
    row.trials = trials;
    std::tie(row.mean_error, row.sd_error) = mean_sd(errors);
    std::tie(row.mean_time_s, row.sd_time_s) = mean_sd(times);
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "condition,trials,mean_error,sd_error,mean_time_s,sd_time_s\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%d,%.6f,%.6f,%.3f,%.3f\n", std::string(to_string(r.condition)).c_str(),
                  r.trials, r.mean_error, r.sd_error, r.mean_time_s, r.sd_time_s);
    out << line;
  }
  return out.str();
}

}  // namespace telehaptic
