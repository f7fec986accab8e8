// Command line front end: scripted trials, benchmarks, replay and live operator mode.
#include "telehaptic/errors.hpp"
#include "telehaptic/live.hpp"
#include "telehaptic/socket_transport.hpp"
#include "telehaptic/trial.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace telehaptic;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

ScenarioSpec load_spec(const std::string& path, std::optional<int> scale) {
  ScenarioSpec spec = path.empty() ? ScenarioSpec{} : load_scenario(path);
  if (scale) spec.scale_factor = *scale;
  validate(spec);
  return spec;
}

int cmd_run(const std::string& scenario, std::optional<int> scale, const std::string& condition,
            std::uint64_t seed, const std::string& log_path) {
  ScenarioSpec spec = load_spec(scenario, scale);
  spec.seed = seed;
  const FeedbackCondition cond = parse_condition(condition);
  const TrialResult r = run_trial(spec, cond, {PolicyKind::Scripted, !log_path.empty()});
  if (!log_path.empty()) {
    std::ofstream out(log_path, std::ios::binary);
    if (!out) throw Error("cannot write log '" + log_path + "'");
    r.log.write(out);
    if (!out) throw Error("failed writing log '" + log_path + "'");
  }
  nlohmann::json summary = r.metrics;
  summary["condition"] = to_string(cond);
  summary["seed"] = seed;
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_bench(const std::string& scenario, std::optional<int> scale, int trials, std::uint64_t base_seed) {
  const ScenarioSpec spec = load_spec(scenario, scale);
  const auto rows = bench(spec, trials, base_seed);
  std::cout << bench_csv(rows) << '\n';
  const BenchRow* v = nullptr;
  const BenchRow* vfe = nullptr;
  for (const auto& r : rows) {
    if (r.condition == FeedbackCondition::V) v = &r;
    if (r.condition == FeedbackCondition::VFE) vfe = &r;
    std::printf("# %-4s error %.2f%% of target, time %.1f s, incomplete %d/%d\n",
                std::string(to_string(r.condition)).c_str(), 100.0 * r.mean_error, r.mean_time_s, r.incomplete,
                r.trials);
  }
  if (v && vfe && v->mean_error > 0.0 && v->mean_time_s > 0.0) {
    std::printf("# VFE vs V: error %+.0f%%, time %+.0f%%\n", 100.0 * (vfe->mean_error / v->mean_error - 1.0),
                100.0 * (vfe->mean_time_s / v->mean_time_s - 1.0));
  }
  return 0;
}

int cmd_replay(const std::string& log_path) {
  const TrialLog log = TrialLog::load(log_path);
  const ReplayReport rep = replay(log);
  nlohmann::json out{{"ok", rep.ok()},
                     {"commands_replayed", rep.commands_replayed},
                     {"sequence_gaps", rep.sequence_gaps},
                     {"state_matches", rep.state_matches},
                     {"metrics_match", rep.metrics_match},
                     {"metrics", rep.metrics},
                     {"divergences", rep.divergences}};
  std::cout << out.dump() << '\n';
  return rep.ok() ? 0 : 1;
}

int cmd_serve(const std::string& scenario, std::optional<int> scale, std::optional<int> port, int ui_port,
              bool realtime, double duration_s) {
  LiveOptions opts;
  opts.spec = load_spec(scenario, scale);
  opts.slave_port = port ? static_cast<std::uint16_t>(*port) : default_slave_port();
  opts.ui_port = static_cast<std::uint16_t>(ui_port);
  opts.realtime = realtime;
  LiveSession session(opts);
  std::cerr << "slave listening on " << opts.address << ':' << session.slave_port() << ", console on ws://"
            << opts.address << ':' << session.ui_port() << "/\n";
  std::signal(SIGINT, [](int) { g_interrupted = 1; });
  std::signal(SIGTERM, [](int) { g_interrupted = 1; });
  session.run(duration_s, [] { return g_interrupted != 0; });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Master-slave teleoperation simulator for haptic pipette dosing"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  std::optional<int> scale;
  app.add_option("--scale", scale, "Workspace scaling factor")->check(CLI::Range(1, 5));

  std::string scenario, condition, log_path;
  std::uint64_t seed = 7;
  auto* run = app.add_subcommand("run", "Run one scripted trial");
  run->add_option("--scenario", scenario, "Scenario YAML (built-in defaults if omitted)")->check(CLI::ExistingFile);
  run->add_option("--condition", condition, "Feedback condition")
      ->required()
      ->check(CLI::IsMember({"v", "vf", "ve", "vfe"}, CLI::ignore_case));
  run->add_option("--seed", seed, "Trial seed");
  run->add_option("--log", log_path, "Write the JSONL trial log here");

  int trials = 20;
  std::uint64_t base_seed = 1;
  auto* bench_cmd = app.add_subcommand("bench", "Run every condition over consecutive seeds");
  bench_cmd->add_option("--scenario", scenario, "Scenario YAML")->check(CLI::ExistingFile);
  bench_cmd->add_option("--trials", trials, "Seeds per condition")->check(CLI::Range(1, 100000));
  bench_cmd->add_option("--seeds", base_seed, "First seed");

  auto* replay_cmd = app.add_subcommand("replay", "Re-execute a trial log and compare outcomes");
  replay_cmd->add_option("--log", log_path, "JSONL trial log")->required()->check(CLI::ExistingFile);

  std::optional<int> port;
  int ui_port = 8765;
  bool realtime = false;
  double duration_s = 0.0;
  auto* serve = app.add_subcommand("serve", "Live operator mode for the console");
  serve->add_option("--scenario", scenario, "Scenario YAML")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Slave listen port (default TELEHAPTIC_PORT or 7420)")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--ui-port", ui_port, "Console WebSocket port")->check(CLI::Range(0, 65535));
  serve->add_flag("--realtime", realtime, "Pace the simulated clock to wall time");
  serve->add_option("--duration", duration_s, "Stop after this many simulated seconds (0 runs until interrupted)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(scenario, scale, condition, seed, log_path);
    if (*bench_cmd) return cmd_bench(scenario, scale, trials, base_seed);
    if (*replay_cmd) return cmd_replay(log_path);
    if (*serve) return cmd_serve(scenario, scale, port, ui_port, realtime, duration_s);
  } catch (const ReplayIncompatible& e) {
    std::cerr << "replay incompatible: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
