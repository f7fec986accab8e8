#pragma once

#include "telehaptic/endpoints.hpp"
#include "telehaptic/scenario.hpp"

#include <deque>
#include <functional>
#include <random>
#include <string_view>
#include <vector>

namespace telehaptic {

/// Observation channels available to the operator. Vision is always present.
enum class FeedbackCondition : std::uint8_t { V = 0, VF = 1, VE = 2, VFE = 3 };

inline constexpr std::array<FeedbackCondition, 4> kAllConditions = {
    FeedbackCondition::V, FeedbackCondition::VF, FeedbackCondition::VE, FeedbackCondition::VFE};

std::string_view to_string(FeedbackCondition c);
/// Accepts v, vf, ve, vfe (any case, '+' separators allowed). Throws ConfigError otherwise.
FeedbackCondition parse_condition(std::string_view text);

inline bool has_force(FeedbackCondition c) {
  return c == FeedbackCondition::VF || c == FeedbackCondition::VFE;
}
inline bool has_electrodes(FeedbackCondition c) {
  return c == FeedbackCondition::VE || c == FeedbackCondition::VFE;
}

/// Seeded perception noise. Each channel draws from its own stream so that
/// trials of different conditions on one seed share their noise realisation.
class Senses {
 public:
  Senses(const PerceptionModel& model, std::uint64_t seed);

  double glance_compression(const SceneState& truth);
  double glance_tube(const SceneState& truth, int tube);
  double feel_force(double rendered_n);

 private:
  static double gauss(std::mt19937_64& rng, double sd);

  PerceptionModel model_;
  std::mt19937_64 visual_;
  std::mt19937_64 haptic_;
  double visual_bias_ = 0.0;
  double force_gain_ = 1.0;
};

/// Range of compressions consistent with a perceived electrode pattern.
struct CompressionInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Operator's mental model of the grasp: nominal pipette, footprint and force law.
class GraspModel {
 public:
  GraspModel(const PipetteModel& pipette, const GripperSpec& gripper, const PerceptionModel& perception);

  /// Grasp force the renderer would produce at squeeze c, given the opening
  /// travel `span` from first contact to a fully squeezed bulb and a contact
  /// point recorded `lag` late.
  double force_at(double c, double span, double lag = 0.0) const;
  double force_at(double c) const { return force_at(c, span_); }
  /// Inverse of force_at by bisection; saturates at 0 and 1.
  double compression_for_force(double force_n, double span, double lag = 0.0) const;
  /// Local slope of force_at, for propagating perception noise.
  double force_slope(double c, double span, double lag = 0.0) const;

  CompressionInterval interval_for(const ElectrodeLevels& levels) const;

  /// Opening change per unit compression (normalised).
  double opening_per_compression() const { return span_; }

 private:
  std::pair<int, int> signature(const ElectrodeLevels& levels) const;

  PipetteModel pipette_;
  GripperSpec gripper_;
  PerceptionModel perception_;
  double span_;
  std::vector<std::pair<int, int>> table_;  // signature per grid step
  int steps_ = 1000;
};

/// Scripted operator performing the dosing task through the master handle.
/// It sees the twin, the rendered force and the electrode pattern through the
/// master view, and the remote cell only through its noisy senses.
class ScriptedOperator {
 public:
  ScriptedOperator(const ScenarioSpec& spec, FeedbackCondition condition);

  /// Oracle variant: reads the true squeeze and tube level and knows the real
  /// pipette, so its only error sources are quantisation and timing.
  static ScriptedOperator oracle(const ScenarioSpec& spec, const SceneConfig& realized);

  HapticInput act(const MasterView& view, const SceneState& remote);
  bool done() const { return done_; }
  std::uint64_t done_at_us() const { return done_at_us_; }

  double dispensed_estimate_ml() const { return dispensed_est_; }
  int corrections() const { return corrections_; }

 private:
  using Step = std::function<bool()>;

  ScriptedOperator(const ScenarioSpec& spec, FeedbackCondition condition, bool oracle,
                   const PipetteModel& believed);

  void plan();
  Step move_to(Eigen::Vector3d p);
  Step grip_to(double opening);
  Step wait(double seconds);
  Step then(std::function<std::vector<Step>()> decide);

  double opening_for(double c) const;
  double span_est() const { return contact_opening_est_ - min_opening_; }
  double estimate_compression();
  std::vector<Step> fill_cycle();
  std::vector<Step> dispense();
  std::vector<Step> verify();
  std::vector<Step> finish();

  ScenarioSpec spec_;
  FeedbackCondition condition_;
  bool oracle_ = false;
  PipetteModel believed_;
  GraspModel model_;
  Senses senses_;
  Pacing pace_;

  std::deque<Step> steps_;
  std::vector<Step> pending_;  // steps queued by the step that just finished
  const MasterView* view_ = nullptr;
  const SceneState* remote_ = nullptr;
  std::uint64_t last_now_us_ = 0;
  double dt_ = 0.0;
  bool done_ = false;
  std::uint64_t done_at_us_ = 0;

  Eigen::Vector3d target_;
  double grip_ = 1.0;
  // Settling bookkeeping for grip and wait steps.
  double last_twin_opening_ = -1.0;
  std::uint64_t twin_stable_since_us_ = 0;
  std::uint64_t wait_until_us_ = 0;
  bool waiting_ = false;

  // Belief about the grasp and the dose.
  double contact_opening_est_;
  double min_opening_;  // fully squeezed bulb
  double compression_var_;
  double hold_compression_est_ = 0.0;
  double held_est_ = 0.0;
  double held_var_ = 0.0;
  double dispensed_est_ = 0.0;
  double dispensed_var_ = 0.0;
  int fills_ = 0;
  int corrections_ = 0;
};

}  // namespace telehaptic
