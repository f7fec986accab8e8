#include "telehaptic/policy.hpp"

#include "telehaptic/errors.hpp"
#include "telehaptic/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace telehaptic {

namespace {
// Slave control rate the operator has learnt to expect.
constexpr double kControlRateHz = 125.0;
}  // namespace

std::string_view to_string(FeedbackCondition c) {
  switch (c) {
    case FeedbackCondition::V: return "v";
    case FeedbackCondition::VF: return "vf";
    case FeedbackCondition::VE: return "ve";
    case FeedbackCondition::VFE: return "vfe";
  }
  return "?";
}

FeedbackCondition parse_condition(std::string_view text) {
  std::string key;
  for (char ch : text) {
    if (ch != '+') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  for (FeedbackCondition c : kAllConditions) {
    if (key == to_string(c)) return c;
  }
  throw ConfigError("unknown feedback condition '" + std::string(text) + "' (expected v, vf, ve or vfe)");
}

// ---------------------------------------------------------------------------

Senses::Senses(const PerceptionModel& model, std::uint64_t seed) : model_(model) {
  std::seed_seq visual_seed{seed, std::uint64_t{1}};
  std::seed_seq haptic_seed{seed, std::uint64_t{2}};
  visual_.seed(visual_seed);
  haptic_.seed(haptic_seed);
  visual_bias_ = gauss(visual_, model_.visual_compression_bias_sd);
  force_gain_ = 1.0 + gauss(haptic_, model_.force_gain_sd);
}

double Senses::gauss(std::mt19937_64& rng, double sd) {
  if (!(sd > 0.0)) return 0.0;
  return std::normal_distribution<double>(0.0, sd)(rng);
}

double Senses::glance_compression(const SceneState& truth) {
  return truth.pipette.compression + visual_bias_ + gauss(visual_, model_.visual_compression_noise_sd);
}

double Senses::glance_tube(const SceneState& truth, int tube) {
  const double level = truth.ledger.tube_ml.at(static_cast<std::size_t>(tube));
  return std::max(0.0, level + gauss(visual_, model_.visual_volume_noise_sd_ml));
}

double Senses::feel_force(double rendered_n) {
  return rendered_n * force_gain_ * (1.0 + gauss(haptic_, model_.force_noise_sd));
}

// ---------------------------------------------------------------------------

GraspModel::GraspModel(const PipetteModel& pipette, const GripperSpec& gripper,
                       const PerceptionModel& perception)
    : pipette_(pipette),
      gripper_(gripper),
      perception_(perception),
      span_((pipette.outer_diameter_mm - pipette.min_squeezed_diameter_mm) / gripper.stroke_mm) {
  table_.reserve(static_cast<std::size_t>(steps_) + 1);
  for (int i = 0; i <= steps_; ++i) {
    const auto frame = clamp_sensor(Finger::Left, contact_footprint(double(i) / steps_, pipette_), 0);
    table_.push_back(signature(pattern_to_levels(resample_bicubic(frame))));
  }
}

double GraspModel::force_at(double c, double span, double lag) const {
  c = std::clamp(c, 0.0, 1.0);
  const auto frame = clamp_sensor(Finger::Left, contact_footprint(c, pipette_), 0);
  const double mean = 2.0 * frame.cells.sum() / 100.0;
  return std::min(kMaxGraspForceN, mean * std::max(0.0, c * span - lag));
}

double GraspModel::compression_for_force(double force_n, double span, double lag) const {
  if (force_n <= 0.0) return 0.0;
  if (force_n >= force_at(1.0, span, lag)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (force_at(mid, span, lag) < force_n ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double GraspModel::force_slope(double c, double span, double lag) const {
  const double h = 1e-4;
  const double a = std::clamp(c - h, 0.0, 1.0);
  const double b = std::clamp(c + h, 0.0, 1.0);
  return (force_at(b, span, lag) - force_at(a, span, lag)) / (b - a);
}

std::pair<int, int> GraspModel::signature(const ElectrodeLevels& levels) const {
  const int active = static_cast<int>((levels.array() >= perception_.electrode_active_level).count());
  const int intensity = levels.maxCoeff() * perception_.electrode_intensity_steps / 256;
  return {active, intensity};
}

CompressionInterval GraspModel::interval_for(const ElectrodeLevels& levels) const {
  const auto sig = signature(levels);
  int first = -1, last = -1;
  for (int i = 0; i <= steps_; ++i) {
    if (table_[static_cast<std::size_t>(i)] != sig) continue;
    if (first < 0) first = i;
    last = i;
  }
  if (first < 0) return {};
  // The true boundaries lie somewhere between neighbouring grid points.
  const double step = 1.0 / steps_;
  return {std::max(0.0, (first - 1) * step), std::min(1.0, (last + 1) * step)};
}

// ---------------------------------------------------------------------------

ScriptedOperator::ScriptedOperator(const ScenarioSpec& spec, FeedbackCondition condition)
    : ScriptedOperator(spec, condition, false, spec.scene.pipette) {}

ScriptedOperator ScriptedOperator::oracle(const ScenarioSpec& spec, const SceneConfig& realized) {
  return ScriptedOperator(spec, FeedbackCondition::VFE, true, realized.pipette);
}

ScriptedOperator::ScriptedOperator(const ScenarioSpec& spec, FeedbackCondition condition,
                                   bool oracle, const PipetteModel& believed)
    : spec_(spec),
      condition_(condition),
      oracle_(oracle),
      believed_(believed),
      model_(believed, spec.scene.gripper, spec.op.perception),
      senses_(spec.op.perception, spec.seed),
      pace_(spec.op.pacing[static_cast<std::size_t>(condition)]),
      target_(spec.scene.home.position_mm),
      contact_opening_est_(believed.outer_diameter_mm / spec.scene.gripper.stroke_mm),
      min_opening_(believed.min_squeezed_diameter_mm / spec.scene.gripper.stroke_mm) {
  // Prior spread of the squeeze at the hold opening, from the diameter spread.
  const double d = believed.outer_diameter_mm;
  const double dmin = believed.min_squeezed_diameter_mm;
  const double hold_mm = d - spec.op.hold_compression * (d - dmin);
  const double slope = (hold_mm - dmin) / ((d - dmin) * (d - dmin));
  const double sd = oracle_ ? 0.0 : slope * spec.pipette_diameter_sd_mm;
  compression_var_ = std::max(sd * sd, 1e-12);

  const auto& g = spec_.scene.geometry;
  const Eigen::Vector3d rack = g.rack_grasp_point_mm;
  const Eigen::Vector2d beaker = g.beaker.center_xy;
  const Eigen::Vector2d tube = g.tubes.at(static_cast<std::size_t>(spec_.target_tube)).center_xy;
  for (const Eigen::Vector3d& p :
       {rack, Eigen::Vector3d(rack.x(), rack.y(), spec_.approach_height_mm),
        Eigen::Vector3d(beaker.x(), beaker.y(), spec_.beaker_dip_z_mm),
        Eigen::Vector3d(tube.x(), tube.y(), spec_.approach_height_mm)}) {
    const Eigen::Vector3d d = (p - spec_.scene.home.position_mm) / spec_.scale_factor;
    if (!inside_device_workspace(d)) {
      throw ConfigError("scale factor " + std::to_string(spec_.scale_factor) +
                        " cannot reach the scene from the handle workspace");
    }
  }
  plan();
}

HapticInput ScriptedOperator::act(const MasterView& view, const SceneState& remote) {
  view_ = &view;
  remote_ = &remote;
  dt_ = last_now_us_ == 0 ? 0.0 : static_cast<double>(view.now_us - last_now_us_) / 1e6;
  last_now_us_ = view.now_us;

  for (int guard = 0; guard < 32 && !steps_.empty(); ++guard) {
    pending_.clear();
    if (!steps_.front()()) break;
    steps_.pop_front();
    steps_.insert(steps_.begin(), pending_.begin(), pending_.end());
  }
  if (steps_.empty() && !done_) {
    done_ = true;
    done_at_us_ = view.now_us;
  }

  HapticInput in;
  in.handle_displacement_mm = (target_ - view.home.position_mm) / view.workspace.scale_factor;
  in.grip_command = grip_;
  in.timestamp_us = view.now_us;
  return in;
}

double ScriptedOperator::opening_for(double c) const {
  return contact_opening_est_ - c * span_est();
}

ScriptedOperator::Step ScriptedOperator::move_to(Eigen::Vector3d p) {
  return [this, p] {
    const Eigen::Vector3d d = p - target_;
    const double reach = spec_.op.travel_speed_mm_s * dt_;
    if (d.norm() <= reach) {
      target_ = p;
    } else {
      target_ += d.normalized() * reach;
    }
    return target_ == p && view_->twin.valid &&
           (view_->twin.pose.position_mm - p).norm() <= spec_.op.waypoint_tolerance_mm;
  };
}

ScriptedOperator::Step ScriptedOperator::grip_to(double opening) {
  opening = std::clamp(opening, 0.0, 1.0);
  return [this, opening] {
    const std::uint64_t now = view_->now_us;
    if (grip_ != opening) {
      const double step = pace_.squeeze_rate * dt_;
      grip_ = std::abs(opening - grip_) <= step ? opening : grip_ + std::copysign(step, opening - grip_);
      twin_stable_since_us_ = now;
      return false;
    }
    // Settled once the mirrored opening has stopped changing for a few state updates.
    if (view_->twin.gripper_opening != last_twin_opening_) {
      last_twin_opening_ = view_->twin.gripper_opening;
      twin_stable_since_us_ = now;
    }
    return now - twin_stable_since_us_ >= 80'000;
  };
}

ScriptedOperator::Step ScriptedOperator::wait(double seconds) {
  const auto span = static_cast<std::uint64_t>(std::llround(seconds * 1e6));
  return [this, span] {
    if (!waiting_) {
      waiting_ = true;
      wait_until_us_ = view_->now_us + span;
    }
    if (view_->now_us < wait_until_us_) return false;
    waiting_ = false;
    return true;
  };
}

ScriptedOperator::Step ScriptedOperator::then(std::function<std::vector<Step>()> decide) {
  return [this, decide = std::move(decide)] {
    pending_ = decide();
    return true;
  };
}

double ScriptedOperator::estimate_compression() {
  const double o = view_->twin.gripper_opening;  // settled, as mirrored from the robot
  if (oracle_) {
    contact_opening_est_ = o + remote_->pipette.compression * span_est();
    compression_var_ = 1e-12;
    return remote_->pipette.compression;
  }
  const PerceptionModel& pm = spec_.op.perception;
  const int k = pace_.verify_glances;
  const double span = span_est();

  double weight = 1.0 / compression_var_;
  double sum = (contact_opening_est_ - o) / span * weight;
  auto fuse = [&](double value, double var) {
    var = std::max(var, 1e-12);
    weight += 1.0 / var;
    sum += value / var;
  };

  double glance = 0.0;
  for (int i = 0; i < k; ++i) glance += senses_.glance_compression(*remote_);
  fuse(glance / k, pm.visual_compression_bias_sd * pm.visual_compression_bias_sd +
                       pm.visual_compression_noise_sd * pm.visual_compression_noise_sd / k);

  if (has_force(condition_) && view_->force) {
    double felt = 0.0;
    for (int i = 0; i < k; ++i) felt += senses_.feel_force(view_->force->magnitude_n);
    felt /= k;
    // The contact point latches on the first control tick that touches, so it
    // trails the true contact by up to one tick of closing travel.
    const double tick_travel = pace_.squeeze_rate / kControlRateHz;
    const double c_f = model_.compression_for_force(felt, span, 0.5 * tick_travel);
    const double rel = std::sqrt(pm.force_gain_sd * pm.force_gain_sd + pm.force_noise_sd * pm.force_noise_sd / k);
    const double sd_gain = felt * rel / std::max(model_.force_slope(c_f, span, 0.5 * tick_travel), 1e-6);
    const double sd_latch = tick_travel / std::sqrt(12.0) / span;
    fuse(c_f, sd_gain * sd_gain + sd_latch * sd_latch);
  }

  double c = sum / weight;
  double var = 1.0 / weight;
  if (has_electrodes(condition_) && view_->patterns) {
    const auto iv = model_.interval_for(pattern_to_levels((*view_->patterns)[0]));
    c = std::clamp(c, iv.lo, iv.hi);
    var = std::min(var, (iv.hi - iv.lo) * (iv.hi - iv.lo) / 12.0);
  }
  c = std::clamp(c, 0.0, 0.95);
  // The squeeze seen at a known opening pins down the contact opening, and with
  // it the bulb diameter and the opening-to-squeeze ratio.
  contact_opening_est_ = std::clamp((o - c * min_opening_) / (1.0 - c), min_opening_ + 0.01, 1.0);
  compression_var_ = var;
  return c;
}

void ScriptedOperator::plan() {
  const Eigen::Vector3d rack = spec_.scene.geometry.rack_grasp_point_mm;
  const Eigen::Vector3d rack_above(rack.x(), rack.y(), spec_.approach_height_mm);
  steps_ = {
      move_to(rack_above),
      move_to(rack),
      grip_to(opening_for(spec_.op.hold_compression)),
      wait(pace_.verify_dwell_s),
      then([this] {
        estimate_compression();
        return std::vector<Step>{};
      }),
      move_to(rack_above),
      then([this] { return fill_cycle(); }),
  };
}

std::vector<ScriptedOperator::Step> ScriptedOperator::fill_cycle() {
  ++fills_;
  const auto& g = spec_.scene.geometry;
  const Eigen::Vector2d b = g.beaker.center_xy;
  const Eigen::Vector2d t = g.tubes[static_cast<std::size_t>(spec_.target_tube)].center_xy;
  const double floor = (believed_.min_squeezed_diameter_mm - 0.5) / spec_.scene.gripper.stroke_mm;
  return {
      move_to({b.x(), b.y(), spec_.approach_height_mm}),
      move_to({b.x(), b.y(), spec_.beaker_dip_z_mm}),
      grip_to(floor),
      grip_to(opening_for(spec_.op.hold_compression)),
      wait(pace_.verify_dwell_s),
      then([this] {
        hold_compression_est_ = estimate_compression();
        const double cap = believed_.bulb_capacity_ml;
        held_est_ = cap * (1.0 - hold_compression_est_);
        held_var_ = cap * cap * compression_var_;
        return std::vector<Step>{};
      }),
      move_to({b.x(), b.y(), spec_.approach_height_mm}),
      move_to({t.x(), t.y(), spec_.approach_height_mm}),
      move_to({t.x(), t.y(), spec_.tube_dispense_z_mm}),
      then([this] { return dispense(); }),
  };
}

std::vector<ScriptedOperator::Step> ScriptedOperator::dispense() {
  const double cap = believed_.bulb_capacity_ml;
  const double span = span_est();
  const double floor = (believed_.min_squeezed_diameter_mm - 0.5) / spec_.scene.gripper.stroke_mm;
  const double remaining = spec_.target_volume_ml - dispensed_est_;

  if (remaining >= held_est_) {
    return {grip_to(floor), then([this] {
              dispensed_est_ += held_est_;
              dispensed_var_ += held_var_;
              held_est_ = 0.0;
              held_var_ = 0.0;
              const double left = spec_.target_volume_ml - dispensed_est_;
              if (left > spec_.op.correction_threshold_ml && fills_ < spec_.op.max_fills) {
                const auto& t = spec_.scene.geometry.tubes[static_cast<std::size_t>(spec_.target_tube)];
                return std::vector<Step>{
                    move_to({t.center_xy.x(), t.center_xy.y(), spec_.approach_height_mm}),
                    then([this] { return fill_cycle(); })};
              }
              return verify();
            })};
  }
  // Partial squeeze: move the handle by the opening change that displaces the remainder.
  const double goal = std::max(floor, view_->twin.gripper_opening - remaining / cap * span);
  return {grip_to(goal), then([this, remaining] {
            const double rel = spec_.pipette_diameter_sd_mm / believed_.outer_diameter_mm;
            dispensed_est_ += remaining;
            dispensed_var_ += remaining * remaining * rel * rel;
            held_est_ -= remaining;
            return verify();
          })};
}

std::vector<ScriptedOperator::Step> ScriptedOperator::verify() {
  return {wait(pace_.verify_dwell_s), then([this] {
            const int tube = spec_.target_tube;
            if (oracle_) {
              dispensed_est_ = remote_->ledger.tube_ml[static_cast<std::size_t>(tube)] -
                               spec_.scene.initial_tube_ml[static_cast<std::size_t>(tube)];
              dispensed_var_ = 0.0;
            } else {
              const int k = pace_.verify_glances;
              double reading = 0.0;
              for (int i = 0; i < k; ++i) reading += senses_.glance_tube(*remote_, tube);
              reading = reading / k - spec_.scene.initial_tube_ml[static_cast<std::size_t>(tube)];
              const double sd = spec_.op.perception.visual_volume_noise_sd_ml;
              const double reading_var = std::max(sd * sd / k, 1e-12);
              const double dr_var = std::max(dispensed_var_, 1e-12);
              dispensed_est_ = (dispensed_est_ / dr_var + reading / reading_var) / (1.0 / dr_var + 1.0 / reading_var);
              dispensed_var_ = 1.0 / (1.0 / dr_var + 1.0 / reading_var);
            }

            const double threshold = oracle_ ? 0.005 : spec_.op.correction_threshold_ml;
            const double shortfall = spec_.target_volume_ml - dispensed_est_;
            if (shortfall > threshold && corrections_ < spec_.op.max_corrections) {
              const double cap = believed_.bulb_capacity_ml;
              const double span = span_est();
              const double floor = (believed_.min_squeezed_diameter_mm - 0.5) / spec_.scene.gripper.stroke_mm;
              if (held_est_ > threshold) {
                ++corrections_;
                const double extra = std::min(shortfall, held_est_);
                const double goal = std::max(floor, view_->twin.gripper_opening - extra / cap * span);
                return std::vector<Step>{grip_to(goal), then([this, extra] {
                                           dispensed_est_ += extra;
                                           held_est_ -= extra;
                                           return verify();
                                         })};
              }
              if (fills_ < spec_.op.max_fills) {
                ++corrections_;
                const auto& t = spec_.scene.geometry.tubes[static_cast<std::size_t>(tube)];
                return std::vector<Step>{
                    move_to({t.center_xy.x(), t.center_xy.y(), spec_.approach_height_mm}),
                    then([this] { return fill_cycle(); })};
              }
            }
            return finish();
          })};
}

std::vector<ScriptedOperator::Step> ScriptedOperator::finish() {
  const auto& g = spec_.scene.geometry;
  const Eigen::Vector2d b = g.beaker.center_xy;
  const Eigen::Vector2d t = g.tubes[static_cast<std::size_t>(spec_.target_tube)].center_xy;
  const Eigen::Vector3d rack = g.rack_grasp_point_mm;
  const double floor = (believed_.min_squeezed_diameter_mm - 0.5) / spec_.scene.gripper.stroke_mm;
  return {
      move_to({t.x(), t.y(), spec_.approach_height_mm}),
      move_to({b.x(), b.y(), spec_.approach_height_mm}),
      grip_to(floor),  // return what is left to the beaker
      move_to({rack.x(), rack.y(), spec_.approach_height_mm}),
      move_to(rack),
      grip_to(1.0),
      move_to({rack.x(), rack.y(), spec_.approach_height_mm}),
  };
}

}  // namespace telehaptic
