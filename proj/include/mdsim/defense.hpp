#pragma once

// Per-vehicle defense state machine FOLLOWING -> GAP_CONTROL -> DOWNGRADE and
// the gradual gap-control ramp that precedes the switch to ACC.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>

#include "mdsim/core.hpp"

namespace mdsim {

enum class FsmState { following, gap_control, downgrade };

inline std::string_view fsm_name(FsmState s) {
  switch (s) {
    case FsmState::following: return "FOLLOWING";
    case FsmState::gap_control: return "GAP_CONTROL";
    case FsmState::downgrade: return "DOWNGRADE";
  }
  return "?";
}

inline std::optional<FsmState> fsm_from_name(std::string_view s) {
  for (auto st : {FsmState::following, FsmState::gap_control, FsmState::downgrade})
    if (fsm_name(st) == s) return st;
  return std::nullopt;
}

enum class TransitionCause { prediction, warning, forced, gap_reached, leader };

inline std::string_view cause_name(TransitionCause c) {
  switch (c) {
    case TransitionCause::prediction: return "prediction";
    case TransitionCause::warning: return "warning";
    case TransitionCause::forced: return "forced";
    case TransitionCause::gap_reached: return "gap_reached";
    case TransitionCause::leader: return "leader";
  }
  return "?";
}

inline std::optional<TransitionCause> cause_from_name(std::string_view s) {
  for (auto c : {TransitionCause::prediction, TransitionCause::warning, TransitionCause::forced,
                 TransitionCause::gap_reached, TransitionCause::leader})
    if (cause_name(c) == s) return c;
  return std::nullopt;
}

struct DefenseFsmState {
  FsmState state = FsmState::following;
  bool warning = false;
  bool use_radar = false;
};

// Leaving FOLLOWING latches the warning and switches sensing to radar.
// Returns false when the vehicle was not FOLLOWING.
inline bool raise_alarm(DefenseFsmState& fsm) {
  if (fsm.state != FsmState::following) return false;
  fsm.state = FsmState::gap_control;
  fsm.warning = true;
  fsm.use_radar = true;
  return true;
}

// Decision taken on every received beacon: any non-regular prediction or a
// relayed warning.
inline std::optional<TransitionCause> alarm_cause(const DefenseFsmState& fsm, std::optional<Label> prediction,
                                                  bool beacon_warning) {
  if (fsm.state != FsmState::following) return std::nullopt;
  if (prediction && *prediction != Label::regular) return TransitionCause::prediction;
  if (beacon_warning) return TransitionCause::warning;
  return std::nullopt;
}

enum class SpacingMode { time_headway, fixed_gap };

struct GapControlParams {
  double delta_g = 1.0;  // m/s
  double delta_t = 0.1;  // s
};

struct GapControlState {
  double head_t = 1.2;
  double dt_offset = 2.0;
  double gap_t = 0.0;
  double cur_head = 0.0;
  double cur_gap = 0.0;
  bool increasing = true;
  double delta_g = 1.0;
  double delta_t = 0.1;
  SpacingMode mode = SpacingMode::time_headway;
};

inline double sgn(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// Initializes the ramp from the current speed and radar distance. A stopped
// vehicle has no meaningful headway, so it uses the fixed-gap branch.
inline GapControlState start_gap_control(double head_t, double dt_offset, double cur_speed, double cur_distance,
                                         const GapControlParams& params,
                                         SpacingMode preferred = SpacingMode::time_headway) {
  if (!(params.delta_g > 0.0) || !(params.delta_t > 0.0)) throw ConfigError("gap ramp rates must be positive");
  GapControlState g;
  g.head_t = head_t;
  g.dt_offset = dt_offset;
  g.delta_g = params.delta_g;
  g.delta_t = params.delta_t;
  g.mode = cur_speed > 0.0 ? preferred : SpacingMode::fixed_gap;
  g.gap_t = head_t * cur_speed + dt_offset;
  g.increasing = true;
  if (g.mode == SpacingMode::time_headway) {
    g.cur_gap = dt_offset;
    g.cur_head = (cur_distance - dt_offset) / cur_speed;
    if (head_t < g.cur_head) g.increasing = false;
  } else {
    g.cur_gap = cur_distance;
    g.cur_head = head_t;
  }
  if (g.gap_t < g.cur_gap) g.increasing = false;
  return g;
}

inline bool gap_control_completed(const GapControlState& g) {
  if (g.mode == SpacingMode::time_headway) return g.increasing ? g.cur_head >= g.head_t : g.cur_head <= g.head_t;
  return g.increasing ? g.cur_gap >= g.gap_t : g.cur_gap <= g.gap_t;
}

inline bool gap_is_reached(const GapControlState& g, double cur_distance) {
  return g.increasing ? cur_distance >= g.gap_t : cur_distance <= g.gap_t;
}

// Moves value toward target by at most step, never past it.
inline double ramp_toward(double value, double target, double step) {
  const double next = value + sgn(target - value) * step;
  return target >= value ? std::min(next, target) : std::max(next, target);
}

enum class GapUpdate { ramping, reached };

// One periodic update. The caller pushes (cur_head, cur_gap) into the active
// controller after every call that returns ramping.
inline GapUpdate update_gap(GapControlState& g, double cur_speed, double cur_distance) {
  // speed near zero would make the headway step unbounded; the clamp in
  // ramp_toward then lands on the target in one update
  const double delta_h = g.delta_g / std::max(cur_speed, 1e-6);
  g.gap_t = g.head_t * cur_speed + g.dt_offset;
  if (gap_control_completed(g)) {
    if (g.mode == SpacingMode::time_headway) g.cur_head = g.head_t;
    else g.cur_gap = g.gap_t;
  }
  if (gap_is_reached(g, cur_distance)) return GapUpdate::reached;
  if (g.mode == SpacingMode::time_headway) g.cur_head = ramp_toward(g.cur_head, g.head_t, delta_h * g.delta_t);
  else g.cur_gap = ramp_toward(g.cur_gap, g.gap_t, g.delta_g * g.delta_t);
  return GapUpdate::ramping;
}

}  // namespace mdsim
