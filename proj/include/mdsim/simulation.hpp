#pragma once

// One deterministic platoon run: fixed-step physics, periodic beacons
// delivered to every member, optional beacon falsification, on-board
// detection and the defense state machine.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "mdsim/defense.hpp"
#include "mdsim/detector.hpp"
#include "mdsim/misbehavior.hpp"
#include "mdsim/platoon.hpp"
#include "mdsim/veremi.hpp"

namespace mdsim {

struct SimConfig {
  PlatoonParams platoon;
  GapControlParams gap;
  double physics_step = 0.01;
  double beacon_interval = 0.1;
  double duration = 120.0;
  int platoon_size = 4;
  bool defense_enabled = false;
  bool detection_enabled = true;  // with defense on: false reacts only to forced alarms and warnings
  std::optional<MisbehaviorSpec> misbehavior;
  std::optional<double> forced_alarm_time;  // raise the alarm on one vehicle without a detection
  int forced_alarm_vehicle = 1;
  std::uint64_t seed = 1;  // radar noise stream
  bool record_trace = false;
  int trace_every = 10;  // physics steps between trace rows
  std::vector<int> harvest_receivers;  // record front beacons received by these vehicles

  int steps_per_beacon() const { return static_cast<int>(std::llround(beacon_interval / physics_step)); }
  long total_steps() const { return std::lround(duration / physics_step); }
  long step_of(double t) const { return std::lround(t / physics_step); }

  void validate() const {
    if (!(physics_step > 0.0) || !(beacon_interval > 0.0) || !(duration > 0.0)) {
      throw ConfigError("time steps and duration must be positive");
    }
    const double ratio = beacon_interval / physics_step;
    if (ratio < 1.0 - 1e-9 || std::fabs(ratio - std::round(ratio)) > 1e-9) {
      throw ConfigError("beacon interval must be an integer multiple of the physics step");
    }
    if (platoon_size < 2) throw ConfigError("platoon needs a leader and at least one follower");
    if (misbehavior) misbehavior->validate(platoon_size);
    if (forced_alarm_time && (forced_alarm_vehicle < 0 || forced_alarm_vehicle >= platoon_size)) {
      throw ConfigError("forced alarm vehicle out of range");
    }
    if (trace_every < 1) throw ConfigError("trace_every must be >= 1");
    if (!(gap.delta_g > 0.0) || !(gap.delta_t > 0.0)) throw ConfigError("gap ramp rates must be positive");
    const auto& p = platoon;
    if (!(p.ploeg_headway > 0.0) || !(p.acc_headway > 0.0) || !(p.accel_min < 0.0) || !(p.accel_max > 0.0) ||
        !(p.vehicle_length > 0.0) || p.radar_noise_sigma < 0.0) {
      throw ConfigError("invalid platoon parameters");
    }
  }
};

struct PredictionEvent {
  double time = 0.0;  // send time of the window's last beacon
  int vehicle = 0;
  int sender = 0;
  Label label = Label::regular;
};

struct TransitionEvent {
  double time = 0.0;
  int vehicle = 0;
  FsmState from = FsmState::following;
  FsmState to = FsmState::gap_control;
  TransitionCause cause = TransitionCause::prediction;
};

struct TraceRow {
  double t = 0.0;
  int index = 0;
  double x = 0.0, v = 0.0, a = 0.0;
  ControllerMode controller = ControllerMode::ploeg;
  FsmState fsm = FsmState::following;
  std::optional<double> front_distance;
};

struct SimResult {
  std::vector<PredictionEvent> predictions;
  std::vector<TransitionEvent> transitions;
  std::vector<CollisionEvent> collisions;
  std::vector<std::size_t> beacons_sent;
  std::vector<veremi::CanonicalRecord> harvested;
  std::vector<TraceRow> trace;
  double min_command = std::numeric_limits<double>::infinity();
  double max_command = -std::numeric_limits<double>::infinity();
  std::size_t replay_fallbacks = 0;
  std::size_t stale_holds = 0;  // physics steps where a follower held u on stale beacons
  std::vector<VehicleState> final_state;
};

namespace detail {

class Engine {
 public:
  Engine(const SimConfig& cfg, const DetectorModel* model)
      : cfg_(cfg), p_(cfg.platoon), model_(model), n_(cfg.platoon_size), spb_(cfg.steps_per_beacon()) {
    cfg_.validate();
    if (cfg_.defense_enabled && cfg_.detection_enabled && model_ == nullptr) throw ConfigError("defense enabled but no detector model given");
    veh_ = initial_platoon(n_, p_);
    front_.resize(n_);
    for (int i = 1; i < n_; ++i) front_[i] = {veh_[i - 1].x, veh_[i - 1].v, 0.0, 0.0};
    fsm_.resize(n_);
    gap_.resize(n_);
    next_gap_step_.assign(n_, -1);
    spacing_.assign(n_, SpacingPolicy{p_.ploeg_headway, p_.standstill, false});
    windows_.resize(n_);
    cache_.assign(n_, std::vector<std::optional<BeaconMessage>>(n_));
    harvest_.assign(n_, false);
    for (int r : cfg_.harvest_receivers) {
      if (r < 0 || r >= n_) throw ConfigError("harvest receiver out of range");
      harvest_[r] = true;
    }
    res_.beacons_sent.assign(n_, 0);
    radar_rng_.seed(derive_seed(cfg_.seed, 0x7261646172ULL));
    gap_period_ = std::max<long>(1, std::lround(cfg_.gap.delta_t / cfg_.physics_step));
    if (cfg_.misbehavior) activation_step_ = cfg_.step_of(cfg_.misbehavior->activation_time);
    if (cfg_.defense_enabled && cfg_.forced_alarm_time) forced_step_ = cfg_.step_of(*cfg_.forced_alarm_time);
  }

  SimResult run() {
    const long steps = cfg_.total_steps();
    const double dt = cfg_.physics_step;
    std::vector<double> cmd(n_);
    for (long s = 1; s <= steps; ++s) {
      const double t_prev = static_cast<double>(s - 1) * dt;
      const double t = static_cast<double>(s) * dt;
      for (int i = 0; i < n_; ++i) cmd[i] = control(i, t_prev);
      step_physics(veh_, cmd, dt);
      for (auto& e : detect_collisions(veh_, t)) res_.collisions.push_back(e);

      if (cfg_.misbehavior && s == activation_step_) {
        const int a = cfg_.misbehavior->vehicle_index;
        ctx_ = activate(*cfg_.misbehavior, true_beacon(a, t), n_);
      }
      if (s % spb_ == 0) beacon_round(t);
      for (int i = 0; i < n_; ++i) {
        if (fsm_[i].state == FsmState::gap_control && gap_[i] && next_gap_step_[i] == s) gap_update(i, s, t);
      }
      if (forced_step_ && s == *forced_step_) alarm(cfg_.forced_alarm_vehicle, TransitionCause::forced, s, t);
      if (cfg_.record_trace && s % cfg_.trace_every == 0) trace(t);
    }
    res_.replay_fallbacks = ctx_.fallbacks;
    res_.final_state = veh_;
    return std::move(res_);
  }

 private:
  RadarReading radar(int i) {
    return radar_measure(veh_[i], veh_[i - 1], p_.radar_noise_sigma, radar_rng_);
  }

  double control(int i, double t) {
    auto& self = veh_[i];
    if (self.crashed) return 0.0;
    double a = 0.0;
    switch (self.controller) {
      case ControllerMode::leader_cruise:
        a = leader_control(t, self.v, p_);
        self.desired_accel = a;
        break;
      case ControllerMode::ploeg:
        if (t - front_[i].time > 2.0 * cfg_.beacon_interval + 1e-9) {
          ++res_.stale_holds;
        } else {
          self.desired_accel = ploeg_control(self, front_[i], veh_[i - 1].length, t, spacing_[i],
                                             {p_.ploeg_kp, p_.ploeg_kd}, cfg_.physics_step, p_);
        }
        a = self.desired_accel;
        break;
      case ControllerMode::ploeg_radar_degraded:
        self.desired_accel = ploeg_radar_control(self, radar(i), spacing_[i], {p_.ploeg_kp, p_.ploeg_kd},
                                                 cfg_.physics_step, p_);
        a = self.desired_accel;
        break;
      case ControllerMode::acc:
        a = acc_control(self, radar(i), p_.acc_headway, p_);
        self.desired_accel = a;
        break;
    }
    res_.min_command = std::min(res_.min_command, a);
    res_.max_command = std::max(res_.max_command, a);
    return a;
  }

  BeaconMessage true_beacon(int i, double t) const {
    const auto& s = veh_[i];
    BeaconMessage b;
    b.sender = i;
    b.send_time = t;
    b.posx = s.x;
    b.posy = p_.lane_y;
    b.spdx = s.v;
    b.spdy = 0.0;
    b.acl = s.a;
    b.heading = 0.0;
    b.desired_accel = s.desired_accel;
    b.warning = fsm_[i].warning;
    return b;
  }

  void beacon_round(double t) {
    const long s = cfg_.step_of(t);
    std::vector<BeaconMessage> tx(n_);
    std::vector<Label> truth_label(n_, Label::regular);
    for (int i = 0; i < n_; ++i) {
      tx[i] = true_beacon(i, t);
      if (cfg_.misbehavior && i == cfg_.misbehavior->vehicle_index && ctx_.active) {
        const BeaconMessage truth = tx[i];
        tx[i] = falsify_beacon(*cfg_.misbehavior, ctx_, truth, cache_[i]);
        // same rule as the log ingest: a message is misbehaving when its
        // position or speed differs from the sender's true state
        if (veremi::differs(tx[i].posx, truth.posx) || veremi::differs(tx[i].posy, truth.posy) ||
            veremi::differs(tx[i].spdx, truth.spdx) || veremi::differs(tx[i].spdy, truth.spdy)) {
          truth_label[i] = cfg_.misbehavior->kind;
        }
      }
      ++res_.beacons_sent[i];
    }
    for (int r = 0; r < n_; ++r) {
      for (int k = 0; k < n_; ++k) {
        if (k != r) receive(r, tx[k], truth_label[k], s, t);
      }
    }
  }

  void receive(int r, const BeaconMessage& b, Label truth, long s, double t) {
    cache_[r][b.sender] = b;
    std::optional<Label> prediction;
    if (b.sender == r - 1) {
      auto& f = front_[r];
      if (b.send_time > f.time) {
        f.v = (b.posx - f.x) / (b.send_time - f.time);
        f.x = b.posx;
        f.time = b.send_time;
      }
      f.desired_accel = b.desired_accel;
      if (harvest_[r]) {
        res_.harvested.push_back({r, b.sender, b.send_time, b.posx, b.posy, b.spdx, b.spdy, b.acl, b.heading, truth});
      }
      if (cfg_.defense_enabled && cfg_.detection_enabled && fsm_[r].state == FsmState::following) {
        prediction = online_observe(windows_[r], b.kinematics(), *model_);
        if (prediction) res_.predictions.push_back({b.send_time, r, b.sender, *prediction});
      }
    }
    if (!cfg_.defense_enabled) return;
    if (auto cause = alarm_cause(fsm_[r], prediction, b.warning)) alarm(r, *cause, s, t);
  }

  void alarm(int i, TransitionCause cause, long s, double t) {
    if (!raise_alarm(fsm_[i])) return;
    windows_[i].clear();
    res_.transitions.push_back({t, i, FsmState::following, FsmState::gap_control, cause});
    if (i == 0) {
      // no predecessor to open a gap to
      fsm_[i].state = FsmState::downgrade;
      res_.transitions.push_back({t, i, FsmState::gap_control, FsmState::downgrade, TransitionCause::leader});
      return;
    }
    const RadarReading rd = radar(i);
    gap_[i] = start_gap_control(p_.acc_headway, p_.standstill, veh_[i].v, rd.distance, cfg_.gap);
    veh_[i].controller = ControllerMode::ploeg_radar_degraded;
    gap_update(i, s, t);
  }

  void push_spacing(int i) {
    const auto& g = *gap_[i];
    // the Ploeg law divides by the headway
    spacing_[i] = {std::max(g.cur_head, 0.05), g.cur_gap, g.mode == SpacingMode::fixed_gap};
  }

  void gap_update(int i, long s, double t) {
    const RadarReading rd = radar(i);
    if (update_gap(*gap_[i], veh_[i].v, rd.distance) == GapUpdate::reached) {
      fsm_[i].state = FsmState::downgrade;
      veh_[i].controller = ControllerMode::acc;
      gap_[i].reset();
      next_gap_step_[i] = -1;
      res_.transitions.push_back({t, i, FsmState::gap_control, FsmState::downgrade, TransitionCause::gap_reached});
      return;
    }
    push_spacing(i);
    next_gap_step_[i] = s + gap_period_;
  }

  void trace(double t) {
    for (int i = 0; i < n_; ++i) {
      TraceRow row{t, i, veh_[i].x, veh_[i].v, veh_[i].a, veh_[i].controller, fsm_[i].state, std::nullopt};
      if (i > 0) row.front_distance = bumper_gap(veh_[i], veh_[i - 1]);
      res_.trace.push_back(row);
    }
  }

  SimConfig cfg_;
  PlatoonParams p_;
  const DetectorModel* model_;
  int n_;
  int spb_;
  long gap_period_ = 10;
  long activation_step_ = -1;
  std::optional<long> forced_step_;
  std::vector<VehicleState> veh_;
  std::vector<FrontData> front_;
  std::vector<DefenseFsmState> fsm_;
  std::vector<std::optional<GapControlState>> gap_;
  std::vector<long> next_gap_step_;
  std::vector<SpacingPolicy> spacing_;
  std::vector<OnlineWindowState> windows_;
  std::vector<std::vector<std::optional<BeaconMessage>>> cache_;
  std::vector<bool> harvest_;
  MisbehaviorContext ctx_;
  std::mt19937_64 radar_rng_;
  SimResult res_;
};

}  // namespace detail

inline SimResult simulate(const SimConfig& cfg, const DetectorModel* model = nullptr) {
  return detail::Engine(cfg, model).run();
}

inline void write_trace(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "t,index,x,v,a,controller,fsm,front_distance\n";
  for (const auto& r : rows) {
    os << fmt_fixed(r.t, 2) << ',' << r.index << ',' << fmt_double(r.x) << ',' << fmt_double(r.v) << ','
       << fmt_double(r.a) << ',' << controller_name(r.controller) << ',' << fsm_name(r.fsm) << ',';
    if (r.front_distance) os << fmt_double(*r.front_distance);
    os << '\n';
  }
}

}  // namespace mdsim
