#pragma once

// Longitudinal platoon dynamics on a single lane: sinusoidal leader, Ploeg
// CACC followers, radar model, ACC fallback and collision detection.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "mdsim/core.hpp"

namespace mdsim {

enum class ControllerMode { leader_cruise, ploeg, ploeg_radar_degraded, acc };

inline std::string_view controller_name(ControllerMode m) {
  switch (m) {
    case ControllerMode::leader_cruise: return "LEADER_CRUISE";
    case ControllerMode::ploeg: return "PLOEG";
    case ControllerMode::ploeg_radar_degraded: return "PLOEG_RADAR_DEGRADED";
    case ControllerMode::acc: return "ACC";
  }
  return "?";
}

struct PlatoonParams {
  double leader_speed = 27.778;      // 100 km/h
  double leader_amplitude = 1.389;   // 5 km/h, peak
  double leader_frequency = 0.1;     // Hz
  double leader_gain = 1.0;          // 1/s, speed tracking
  double vehicle_length = 4.0;
  double ploeg_kp = 0.2;
  double ploeg_kd = 0.7;
  double ploeg_headway = 0.5;
  double standstill = 2.0;           // r for Ploeg, d0 for ACC
  double acc_headway = 1.2;
  double acc_lambda = 0.1;
  double accel_min = -6.0;
  double accel_max = 2.5;
  double lane_y = 0.0;
  double radar_noise_sigma = 0.0;

  double clamp_accel(double a) const { return std::clamp(a, accel_min, accel_max); }
  double ploeg_gap(double v) const { return standstill + ploeg_headway * v; }
  double acc_gap(double v) const { return standstill + acc_headway * v; }
};

inline double leader_speed(double t, const PlatoonParams& p) {
  return p.leader_speed + p.leader_amplitude * std::sin(2.0 * std::numbers::pi * p.leader_frequency * t);
}

inline double leader_speed_rate(double t, const PlatoonParams& p) {
  const double w = 2.0 * std::numbers::pi * p.leader_frequency;
  return p.leader_amplitude * w * std::cos(w * t);
}

// Feed-forward of the reference slope plus proportional speed error.
inline double leader_control(double t, double v, const PlatoonParams& p) {
  return p.clamp_accel(leader_speed_rate(t, p) + p.leader_gain * (leader_speed(t, p) - v));
}

struct VehicleState {
  int index = 0;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  double length = 4.0;
  ControllerMode controller = ControllerMode::ploeg;
  double desired_accel = 0.0;  // controller output u, transmitted in beacons
  bool crashed = false;
};

// What the controller knows about the predecessor.
struct FrontData {
  double x = 0.0;              // rear-bumper reference: front position as reported
  double v = 0.0;
  double desired_accel = 0.0;
  double time = 0.0;           // when the information was valid
};

struct SpacingPolicy {
  double headway = 0.5;
  double standstill = 2.0;
  bool fixed_gap = false;  // desired distance = standstill; headway only sets the time constant

  double desired(double v) const { return fixed_gap ? standstill : standstill + headway * v; }
};

struct PloegGains {
  double kp = 0.2;
  double kd = 0.7;
};

// Ploeg desired-acceleration dynamics:
//   e  = gap - (r + h v)
//   e' = (v_front - v) - h a
//   h u' = -u + kp e + kd e' + u_front
inline double ploeg_rate(double u, double gap, double rel_speed, double v_self, double a_self,
                         double u_front, const SpacingPolicy& sp, const PloegGains& g) {
  const double e = gap - sp.desired(v_self);
  const double e_dot = rel_speed - sp.headway * a_self;
  return (-u + g.kp * e + g.kd * e_dot + u_front) / sp.headway;
}

// One physics step of the Ploeg law; returns the new clamped desired
// acceleration.
inline double ploeg_control(const VehicleState& self, const FrontData& front, double front_length,
                            double now, const SpacingPolicy& sp, const PloegGains& g, double dt,
                            const PlatoonParams& p) {
  const double front_x = front.x + front.v * (now - front.time);
  const double gap = front_x - front_length - self.x;
  const double rate =
      ploeg_rate(self.desired_accel, gap, front.v - self.v, self.v, self.a, front.desired_accel, sp, g);
  return p.clamp_accel(self.desired_accel + dt * rate);
}

struct RadarReading {
  double distance = 0.0;        // front bumper to predecessor's rear bumper
  double relative_speed = 0.0;  // v_front - v_self
};

inline RadarReading radar_measure(const VehicleState& self, const VehicleState& front) {
  return {front.x - front.length - self.x, front.v - self.v};
}

inline RadarReading radar_measure(const VehicleState& self, const VehicleState& front, double sigma,
                                  std::mt19937_64& rng) {
  RadarReading r = radar_measure(self, front);
  if (sigma > 0.0) {
    std::normal_distribution<double> n(0.0, sigma);
    r.distance += n(rng);
    r.relative_speed += n(rng);
  }
  return r;
}

// Ploeg with radar inputs and no acceleration feed-forward.
inline double ploeg_radar_control(const VehicleState& self, const RadarReading& radar,
                                  const SpacingPolicy& sp, const PloegGains& g, double dt,
                                  const PlatoonParams& p) {
  const double rate =
      ploeg_rate(self.desired_accel, radar.distance, radar.relative_speed, self.v, self.a, 0.0, sp, g);
  return p.clamp_accel(self.desired_accel + dt * rate);
}

//   eps = -(d - d0) + T v
//   a   = -(1/T) (-rel_speed + lambda eps)
inline double acc_control(const VehicleState& self, const RadarReading& radar, double headway,
                          const PlatoonParams& p) {
  const double eps = -(radar.distance - p.standstill) + headway * self.v;
  return p.clamp_accel(-(1.0 / headway) * (-radar.relative_speed + p.acc_lambda * eps));
}

// Semi-implicit Euler. accelerations[i] is the command for vehicle i.
inline void step_physics(std::span<VehicleState> vehicles, std::span<const double> accelerations, double dt) {
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    auto& s = vehicles[i];
    if (s.crashed) {
      s.v = 0.0;
      s.a = 0.0;
      continue;
    }
    s.a = accelerations[i];
    s.v = std::max(0.0, s.v + s.a * dt);
    s.x += s.v * dt;
  }
}

struct CollisionEvent {
  double time = 0.0;
  int rear = 0;
  int front = 0;
  double overlap = 0.0;  // bumper gap at detection (<= 0)
};

inline double bumper_gap(const VehicleState& rear, const VehicleState& front) {
  return front.x - front.length - rear.x;
}

// Vehicles are ordered by index (0 = leader). A pair is reported once: both
// vehicles are stopped and flagged as crashed.
inline std::vector<CollisionEvent> detect_collisions(std::span<VehicleState> vehicles, double t) {
  std::vector<CollisionEvent> events;
  for (std::size_t i = 1; i < vehicles.size(); ++i) {
    auto& front = vehicles[i - 1];
    auto& rear = vehicles[i];
    if (rear.crashed && front.crashed) continue;
    const double gap = bumper_gap(rear, front);
    if (gap <= 0.0) {
      events.push_back({t, rear.index, front.index, gap});
      for (auto* s : {&front, &rear}) {
        s->crashed = true;
        s->v = 0.0;
        s->a = 0.0;
        s->desired_accel = 0.0;
      }
    }
  }
  return events;
}

// Platoon at equilibrium spacing for the Ploeg policy, leader first; the last
// vehicle starts at x = 0.
inline std::vector<VehicleState> initial_platoon(int size, const PlatoonParams& p) {
  std::vector<VehicleState> out(size);
  const double v0 = leader_speed(0.0, p);
  const double pitch = p.ploeg_gap(v0) + p.vehicle_length;
  for (int i = 0; i < size; ++i) {
    auto& s = out[i];
    s.index = i;
    s.length = p.vehicle_length;
    s.v = v0;
    s.x = static_cast<double>(size - 1 - i) * pitch;
    s.controller = i == 0 ? ControllerMode::leader_cruise : ControllerMode::ploeg;
  }
  return out;
}

}  // namespace mdsim
