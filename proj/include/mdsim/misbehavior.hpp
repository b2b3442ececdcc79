#pragma once

// Beacon falsification for one misbehaving vehicle. Only transmitted bytes
// are touched; the vehicle keeps driving on its true state.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include "mdsim/core.hpp"
#include "mdsim/features.hpp"

namespace mdsim {

struct BeaconMessage {
  int sender = 0;
  double send_time = 0.0;
  double posx = 0.0, posy = 0.0;
  double spdx = 0.0, spdy = 0.0;
  double acl = 0.0;
  double heading = 0.0;  // degrees
  double desired_accel = 0.0;
  bool warning = false;

  Kinematics kinematics() const { return {send_time, posx, posy, spdx, spdy, acl}; }
  bool operator==(const BeaconMessage&) const = default;
};

struct MisbehaviorSpec {
  Label kind = Label::const_pos;
  int vehicle_index = 0;
  int activation_time = 15;  // s
  std::uint64_t seed = 0;

  void validate(int platoon_size) const {
    if (!is_misbehavior(kind)) throw ConfigError("misbehavior kind must be one of the eight attack labels");
    if (vehicle_index < 0 || vehicle_index >= platoon_size - 1) {
      throw ConfigError("misbehaving vehicle " + std::to_string(vehicle_index) +
                        " must be in [0, " + std::to_string(platoon_size - 2) + "]");
    }
    if (activation_time < 0) throw ConfigError("activation time must be non-negative");
  }
};

// Values frozen at activation plus the per-run random stream.
struct MisbehaviorContext {
  bool active = false;
  double const_posx = 0.0, const_posy = 0.0;
  int offset_x = 0, offset_y = 0;  // posOffset (m) or spdOffset (m/s)
  int replay_target = -1;
  std::mt19937_64 rng;
  std::size_t fallbacks = 0;  // replay steps served with the true beacon
};

inline int draw_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline int draw_other_member(std::mt19937_64& rng, int platoon_size, int self) {
  if (platoon_size < 2) throw ConfigError("replay needs at least two platoon members");
  // uniform over the platoon_size - 1 other members
  int k = draw_int(rng, 0, platoon_size - 2);
  return k >= self ? k + 1 : k;
}

inline MisbehaviorContext activate(const MisbehaviorSpec& spec, const BeaconMessage& truth, int platoon_size) {
  MisbehaviorContext ctx;
  ctx.rng.seed(spec.seed);
  ctx.active = true;
  switch (spec.kind) {
    case Label::const_pos:
      ctx.const_posx = truth.posx;
      ctx.const_posy = truth.posy;
      break;
    case Label::pos_offset:
      ctx.offset_x = draw_int(ctx.rng, -10, 10);
      ctx.offset_y = draw_int(ctx.rng, -10, 10);
      break;
    case Label::spd_offset:
      ctx.offset_x = draw_int(ctx.rng, -8, 8);
      ctx.offset_y = draw_int(ctx.rng, -8, 8);
      break;
    case Label::data_replay:
      ctx.replay_target = draw_other_member(ctx.rng, platoon_size, spec.vehicle_index);
      break;
    default:
      break;
  }
  return ctx;
}

// neighbor_cache[i] is the last beacon received from member i (as it was
// transmitted, so possibly falsified itself).
inline BeaconMessage falsify_beacon(const MisbehaviorSpec& spec, MisbehaviorContext& ctx,
                                    const BeaconMessage& truth,
                                    std::span<const std::optional<BeaconMessage>> neighbor_cache) {
  if (!ctx.active) return truth;
  BeaconMessage b = truth;
  auto replay = [&](int target) {
    if (target < 0 || target >= static_cast<int>(neighbor_cache.size()) || !neighbor_cache[target]) {
      ++ctx.fallbacks;
      return;
    }
    const BeaconMessage& src = *neighbor_cache[target];
    b.posx = src.posx;
    b.posy = src.posy;
    b.spdx = src.spdx;
    b.spdy = src.spdy;
    b.acl = src.acl;
    b.heading = src.heading;
  };
  switch (spec.kind) {
    case Label::const_pos:
      b.posx = ctx.const_posx;
      b.posy = ctx.const_posy;
      break;
    case Label::random_pos:
      b.posx = draw_int(ctx.rng, 0, 10000);
      b.posy = draw_int(ctx.rng, 0, 10000);
      break;
    case Label::pos_offset:
      b.posx += ctx.offset_x;
      b.posy += ctx.offset_y;
      break;
    case Label::random_speed:
      b.spdx = draw_int(ctx.rng, -200, 200);
      b.spdy = draw_int(ctx.rng, -200, 200);
      break;
    case Label::spd_offset:
      b.spdx += ctx.offset_x;
      b.spdy += ctx.offset_y;
      break;
    case Label::eventual_stop:
      b.posx = b.posy = 0.0;
      b.spdx = b.spdy = 0.0;
      b.acl = 0.0;
      break;
    case Label::disruptive:
      replay(draw_other_member(ctx.rng, static_cast<int>(neighbor_cache.size()), spec.vehicle_index));
      break;
    case Label::data_replay:
      replay(ctx.replay_target);
      break;
    case Label::regular:
      break;
  }
  b.sender = truth.sender;
  b.send_time = truth.send_time;
  return b;
}

}  // namespace mdsim
