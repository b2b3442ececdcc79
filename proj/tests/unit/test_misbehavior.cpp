#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mdsim/misbehavior.hpp"
#include "mdsim/simulation.hpp"

using namespace mdsim;

namespace {

BeaconMessage truth_at(double t, int sender = 1) {
  BeaconMessage b;
  b.sender = sender;
  b.send_time = t;
  b.posx = 1000 + 27.8 * t;
  b.posy = 5.2;
  b.spdx = 27.8 + 0.1 * t;
  b.spdy = 0.0;
  b.acl = 0.3;
  b.desired_accel = 0.25;
  return b;
}

MisbehaviorSpec spec(Label kind, std::uint64_t seed = 3, int vehicle = 1) {
  MisbehaviorSpec s;
  s.kind = kind;
  s.vehicle_index = vehicle;
  s.activation_time = 20;
  s.seed = seed;
  return s;
}

std::vector<std::optional<BeaconMessage>> full_cache(int n, double t) {
  std::vector<std::optional<BeaconMessage>> c(n);
  for (int i = 0; i < n; ++i) {
    BeaconMessage b = truth_at(t, i);
    b.posx = 5000 + 100 * i;
    b.spdx = 10 + i;
    b.heading = 3.0 * i;
    c[i] = b;
  }
  return c;
}

bool kinematics_differ(const BeaconMessage& a, const BeaconMessage& b) {
  return a.posx != b.posx || a.posy != b.posy || a.spdx != b.spdx || a.spdy != b.spdy || a.acl != b.acl;
}

}  // namespace

TEST(Activate, ConstPosSnapshot) {
  BeaconMessage t0 = truth_at(20);
  t0.posx = 1234.5;
  t0.posy = 5.2;
  auto s = spec(Label::const_pos);
  auto ctx = activate(s, t0, 4);
  std::vector<std::optional<BeaconMessage>> cache(4);
  for (int k = 1; k < 30; ++k) {
    auto b = falsify_beacon(s, ctx, truth_at(20 + 0.1 * k), cache);
    EXPECT_EQ(b.posx, 1234.5);
    EXPECT_EQ(b.posy, 5.2);
    EXPECT_EQ(b.spdx, truth_at(20 + 0.1 * k).spdx);
  }
}

TEST(Activate, OffsetsDrawnOnceWithinBounds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto p = activate(spec(Label::pos_offset, seed), truth_at(20), 4);
    EXPECT_LE(std::abs(p.offset_x), 10);
    EXPECT_LE(std::abs(p.offset_y), 10);
    auto s = activate(spec(Label::spd_offset, seed), truth_at(20), 4);
    EXPECT_LE(std::abs(s.offset_x), 8);
    EXPECT_LE(std::abs(s.offset_y), 8);
  }
  auto s = spec(Label::pos_offset, 9);
  auto ctx = activate(s, truth_at(20), 4);
  std::vector<std::optional<BeaconMessage>> cache(4);
  for (int k = 0; k < 20; ++k) {
    auto t = truth_at(20 + 0.1 * k);
    auto b = falsify_beacon(s, ctx, t, cache);
    EXPECT_EQ(b.posx - t.posx, ctx.offset_x);
    EXPECT_EQ(b.posy - t.posy, ctx.offset_y);
  }
}

TEST(Activate, ReplayTargetFixedAndNotSelf) {
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto ctx = activate(spec(Label::data_replay, seed, 2), truth_at(20, 2), 5);
    EXPECT_NE(ctx.replay_target, 2);
    EXPECT_GE(ctx.replay_target, 0);
    EXPECT_LT(ctx.replay_target, 5);
    seen.insert(ctx.replay_target);
  }
  EXPECT_EQ(seen, (std::set<int>{0, 1, 3, 4}));
  auto s = spec(Label::data_replay, 4);
  auto ctx = activate(s, truth_at(20), 4);
  const int target = ctx.replay_target;
  auto cache = full_cache(4, 20);
  for (int k = 0; k < 20; ++k) {
    auto b = falsify_beacon(s, ctx, truth_at(20 + 0.1 * k), cache);
    EXPECT_EQ(ctx.replay_target, target);
    EXPECT_EQ(b.posx, cache[target]->posx);
    EXPECT_EQ(b.heading, cache[target]->heading);
  }
}

TEST(Falsify, EventualStopZeroes) {
  auto s = spec(Label::eventual_stop);
  auto ctx = activate(s, truth_at(20), 4);
  std::vector<std::optional<BeaconMessage>> cache(4);
  auto b = falsify_beacon(s, ctx, truth_at(21), cache);
  EXPECT_EQ(b.posx, 0.0);
  EXPECT_EQ(b.posy, 0.0);
  EXPECT_EQ(b.spdx, 0.0);
  EXPECT_EQ(b.spdy, 0.0);
  EXPECT_EQ(b.acl, 0.0);
}

TEST(Falsify, RandomKindsInRangeAndFresh) {
  auto rs = spec(Label::random_speed);
  auto rp = spec(Label::random_pos);
  auto cs = activate(rs, truth_at(20), 4);
  auto cp = activate(rp, truth_at(20), 4);
  std::vector<std::optional<BeaconMessage>> cache(4);
  std::set<double> xs;
  for (int k = 0; k < 500; ++k) {
    auto a = falsify_beacon(rs, cs, truth_at(20 + 0.1 * k), cache);
    EXPECT_GE(a.spdx, -200);
    EXPECT_LE(a.spdx, 200);
    EXPECT_GE(a.spdy, -200);
    EXPECT_LE(a.spdy, 200);
    EXPECT_EQ(a.spdx, std::round(a.spdx));
    auto b = falsify_beacon(rp, cp, truth_at(20 + 0.1 * k), cache);
    EXPECT_GE(b.posx, 0);
    EXPECT_LE(b.posx, 10000);
    EXPECT_GE(b.posy, 0);
    EXPECT_LE(b.posy, 10000);
    xs.insert(b.posx);
  }
  EXPECT_GT(xs.size(), 400u);
}

TEST(Falsify, DisruptivePicksFreshMember) {
  auto s = spec(Label::disruptive, 5, 1);
  auto ctx = activate(s, truth_at(20), 6);
  auto cache = full_cache(6, 20);
  std::set<double> sources;
  for (int k = 0; k < 200; ++k) {
    auto b = falsify_beacon(s, ctx, truth_at(20 + 0.1 * k), cache);
    EXPECT_NE(b.posx, cache[1]->posx);  // never itself
    sources.insert(b.posx);
  }
  EXPECT_EQ(sources.size(), 5u);
}

TEST(Falsify, EmptyCacheFallsBack) {
  for (Label k : {Label::disruptive, Label::data_replay}) {
    auto s = spec(k);
    auto ctx = activate(s, truth_at(20), 4);
    std::vector<std::optional<BeaconMessage>> cache(4);
    auto t = truth_at(21);
    auto b = falsify_beacon(s, ctx, t, cache);
    EXPECT_EQ(b, t);
    EXPECT_EQ(ctx.fallbacks, 1u);
  }
}

TEST(Falsify, InactiveIsIdentity) {
  MisbehaviorContext ctx;
  std::vector<std::optional<BeaconMessage>> cache(4);
  auto t = truth_at(3);
  for (Label k : {Label::const_pos, Label::random_pos, Label::eventual_stop, Label::data_replay})
    EXPECT_EQ(falsify_beacon(spec(k), ctx, t, cache), t);
}

TEST(Falsify, IdentityFieldsKeptAndFieldsDiffer) {
  for (int k = 1; k < kNumLabels; ++k) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto s = spec(label_from_int(k), seed);
      auto ctx = activate(s, truth_at(20), 4);
      auto cache = full_cache(4, 20);
      for (int step = 1; step < 30; ++step) {
        auto t = truth_at(20 + 0.1 * step);
        auto b = falsify_beacon(s, ctx, t, cache);
        EXPECT_EQ(b.sender, t.sender);
        EXPECT_EQ(b.send_time, t.send_time);
        EXPECT_EQ(b.desired_accel, t.desired_accel);
        EXPECT_EQ(b.warning, t.warning);
        // offsets of (0, 0) leave a posOffset/spdOffset beacon untouched
        const bool zero_offset = (s.kind == Label::pos_offset || s.kind == Label::spd_offset) &&
                                 ctx.offset_x == 0 && ctx.offset_y == 0;
        if (!zero_offset) {
          EXPECT_TRUE(kinematics_differ(b, t)) << label_name(s.kind) << " seed " << seed;
        }
      }
    }
  }
}

TEST(Falsify, SeededStreamReproducible) {
  for (int k = 1; k < kNumLabels; ++k) {
    auto s = spec(label_from_int(k), 77);
    auto c1 = activate(s, truth_at(20), 6);
    auto c2 = activate(s, truth_at(20), 6);
    auto cache = full_cache(6, 20);
    for (int step = 0; step < 50; ++step) {
      auto t = truth_at(20 + 0.1 * step);
      EXPECT_EQ(falsify_beacon(s, c1, t, cache), falsify_beacon(s, c2, t, cache));
    }
  }
}

TEST(MisbehaviorSpec, Validation) {
  auto s = spec(Label::const_pos, 1, 3);
  EXPECT_THROW(s.validate(4), ConfigError);  // last vehicle
  s.vehicle_index = 2;
  EXPECT_NO_THROW(s.validate(4));
  s.kind = Label::regular;
  EXPECT_THROW(s.validate(4), ConfigError);
  s.kind = Label::data_replay;
  s.activation_time = -1;
  EXPECT_THROW(s.validate(4), ConfigError);
}

TEST(Injection, TouchesOnlyTransmittedData) {
  // defense off: the attacker and everything ahead of it drive exactly as in
  // a clean run, whatever it transmits, until someone runs into the attacker
  SimConfig clean;
  clean.platoon_size = 5;
  clean.record_trace = true;
  const auto base = simulate(clean);
  for (int k = 1; k < kNumLabels; ++k) {
    SimConfig cfg = clean;
    cfg.misbehavior = spec(label_from_int(k), 11, 2);
    const auto r = simulate(cfg);
    ASSERT_EQ(r.trace.size(), base.trace.size());
    const double first_crash = r.collisions.empty() ? 1e9 : r.collisions.front().time;
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      if (r.trace[i].index > 2 || r.trace[i].t >= first_crash) continue;
      EXPECT_EQ(r.trace[i].x, base.trace[i].x);
      EXPECT_EQ(r.trace[i].v, base.trace[i].v);
    }
  }
}
