#include <gtest/gtest.h>

#include <cmath>

#include "mdsim/defense.hpp"

using namespace mdsim;

TEST(Fsm, RaiseAlarmLatches) {
  DefenseFsmState f;
  EXPECT_FALSE(f.warning);
  EXPECT_FALSE(f.use_radar);
  EXPECT_TRUE(raise_alarm(f));
  EXPECT_EQ(f.state, FsmState::gap_control);
  EXPECT_TRUE(f.warning && f.use_radar);
  EXPECT_FALSE(raise_alarm(f));
  f.state = FsmState::downgrade;
  EXPECT_FALSE(raise_alarm(f));
  EXPECT_EQ(f.state, FsmState::downgrade);
  EXPECT_TRUE(f.warning && f.use_radar);
}

TEST(Fsm, AlarmCause) {
  DefenseFsmState f;
  EXPECT_EQ(alarm_cause(f, Label::pos_offset, false), TransitionCause::prediction);
  // warning acts without a prediction, e.g. two messages into a window
  EXPECT_EQ(alarm_cause(f, std::nullopt, true), TransitionCause::warning);
  EXPECT_EQ(alarm_cause(f, Label::regular, false), std::nullopt);
  EXPECT_EQ(alarm_cause(f, std::nullopt, false), std::nullopt);
  EXPECT_EQ(alarm_cause(f, Label::regular, true), TransitionCause::warning);
  f.state = FsmState::gap_control;
  EXPECT_EQ(alarm_cause(f, Label::const_pos, true), std::nullopt);
}

TEST(Fsm, Names) {
  for (auto s : {FsmState::following, FsmState::gap_control, FsmState::downgrade})
    EXPECT_EQ(fsm_from_name(fsm_name(s)), s);
  EXPECT_EQ(fsm_name(FsmState::gap_control), "GAP_CONTROL");
  for (auto c : {TransitionCause::prediction, TransitionCause::warning, TransitionCause::forced,
                 TransitionCause::gap_reached, TransitionCause::leader})
    EXPECT_EQ(cause_from_name(cause_name(c)), c);
  EXPECT_FALSE(fsm_from_name("nope"));
}

TEST(GapControl, StartAtCruise) {
  GapControlParams gp;
  const double v = 27.78;
  const double d = 2 + 0.5 * v;  // Ploeg equilibrium
  auto g = start_gap_control(1.2, 2.0, v, d, gp);
  EXPECT_NEAR(g.gap_t, 35.336, 1e-9);
  EXPECT_EQ(g.mode, SpacingMode::time_headway);
  EXPECT_TRUE(g.increasing);
  EXPECT_DOUBLE_EQ(g.cur_gap, 2.0);
  EXPECT_NEAR(g.cur_head, 0.5, 1e-12);
}

TEST(GapControl, DecreasingWhenAheadOfTarget) {
  auto g = start_gap_control(1.2, 2.0, 20.0, 60.0, {});
  EXPECT_FALSE(g.increasing);
  EXPECT_NEAR(g.cur_head, 2.9, 1e-12);
}

TEST(GapControl, ZeroSpeedUsesFixedGap) {
  auto g = start_gap_control(1.2, 2.0, 0.0, 7.0, {});
  EXPECT_EQ(g.mode, SpacingMode::fixed_gap);
  EXPECT_DOUBLE_EQ(g.gap_t, 2.0);
  EXPECT_DOUBLE_EQ(g.cur_gap, 7.0);
  EXPECT_FALSE(g.increasing);
  EXPECT_EQ(update_gap(g, 0.0, 7.0), GapUpdate::ramping);
  EXPECT_DOUBLE_EQ(g.cur_gap, 6.9);
  EXPECT_EQ(update_gap(g, 0.0, 1.9), GapUpdate::reached);
}

TEST(GapControl, RejectsNonPositiveRates) {
  EXPECT_THROW(start_gap_control(1.2, 2, 20, 12, {0.0, 0.1}), ConfigError);
  EXPECT_THROW(start_gap_control(1.2, 2, 20, 12, {1.0, -0.1}), ConfigError);
}

TEST(GapControl, AlreadyAtTargetReachesImmediately) {
  const double v = 25;
  auto g = start_gap_control(1.2, 2.0, v, 1.2 * v + 2.0, {});
  EXPECT_TRUE(gap_control_completed(g));
  EXPECT_EQ(update_gap(g, v, 1.2 * v + 2.0), GapUpdate::reached);
}

TEST(GapControl, RampDurationAtPointEight) {
  // (1.2 - 0.5) * 27.78 / 0.8 = 24.3 s of 0.1 s updates at constant speed
  const double v = 27.78;
  GapControlParams gp{0.8, 0.1};
  auto g = start_gap_control(1.2, 2.0, v, 2 + 0.5 * v, gp);
  int updates = 0;
  while (!gap_control_completed(g)) {
    ASSERT_EQ(update_gap(g, v, 2 + 0.5 * v), GapUpdate::ramping);
    ++updates;
    ASSERT_LT(updates, 1000);
  }
  EXPECT_NEAR(updates * 0.1, (1.2 - 0.5) * v / 0.8, 0.1);
  EXPECT_DOUBLE_EQ(g.cur_head, 1.2);  // clamped, not overshot
}

TEST(GapControl, RampMonotoneAndPinned) {
  for (double start_head : {0.3, 0.5, 2.0, 3.5}) {
    const double v = 22.0;
    auto g = start_gap_control(1.2, 2.0, v, 2 + start_head * v, {});
    double prev = std::fabs(g.head_t - g.cur_head);
    for (int k = 0; k < 1000; ++k) {
      // keep the physical distance away from the target so only the ramp moves
      const double d = g.increasing ? 2 + 0.1 * v : 2 + 5.0 * v;
      ASSERT_EQ(update_gap(g, v, d), GapUpdate::ramping);
      const double now = std::fabs(g.head_t - g.cur_head);
      EXPECT_LE(now, prev + 1e-15);
      prev = now;
    }
    EXPECT_EQ(g.cur_head, g.head_t);
  }
}

TEST(GapControl, ReachedWhenPhysicalGapArrives) {
  const double v = 27.78;
  auto g = start_gap_control(1.2, 2.0, v, 2 + 0.5 * v, {});
  EXPECT_EQ(update_gap(g, v, 20.0), GapUpdate::ramping);
  EXPECT_EQ(update_gap(g, v, 1.2 * v + 2.0 + 0.01), GapUpdate::reached);
}

TEST(GapControl, FixedGapBranch) {
  GapControlParams gp{1.0, 0.1};
  auto g = start_gap_control(1.2, 2.0, 10.0, 5.0, gp, SpacingMode::fixed_gap);
  EXPECT_EQ(g.mode, SpacingMode::fixed_gap);
  EXPECT_DOUBLE_EQ(g.cur_gap, 5.0);
  EXPECT_DOUBLE_EQ(g.gap_t, 14.0);
  EXPECT_TRUE(g.increasing);
  EXPECT_EQ(update_gap(g, 10.0, 5.0), GapUpdate::ramping);
  EXPECT_DOUBLE_EQ(g.cur_gap, 5.1);
  for (int k = 0; k < 200; ++k) update_gap(g, 10.0, 5.0);
  EXPECT_DOUBLE_EQ(g.cur_gap, 14.0);
  EXPECT_EQ(update_gap(g, 10.0, 14.0), GapUpdate::reached);
}

TEST(GapControl, RampHelpers) {
  EXPECT_DOUBLE_EQ(ramp_toward(0.5, 1.2, 0.3), 0.8);
  EXPECT_DOUBLE_EQ(ramp_toward(1.1, 1.2, 0.3), 1.2);
  EXPECT_DOUBLE_EQ(ramp_toward(2.0, 1.2, 0.3), 1.7);
  EXPECT_DOUBLE_EQ(ramp_toward(1.3, 1.2, 0.3), 1.2);
  EXPECT_EQ(sgn(0.0), 1.0);
  EXPECT_EQ(sgn(-2.0), -1.0);
}
