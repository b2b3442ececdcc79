#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mdsim/config.hpp"

using namespace mdsim;

namespace {

std::string dump(const Settings& st) {
  std::ostringstream os;
  dump_settings(os, st);
  return os.str();
}

}  // namespace

TEST(Config, DumpReadRoundTrip) {
  Settings st;
  apply_setting(st, "gap.delta_g", "0.8");
  apply_setting(st, "campaign.sizes", "4,8,16");
  apply_setting(st, "campaign.kinds", "constPos,dataReplay");
  apply_setting(st, "campaign.defense", "off");
  apply_setting(st, "sim.forced_alarm_time", "37.5");
  apply_setting(st, "train.scaler_fit", "balanced");
  apply_setting(st, "train.learning_rate", "0.0003");
  const std::string text = dump(st);
  Settings back;
  std::istringstream is(text);
  read_settings(is, back);
  EXPECT_EQ(dump(back), text);
  EXPECT_DOUBLE_EQ(back.sim.gap.delta_g, 0.8);
  EXPECT_EQ(back.matrix.sizes, (std::vector<int>{4, 8, 16}));
  EXPECT_EQ(back.matrix.kinds, (std::vector<Label>{Label::const_pos, Label::data_replay}));
  EXPECT_EQ(back.defense, (std::vector<bool>{false}));
  EXPECT_EQ(back.sim.forced_alarm_time, 37.5);
  EXPECT_EQ(back.pipeline.train.learning_rate, 0.0003);
  EXPECT_EQ(back.pipeline.scaler_fit, ScalerFit::balanced);
}

TEST(Config, DefaultsDumpEveryKeyOnce) {
  const std::string text = dump(Settings{});
  std::istringstream is(text);
  std::set<std::string> keys;
  std::string line;
  while (std::getline(is, line)) {
    const auto key = line.substr(0, line.find(" = "));
    EXPECT_TRUE(keys.insert(key).second) << key;
  }
  for (const char* k : {"gap.delta_g", "gap.delta_t", "campaign.ids.4", "campaign.ids.8", "campaign.ids.16",
                        "train.patience", "radar.noise_sigma", "acc.headway"})
    EXPECT_TRUE(keys.count(k)) << k;
  EXPECT_NE(text.find("gap.delta_g = 1\n"), std::string::npos);
  EXPECT_NE(text.find("sim.forced_alarm_time = none\n"), std::string::npos);
}

TEST(Config, UnknownKeyAndBadValue) {
  Settings st;
  EXPECT_THROW(apply_setting(st, "gap.delta", "1"), ConfigError);
  EXPECT_THROW(apply_setting(st, "gap.delta_g", "fast"), ConfigError);
  EXPECT_THROW(apply_setting(st, "gap.delta_g", "1.0x"), ConfigError);
  EXPECT_THROW(apply_setting(st, "campaign.kinds", "regular"), ConfigError);
  EXPECT_THROW(apply_setting(st, "campaign.kinds", "teleport"), ConfigError);
  EXPECT_THROW(apply_setting(st, "sim.defense_enabled", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(st, "campaign.ids.x", "1"), ConfigError);
  EXPECT_THROW(apply_assignment(st, "no equals sign"), ConfigError);
}

TEST(Config, FileSyntax) {
  Settings st;
  std::istringstream is(
      "# comment line\n"
      "\n"
      "  gap.delta_t =  0.2   # trailing comment\n"
      "campaign.ids.16 = 0, 7, 12\n"
      "campaign.ids.32=1\n");
  read_settings(is, st);
  EXPECT_DOUBLE_EQ(st.sim.gap.delta_t, 0.2);
  EXPECT_EQ(st.matrix.ids.at(16), (std::vector<int>{0, 7, 12}));
  EXPECT_EQ(st.matrix.ids.at(32), (std::vector<int>{1}));
  EXPECT_NE(dump(st).find("campaign.ids.32 = 1\n"), std::string::npos);
}

TEST(Config, ErrorNamesLine) {
  Settings st;
  std::istringstream is("gap.delta_g = 1\nbogus = 2\n");
  try {
    read_settings(is, st, "x.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(Config, SingleRunAndCampaignViews) {
  Settings st;
  apply_setting(st, "sim.misbehavior", "randomSpeed");
  apply_setting(st, "sim.misbehavior_vehicle", "2");
  apply_setting(st, "campaign.repetitions", "7");
  auto run = st.single_run();
  ASSERT_TRUE(run.misbehavior.has_value());
  EXPECT_EQ(run.misbehavior->kind, Label::random_speed);
  EXPECT_EQ(run.misbehavior->vehicle_index, 2);
  EXPECT_EQ(st.campaign().repetitions, 7);
  apply_setting(st, "sim.misbehavior", "regular");
  EXPECT_THROW(st.single_run(), ConfigError);
  EXPECT_THROW(load_settings("/nonexistent/mdsim.cfg"), InputError);
}
