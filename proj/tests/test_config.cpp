#include <gtest/gtest.h>

#include <sstream>

#include "dfc/config.hpp"
#include "dfc/error.hpp"

using namespace dfc;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("");
  const RunConfig d;
  EXPECT_EQ(c.train.gamma, d.train.gamma);
  EXPECT_EQ(c.env.horizon, 500);
  EXPECT_EQ(c.codec.max_level, 6);
  EXPECT_EQ(c.beta_grid_c, d.beta_grid_c);
}

TEST(Config, OverridesAndComments) {
  const RunConfig c = parse_config(
      "# run settings\n[train]\ngamma = 0.9   # discount\nbeta_grid_c = 0.01, 0.2\n[env]\nobs_mode = pixel\n");
  EXPECT_DOUBLE_EQ(c.train.gamma, 0.9);
  EXPECT_EQ(c.beta_grid_c, (std::vector<double>{0.01, 0.2}));
  EXPECT_EQ(c.env.obs_mode, ObsMode::kPixel);
}

TEST(Config, OutOfRangeValueNamesTheKey) {
  const std::string msg = message_of("[train]\ngamma = 1.5\n");
  EXPECT_NE(msg.find("gamma"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyIsRejected) {
  const std::string msg = message_of("[train]\ngama = 0.9\n");
  EXPECT_NE(msg.find("train.gama"), std::string::npos) << msg;
}

TEST(Config, MalformedLinesAreRejected) {
  EXPECT_FALSE(message_of("gamma = 0.9\n").empty());
  EXPECT_FALSE(message_of("[train\n").empty());
  EXPECT_FALSE(message_of("[train]\ngamma\n").empty());
  EXPECT_FALSE(message_of("[train]\ngamma = fast\n").empty());
  EXPECT_FALSE(message_of("[train]\nbeta_grid_a = 2, 1\n").empty());
  EXPECT_FALSE(message_of("[codec]\nnum_features = 3\n").empty());
}

TEST(Config, WriteParsesBackIdentically) {
  RunConfig c;
  set_config_value(c, "train.gamma", "0.925");
  set_config_value(c, "train.beta_grid_b", "0.002, 0.004");
  set_config_value(c, "run.seed", "17");
  set_config_value(c, "train.observer_aoi_input", "false");
  std::ostringstream out;
  write_config(out, c);
  const RunConfig back = parse_config(out.str());
  for (const auto& key : config_keys()) {
    EXPECT_EQ(get_config_value(back, key), get_config_value(c, key)) << key;
  }
}

TEST(Config, GetUnknownKeyThrows) {
  const RunConfig c;
  EXPECT_THROW(get_config_value(c, "train.nope"), Error);
}
