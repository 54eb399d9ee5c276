#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>

#include "mapless/config.hpp"
#include "mapless/error.hpp"

namespace mapless {
namespace {

TEST(Config, DefaultsValidate) {
  const Config c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.sim.camera.width, 160);
  EXPECT_EQ(c.sim.camera.height, 120);
  EXPECT_DOUBLE_EQ(c.sim.rate_hz, 30.0);
  EXPECT_EQ(c.fst.n_samples, 200u);
  EXPECT_EQ(c.fst.k_nn, 5u);
  EXPECT_NEAR(rad_to_deg(c.fst.alpha_threshold), 60.0, 1e-12);
  EXPECT_DOUBLE_EQ((c.sim.world.goal - c.sim.world.start).norm(), 18.0);
}

TEST(Config, JsonRoundTrip) {
  Config c;
  c.fst.n_samples = 321;
  c.limits.v_m = 3.5;
  c.planner.use_resampling = false;
  c.bench.i_obs = {60};
  c.sim.world.n_pillars = 5;
  c.sim.world.n_rings = 2;
  set_resolution(c, 640, 480);
  const Config r = config_from_json(config_to_json(c));
  EXPECT_EQ(r.fst.n_samples, 321u);
  EXPECT_DOUBLE_EQ(r.limits.v_m, 3.5);
  EXPECT_FALSE(r.planner.use_resampling);
  EXPECT_EQ(r.bench.i_obs, std::vector<int>{60});
  EXPECT_EQ(r.sim.camera.width, 640);
  EXPECT_EQ(r.sim.camera.height, 480);
  EXPECT_EQ(r.sim.world.n_pillars, 5);
  EXPECT_EQ(r.sim.world.n_rings, 2);
  EXPECT_NEAR(r.sim.camera.horizontal_fov, c.sim.camera.horizontal_fov, 1e-15);
  // Printing is a fixed point.
  EXPECT_EQ(config_to_json(r), config_to_json(c));
}

TEST(Config, MissingKeysKeepDefaults) {
  const Config c = config_from_json(R"({"fst": {"k_nn": 7}, "simworld": {"i_obs": 60}})");
  EXPECT_EQ(c.fst.k_nn, 7u);
  EXPECT_EQ(c.fst.n_samples, 200u);
  EXPECT_EQ(c.sim.world.n_pillars + c.sim.world.n_rings, 60);
  EXPECT_EQ(c.sim.world.i_obs, 60);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json(R"({"fst": {"n_sample": 7}})"), Error);
  EXPECT_THROW(config_from_json(R"({"fts": {}})"), Error);
  EXPECT_THROW(config_from_json(R"({"fst": {"k_nn": "five"}})"), Error);
  EXPECT_THROW(config_from_json(R"({"trajgen": {"v_max": -1}})"), Error);
  EXPECT_THROW(config_from_json("not json"), Error);
  EXPECT_THROW(config_from_json("[1, 2]"), Error);
}

TEST(Config, ParseResolution) {
  EXPECT_EQ(parse_resolution("640x480"), std::make_pair(640, 480));
  EXPECT_EQ(parse_resolution("160X120"), std::make_pair(160, 120));
  for (const char* bad : {"640", "x480", "640x", "0x10", "64 0x480", "640x480x2", "-1x5"}) {
    EXPECT_THROW(parse_resolution(bad), Error) << bad;
  }
}

TEST(Config, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "mapless_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"planner": {"horizon": 6.5}})";
  }
  EXPECT_DOUBLE_EQ(load_config(path).planner.horizon, 6.5);
  std::remove(path.c_str());
  try {
    load_config(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
}

}  // namespace
}  // namespace mapless
