#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mapless/fst.hpp"
#include "mapless/picomap.hpp"
#include "mapless/simworld.hpp"
#include "mapless/trajgen.hpp"

namespace mapless {

struct SimConfig {
  CameraModel camera;
  double rate_hz = 30.0;
  double pose_noise_sigma = 0.0;  // additive Gaussian on the reported camera position (m)
  double r_drone = 0.2;
  WorldSpec world;
};

struct PlannerConfig {
  double replan_rate_hz = 10.0;
  double goal_tolerance = 0.5;
  double horizon = 8.0;
  // Sampling box ahead of the vehicle: length along the goal direction,
  // lateral width; the vertical extent is the flight volume height.
  double region_length = 8.0;
  double region_width = 8.0;
  double time_limit = 0.0;  // seconds; <= 0 selects 3x the optimistic straight-line time
  bool use_resampling = true;
  bool record_timing = true;  // wall-clock columns are zero when disabled
  std::uint64_t seed = 0;     // mixed with the trial seed for sampling
};

struct BenchConfig {
  std::vector<double> v_max{2.0, 3.0, 4.0};
  std::vector<int> i_obs{30, 60, 90};
  int trials_per_cell = 20;
  std::uint64_t base_seed = 1;
  int threads = 0;  // 0 = hardware concurrency
};

struct Config {
  PicoMapConfig picomap;
  FstParams fst;
  Limits limits;
  TrajParams traj;
  SimConfig sim;
  PlannerConfig planner;
  BenchConfig bench;

  void validate() const;
};

// "WxH" -> (width, height). Throws Error(invalid_argument) on malformed input.
std::pair<int, int> parse_resolution(std::string_view text);
void set_resolution(Config& config, int width, int height);

// JSON document with one object per module; missing keys keep their defaults,
// unknown keys are rejected.
std::string config_to_json(const Config& config);
Config config_from_json(std::string_view text);
Config load_config(const std::string& path);

}  // namespace mapless
