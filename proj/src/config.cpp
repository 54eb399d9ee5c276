#include "mapless/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mapless/error.hpp"

namespace mapless {

using nlohmann::json;

void Config::validate() const {
  sim.camera.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::invalid_argument, std::string("invalid config: ") + what);
  };
  require(picomap.n_keyframes >= 1, "picomap.n_keyframes");
  require(picomap.downsample_budget >= 1, "picomap.downsample_budget");
  require(fst.n_samples >= 1 && fst.k_nn >= 1, "fst sample counts");
  require(fst.r_inflate >= 0.0 && fst.edge_check_step > 0.0, "fst distances");
  require(fst.beta > 0.0 && fst.uniform_fraction >= 0.0 && fst.uniform_fraction <= 1.0, "fst resampling");
  require(limits.v_m > 0.0 && limits.a_m > 0.0 && limits.rho > 0.0, "trajgen limits");
  require(traj.dt_sample_div >= 1 && traj.dilation_ratio > 1.0, "trajgen sampling");
  require(sim.rate_hz > 0.0 && planner.replan_rate_hz > 0.0, "rates");
  require(planner.horizon > 0.0 && planner.goal_tolerance > 0.0, "planner distances");
  require(!bench.v_max.empty() && !bench.i_obs.empty() && bench.trials_per_cell >= 1, "bench matrix");
}

std::pair<int, int> parse_resolution(std::string_view text) {
  const auto x = text.find_first_of("xX");
  int w = 0;
  int h = 0;
  bool ok = x != std::string_view::npos;
  if (ok) {
    auto r1 = std::from_chars(text.data(), text.data() + x, w);
    auto r2 = std::from_chars(text.data() + x + 1, text.data() + text.size(), h);
    ok = r1.ec == std::errc{} && r1.ptr == text.data() + x && r2.ec == std::errc{} &&
         r2.ptr == text.data() + text.size() && w > 0 && h > 0;
  }
  if (!ok) throw Error(ErrorCode::invalid_argument, "resolution must look like 160x120");
  return {w, h};
}

void set_resolution(Config& config, int width, int height) {
  config.sim.camera.width = width;
  config.sim.camera.height = height;
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::invalid_argument, "expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

// Reads keys from one section, tracking which were consumed.
class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (root.contains(name)) {
      obj_ = &root.at(name);
      if (!obj_->is_object()) throw Error(ErrorCode::invalid_argument, std::string("section must be an object: ") + name);
    }
  }
  ~Section() = default;

  template <typename T>
  void read(const char* key, T& out) {
    used_.push_back(key);
    if (obj_ && obj_->contains(key)) out = obj_->at(key).get<T>();
  }
  void read_deg(const char* key, double& radians) {
    double deg = rad_to_deg(radians);
    read(key, deg);
    radians = deg_to_rad(deg);
  }
  void read_vec(const char* key, Vec3& out) {
    used_.push_back(key);
    if (obj_ && obj_->contains(key)) out = vec_from(obj_->at(key));
  }
  const json* raw(const char* key) {
    used_.push_back(key);
    return obj_ && obj_->contains(key) ? &obj_->at(key) : nullptr;
  }
  void finish() const {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (std::find(used_.begin(), used_.end(), it.key()) == used_.end()) {
        throw Error(ErrorCode::invalid_argument, "unknown config key: " + name_ + "." + it.key());
      }
    }
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::vector<std::string> used_;
};

}  // namespace

std::string config_to_json(const Config& c) {
  json j;
  j["picomap"] = {
      {"n_keyframes", c.picomap.n_keyframes},
      {"kf_pos_thresh", c.picomap.thresholds.d_pos},
      {"kf_rot_thresh_deg", rad_to_deg(c.picomap.thresholds.d_rot)},
      {"kf_time_thresh", c.picomap.thresholds.d_t},
      {"sigma0", c.picomap.uncertainty.sigma0},
      {"k_t", c.picomap.uncertainty.k_t},
      {"k_d", c.picomap.uncertainty.k_d},
      {"downsample_budget", c.picomap.downsample_budget},
      {"block_size", c.picomap.downsample.block_size},
      {"stride_min", c.picomap.downsample.s_min},
      {"stride_max", c.picomap.downsample.s_max},
  };
  j["fst"] = {
      {"n_samples", c.fst.n_samples},
      {"k_nn", c.fst.k_nn},
      {"r_inflate", c.fst.r_inflate},
      {"alpha_threshold_deg", rad_to_deg(c.fst.alpha_threshold)},
      {"prune_factor", c.fst.prune_factor},
      {"beta", c.fst.beta},
      {"uniform_fraction", c.fst.uniform_fraction},
      {"max_balls", c.fst.max_balls},
      {"edge_check_step", c.fst.edge_check_step},
      {"sfc_r_min", c.fst.sfc_r_min},
  };
  j["trajgen"] = {
      {"v_max", c.limits.v_m},
      {"a_max", c.limits.a_m},
      {"rho", c.limits.rho},
      {"dt_sample_div", c.traj.dt_sample_div},
      {"dilation_ratio", c.traj.dilation_ratio},
      {"gate_margin", c.traj.gate_margin},
      {"refine_steps", c.traj.refine_steps},
  };
  const auto& w = c.sim.world;
  j["simworld"] = {
      {"resolution", std::to_string(c.sim.camera.width) + "x" + std::to_string(c.sim.camera.height)},
      {"fov_h_deg", rad_to_deg(c.sim.camera.horizontal_fov)},
      {"fov_v_deg", rad_to_deg(c.sim.camera.vertical_fov)},
      {"rate_hz", c.sim.rate_hz},
      {"min_range", c.sim.camera.min_range},
      {"max_range", c.sim.camera.max_range},
      {"pose_noise_sigma", c.sim.pose_noise_sigma},
      {"r_drone", c.sim.r_drone},
      {"bounds_min", vec_json(w.bounds.min)},
      {"bounds_max", vec_json(w.bounds.max)},
      {"start", vec_json(w.start)},
      {"goal", vec_json(w.goal)},
      {"i_obs", w.i_obs},
      {"n_pillars", w.n_pillars},
      {"n_rings", w.n_rings},
      {"pillar_radius_min", w.pillar_radius_min},
      {"pillar_radius_max", w.pillar_radius_max},
      {"ring_major_min", w.ring_major_min},
      {"ring_major_max", w.ring_major_max},
      {"ring_minor_min", w.ring_minor_min},
      {"ring_minor_max", w.ring_minor_max},
      {"clearance", w.clearance},
  };
  j["planner"] = {
      {"replan_rate_hz", c.planner.replan_rate_hz},
      {"goal_tolerance", c.planner.goal_tolerance},
      {"horizon", c.planner.horizon},
      {"region_length", c.planner.region_length},
      {"region_width", c.planner.region_width},
      {"time_limit", c.planner.time_limit},
      {"use_resampling", c.planner.use_resampling},
      {"record_timing", c.planner.record_timing},
      {"seed", c.planner.seed},
  };
  j["bench"] = {
      {"v_max", c.bench.v_max},
      {"i_obs", c.bench.i_obs},
      {"trials_per_cell", c.bench.trials_per_cell},
      {"base_seed", c.bench.base_seed},
      {"threads", c.bench.threads},
  };
  return j.dump(2);
}

Config config_from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::invalid_argument, "config must be a JSON object");
  for (auto it = root.begin(); it != root.end(); ++it) {
    static const char* kSections[] = {"picomap", "fst", "trajgen", "simworld", "planner", "bench"};
    if (std::find_if(std::begin(kSections), std::end(kSections), [&](const char* s) { return it.key() == s; }) ==
        std::end(kSections)) {
      throw Error(ErrorCode::invalid_argument, "unknown config section: " + it.key());
    }
  }

  Config c;
  try {
    Section pm(root, "picomap");
    pm.read("n_keyframes", c.picomap.n_keyframes);
    pm.read("kf_pos_thresh", c.picomap.thresholds.d_pos);
    pm.read_deg("kf_rot_thresh_deg", c.picomap.thresholds.d_rot);
    pm.read("kf_time_thresh", c.picomap.thresholds.d_t);
    pm.read("sigma0", c.picomap.uncertainty.sigma0);
    pm.read("k_t", c.picomap.uncertainty.k_t);
    pm.read("k_d", c.picomap.uncertainty.k_d);
    pm.read("downsample_budget", c.picomap.downsample_budget);
    pm.read("block_size", c.picomap.downsample.block_size);
    pm.read("stride_min", c.picomap.downsample.s_min);
    pm.read("stride_max", c.picomap.downsample.s_max);
    pm.finish();

    Section fs(root, "fst");
    fs.read("n_samples", c.fst.n_samples);
    fs.read("k_nn", c.fst.k_nn);
    fs.read("r_inflate", c.fst.r_inflate);
    fs.read_deg("alpha_threshold_deg", c.fst.alpha_threshold);
    fs.read("prune_factor", c.fst.prune_factor);
    fs.read("beta", c.fst.beta);
    fs.read("uniform_fraction", c.fst.uniform_fraction);
    fs.read("max_balls", c.fst.max_balls);
    fs.read("edge_check_step", c.fst.edge_check_step);
    fs.read("sfc_r_min", c.fst.sfc_r_min);
    fs.finish();

    Section tg(root, "trajgen");
    tg.read("v_max", c.limits.v_m);
    tg.read("a_max", c.limits.a_m);
    tg.read("rho", c.limits.rho);
    tg.read("dt_sample_div", c.traj.dt_sample_div);
    tg.read("dilation_ratio", c.traj.dilation_ratio);
    tg.read("gate_margin", c.traj.gate_margin);
    tg.read("refine_steps", c.traj.refine_steps);
    tg.finish();

    Section sw(root, "simworld");
    if (const json* res = sw.raw("resolution")) {
      const auto [w, h] = parse_resolution(res->get<std::string>());
      set_resolution(c, w, h);
    }
    sw.read_deg("fov_h_deg", c.sim.camera.horizontal_fov);
    sw.read_deg("fov_v_deg", c.sim.camera.vertical_fov);
    sw.read("rate_hz", c.sim.rate_hz);
    sw.read("min_range", c.sim.camera.min_range);
    sw.read("max_range", c.sim.camera.max_range);
    sw.read("pose_noise_sigma", c.sim.pose_noise_sigma);
    sw.read("r_drone", c.sim.r_drone);
    auto& w = c.sim.world;
    sw.read_vec("bounds_min", w.bounds.min);
    sw.read_vec("bounds_max", w.bounds.max);
    sw.read_vec("start", w.start);
    sw.read_vec("goal", w.goal);
    // i_obs sets the pillar/ring split; explicit counts override it.
    const json* i_obs = sw.raw("i_obs");
    if (i_obs) w.set_density(i_obs->get<int>());
    sw.read("n_pillars", w.n_pillars);
    sw.read("n_rings", w.n_rings);
    sw.read("pillar_radius_min", w.pillar_radius_min);
    sw.read("pillar_radius_max", w.pillar_radius_max);
    sw.read("ring_major_min", w.ring_major_min);
    sw.read("ring_major_max", w.ring_major_max);
    sw.read("ring_minor_min", w.ring_minor_min);
    sw.read("ring_minor_max", w.ring_minor_max);
    sw.read("clearance", w.clearance);
    sw.finish();

    Section pl(root, "planner");
    pl.read("replan_rate_hz", c.planner.replan_rate_hz);
    pl.read("goal_tolerance", c.planner.goal_tolerance);
    pl.read("horizon", c.planner.horizon);
    pl.read("region_length", c.planner.region_length);
    pl.read("region_width", c.planner.region_width);
    pl.read("time_limit", c.planner.time_limit);
    pl.read("use_resampling", c.planner.use_resampling);
    pl.read("record_timing", c.planner.record_timing);
    pl.read("seed", c.planner.seed);
    pl.finish();

    Section bn(root, "bench");
    bn.read("v_max", c.bench.v_max);
    bn.read("i_obs", c.bench.i_obs);
    bn.read("trials_per_cell", c.bench.trials_per_cell);
    bn.read("base_seed", c.bench.base_seed);
    bn.read("threads", c.bench.threads);
    bn.finish();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("config type error: ") + e.what());
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace mapless
