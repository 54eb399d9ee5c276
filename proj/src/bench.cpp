#include "mapless/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mapless/error.hpp"
#include "mapless/frame_io.hpp"

namespace mapless {

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::success: return "success";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
  }
  return "unknown";
}

double trapezoid_time(double distance, double v_max, double a_max) {
  if (distance <= 0.0) return 0.0;
  const double ramp = v_max * v_max / a_max;  // accel + decel distance
  if (distance >= ramp) return distance / v_max + v_max / a_max;
  return 2.0 * std::sqrt(distance / a_max);
}

double trial_time_limit(const Config& config) {
  if (config.planner.time_limit > 0.0) return config.planner.time_limit;
  const double d = (config.sim.world.goal - config.sim.world.start).norm();
  return 3.0 * trapezoid_time(d, config.limits.v_m, config.limits.a_m);
}

World make_trial_world(const Config& config, std::uint64_t seed) {
  return generate_world(config.sim.world, seed);
}

TrialResult run_trial(const Config& config, std::uint64_t seed, const TrialOptions& options) {
  TrialResult result;
  result.seed = seed;
  World world;
  try {
    world = make_trial_world(config, seed);
  } catch (const Error& e) {
    result.outcome = Outcome::timeout;
    result.note = e.what();
    return result;
  }
  return run_trial_in_world(config, world, seed, options);
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void fill_stats(TrialResult& result, const Planner& planner) {
  const auto& log = planner.log();
  result.replans = log.size();
  result.commits = static_cast<std::size_t>(
      std::count_if(log.begin(), log.end(), [](const ReplanRecord& r) { return r.committed; }));
  result.keyframes = planner.build_times_ms().size();
  std::vector<double> fst;
  std::vector<double> traj;
  for (const auto& r : log) {
    if (r.n_tree_nodes > 0) fst.push_back(r.fst_ms);
    if (r.n_waypoints > 0 || r.status == ReplanStatus::committed || r.status == ReplanStatus::not_committed ||
        r.status == ReplanStatus::not_inside_out || r.status == ReplanStatus::traj_failed) {
      traj.push_back(r.traj_ms);
    }
  }
  result.mean_build_ms = mean_of(planner.build_times_ms());
  result.mean_fst_ms = mean_of(fst);
  result.mean_traj_ms = mean_of(traj);
  for (auto n : planner.ball_counts()) ++result.ball_histogram[n];
  for (auto n : planner.waypoint_counts()) ++result.waypoint_histogram[n];
}

}  // namespace

TrialResult run_trial_in_world(const Config& config, const World& world, std::uint64_t seed,
                               const TrialOptions& options) {
  TrialResult result;
  result.seed = seed;
  const double dt = 1.0 / config.sim.rate_hz;
  const auto replan_every =
      std::max<std::int64_t>(1, std::llround(config.sim.rate_hz / config.planner.replan_rate_hz));
  const double time_limit = trial_time_limit(config);
  const auto max_ticks = static_cast<std::int64_t>(std::ceil(time_limit / dt));

  Config cfg = config;
  cfg.planner.seed = config.planner.seed ^ (seed * 0xD1B54A32D192ED03ULL);
  Planner planner(cfg, world.start, world.goal);

  std::optional<FrameDirectoryWriter> writer;
  if (!options.record_frames_dir.empty()) writer.emplace(options.record_frames_dir);
  std::mt19937_64 noise_rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  std::normal_distribution<double> noise(0.0, 1.0);

  VehicleState vehicle;
  vehicle.position = world.start;
  vehicle.r_drone = config.sim.r_drone;
  const Vec3 heading = world.goal - world.start;
  vehicle.yaw = std::atan2(heading.y(), heading.x());
  Vec3 last_position = vehicle.position;

  result.outcome = Outcome::timeout;
  try {
    for (std::int64_t k = 0;; ++k) {
      const double t = static_cast<double>(k) * dt;
      if (k > 0 && planner.active()) vehicle = step_vehicle(vehicle, planner.active()->spline, dt);
      if (planner.activate_due(t)) {
        const auto& active = *planner.active();
        vehicle = reset_vehicle_clock(vehicle, active.spline, t - active.start_time);
      }
      const Vec3 v_xy(vehicle.velocity.x(), vehicle.velocity.y(), 0.0);
      if (v_xy.norm() > 0.3) vehicle.yaw = std::atan2(v_xy.y(), v_xy.x());
      result.path_length += (vehicle.position - last_position).norm();
      last_position = vehicle.position;
      result.sim_time = t;

      if (check_collision(world, vehicle.position, config.sim.r_drone)) {
        result.outcome = Outcome::collision;
        std::ostringstream note;
        note << "collision at (" << vehicle.position.x() << ", " << vehicle.position.y() << ", "
             << vehicle.position.z() << "), clearance " << world.signed_distance(vehicle.position);
        result.note = note.str();
        break;
      }
      if ((vehicle.position - world.goal).norm() <= config.planner.goal_tolerance) {
        result.outcome = Outcome::success;
        result.time_to_goal = t;
        break;
      }
      if (k >= max_ticks) {
        result.outcome = Outcome::timeout;
        break;
      }

      Pose camera = vehicle.camera_pose();
      if (config.sim.pose_noise_sigma > 0.0) {
        const Vec3 n(noise(noise_rng), noise(noise_rng), noise(noise_rng));
        camera.translation() += config.sim.pose_noise_sigma * n;
      }
      if (planner.wants_frame(camera, t) || writer) {
        DepthFrame frame = render_depth(world, camera, config.sim.camera, t);
        if (writer) writer->append(frame);
        planner.on_frame(frame);
      } else {
        planner.observe_time(t);
      }
      if (k % replan_every == 0) {
        planner.replan(t, static_cast<double>(k + replan_every) * dt);
      }
    }
  } catch (const std::exception& e) {
    result.outcome = Outcome::timeout;
    result.time_to_goal.reset();
    result.note = std::string("planner error: ") + e.what();
  }
  result.final_goal_distance = (vehicle.position - world.goal).norm();
  fill_stats(result, planner);
  if (options.keep_log) result.log = planner.log();
  return result;
}

void write_episode_log(std::ostream& out, const TrialResult& result) {
  write_episode_header(out);
  for (const auto& r : result.log) write_episode_row(out, r);
}

namespace {

nlohmann::json histogram_json(const Histogram& h) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : h) j[std::to_string(k)] = v;
  return j;
}

nlohmann::json nullable(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json trial_json(const TrialResult& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["outcome"] = to_string(r.outcome);
  j["time_to_goal"] = r.time_to_goal ? nlohmann::json(*r.time_to_goal) : nlohmann::json(nullptr);
  j["note"] = r.note;
  j["sim_time"] = r.sim_time;
  j["path_length"] = r.path_length;
  j["final_goal_distance"] = r.final_goal_distance;
  j["keyframes"] = r.keyframes;
  j["replans"] = r.replans;
  j["commits"] = r.commits;
  j["mean_build_ms"] = r.mean_build_ms;
  j["mean_fst_ms"] = r.mean_fst_ms;
  j["mean_traj_ms"] = r.mean_traj_ms;
  j["waypoint_histogram"] = histogram_json(r.waypoint_histogram);
  j["ball_histogram"] = histogram_json(r.ball_histogram);
  return j;
}

}  // namespace

void write_trial_json(std::ostream& out, const TrialResult& result) { out << trial_json(result).dump(2) << '\n'; }

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

MatrixReport run_matrix(const Config& config) {
  const auto& b = config.bench;
  struct Job {
    std::size_t cell;
    std::size_t trial;
  };
  MatrixReport report;
  std::vector<Config> cell_configs;
  for (double v : b.v_max) {
    for (int i_obs : b.i_obs) {
      CellResult cell;
      cell.v_max = v;
      cell.i_obs = i_obs;
      cell.trials = b.trials_per_cell;
      cell.results.resize(static_cast<std::size_t>(b.trials_per_cell));
      report.cells.push_back(std::move(cell));
      Config c = config;
      c.limits.v_m = v;
      c.sim.world.set_density(i_obs);
      cell_configs.push_back(std::move(c));
    }
  }
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    for (std::size_t t = 0; t < static_cast<std::size_t>(b.trials_per_cell); ++t) jobs.push_back({c, t});
  }
  TrialOptions options;
  options.keep_log = false;
  parallel_for(jobs.size(), b.threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    report.cells[job.cell].results[job.trial] = run_trial(cell_configs[job.cell], b.base_seed + job.trial, options);
  });
  for (auto& cell : report.cells) {
    double time_sum = 0.0;
    for (const auto& r : cell.results) {
      switch (r.outcome) {
        case Outcome::success:
          ++cell.successes;
          time_sum += *r.time_to_goal;
          break;
        case Outcome::collision: ++cell.collisions; break;
        case Outcome::timeout: ++cell.timeouts; break;
      }
    }
    cell.success_rate = static_cast<double>(cell.successes) / cell.trials;
    cell.mean_time = cell.successes > 0 ? time_sum / cell.successes : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

void write_matrix_csv(std::ostream& out, const MatrixReport& report) {
  out << "v_max,i_obs,trials,successes,collisions,timeouts,success_rate,mean_time\n";
  for (const auto& c : report.cells) {
    out << c.v_max << ',' << c.i_obs << ',' << c.trials << ',' << c.successes << ',' << c.collisions << ','
        << c.timeouts << ',' << c.success_rate << ',';
    if (std::isfinite(c.mean_time)) out << c.mean_time;
    out << '\n';
  }
}

void write_matrix_json(std::ostream& out, const MatrixReport& report) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json cell;
    cell["v_max"] = c.v_max;
    cell["i_obs"] = c.i_obs;
    cell["trials"] = c.trials;
    cell["successes"] = c.successes;
    cell["collisions"] = c.collisions;
    cell["timeouts"] = c.timeouts;
    cell["success_rate"] = c.success_rate;
    cell["mean_time"] = nullable(c.mean_time);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : c.results) rows.push_back(trial_json(r));
    cell["trial_results"] = rows;
    j.push_back(cell);
  }
  out << nlohmann::json{{"cells", j}}.dump(2) << '\n';
}

std::vector<SamplingRow> sampling_study(const Config& config, const std::vector<std::size_t>& sizes, int worlds) {
  const std::size_t n_sizes = sizes.size();
  const auto n_worlds = static_cast<std::size_t>(std::max(worlds, 0));
  std::vector<TrialResult> results(n_sizes * n_worlds);
  TrialOptions options;
  options.keep_log = false;
  parallel_for(results.size(), config.bench.threads, [&](std::size_t i) {
    Config c = config;
    c.fst.n_samples = sizes[i / n_worlds];
    results[i] = run_trial(c, config.bench.base_seed + i % n_worlds, options);
  });
  std::vector<bool> shared(n_worlds, true);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].outcome != Outcome::success) shared[i % n_worlds] = false;
  }
  std::vector<SamplingRow> rows;
  for (std::size_t s = 0; s < n_sizes; ++s) {
    SamplingRow row;
    row.n_samples = sizes[s];
    row.worlds = worlds;
    double all = 0.0;
    double common = 0.0;
    for (std::size_t w = 0; w < n_worlds; ++w) {
      const auto& r = results[s * n_worlds + w];
      if (r.outcome != Outcome::success) continue;
      ++row.successes;
      all += *r.time_to_goal;
      if (shared[w]) {
        ++row.shared;
        common += *r.time_to_goal;
      }
    }
    row.mean_time_all = row.successes ? all / row.successes : std::numeric_limits<double>::quiet_NaN();
    row.mean_time = row.shared ? common / row.shared : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

void write_sampling_csv(std::ostream& out, const std::vector<SamplingRow>& rows) {
  out << "n_samples,worlds,successes,shared,mean_time,mean_time_all\n";
  for (const auto& r : rows) {
    out << r.n_samples << ',' << r.worlds << ',' << r.successes << ',' << r.shared << ',' << r.mean_time << ','
        << r.mean_time_all << '\n';
  }
}

ModularStats aggregate_modular(const std::vector<TrialResult>& results) {
  ModularStats stats;
  stats.trials = results.size();
  double build = 0.0;
  double fst = 0.0;
  double traj = 0.0;
  std::size_t n_build = 0;
  std::size_t n_fst = 0;
  std::size_t n_traj = 0;
  for (const auto& r : results) {
    for (const auto& [k, v] : r.ball_histogram) stats.ball_histogram[k] += v;
    for (const auto& [k, v] : r.waypoint_histogram) stats.waypoint_histogram[k] += v;
    // Means of per-trial means, weighted by each trial's event counts.
    std::size_t generated = 0;
    for (const auto& [k, v] : r.waypoint_histogram) generated += v;
    build += r.mean_build_ms * r.keyframes;
    n_build += r.keyframes;
    fst += r.mean_fst_ms * r.replans;
    n_fst += r.replans;
    traj += r.mean_traj_ms * generated;
    n_traj += generated;
  }
  for (const auto& [k, v] : stats.waypoint_histogram) stats.replans += v;
  stats.mean_build_ms = n_build ? build / n_build : 0.0;
  stats.mean_fst_ms = n_fst ? fst / n_fst : 0.0;
  stats.mean_traj_ms = n_traj ? traj / n_traj : 0.0;
  if (stats.replans > 0) {
    std::size_t le1 = 0;
    std::size_t gt3 = 0;
    for (const auto& [k, v] : stats.waypoint_histogram) {
      if (k <= 1) le1 += v;
      if (k > 3) gt3 += v;
    }
    stats.fraction_le1_waypoint = static_cast<double>(le1) / stats.replans;
    stats.fraction_gt3_waypoints = static_cast<double>(gt3) / stats.replans;
  }
  return stats;
}

ModularStats modular_stats(const Config& config, std::size_t min_replans) {
  std::vector<TrialResult> results;
  TrialOptions options;
  options.keep_log = false;
  std::size_t replans = 0;
  std::uint64_t next_seed = config.bench.base_seed;
  const int batch = std::max(1, config.bench.threads > 0 ? config.bench.threads
                                                         : static_cast<int>(std::thread::hardware_concurrency()));
  while (replans < min_replans) {
    std::vector<TrialResult> chunk(static_cast<std::size_t>(batch));
    parallel_for(chunk.size(), config.bench.threads,
                 [&](std::size_t i) { chunk[i] = run_trial(config, next_seed + i, options); });
    next_seed += static_cast<std::uint64_t>(batch);
    for (auto& r : chunk) {
      for (const auto& [k, v] : r.waypoint_histogram) replans += v;
      results.push_back(std::move(r));
      if (replans >= min_replans) break;
    }
    if (results.size() > 100000) break;
  }
  return aggregate_modular(results);
}

void write_modular_json(std::ostream& out, const ModularStats& s) {
  nlohmann::json j;
  j["trials"] = s.trials;
  j["replans"] = s.replans;
  j["ball_histogram"] = histogram_json(s.ball_histogram);
  j["waypoint_histogram"] = histogram_json(s.waypoint_histogram);
  j["mean_build_ms"] = s.mean_build_ms;
  j["mean_fst_ms"] = s.mean_fst_ms;
  j["mean_traj_ms"] = s.mean_traj_ms;
  j["fraction_le1_waypoint"] = s.fraction_le1_waypoint;
  j["fraction_gt3_waypoints"] = s.fraction_gt3_waypoints;
  out << j.dump(2) << '\n';
}

void write_histogram_csv(std::ostream& out, const ModularStats& s) {
  out << "kind,count,replans\n";
  for (const auto& [k, v] : s.ball_histogram) out << "balls," << k << ',' << v << '\n';
  for (const auto& [k, v] : s.waypoint_histogram) out << "waypoints," << k << ',' << v << '\n';
}

std::vector<ReplanRecord> replay_frames(const Config& config, const std::string& frames_dir) {
  const std::vector<DepthFrame> frames = read_frame_directory(frames_dir, config.sim.camera);
  if (frames.empty()) throw Error(ErrorCode::no_data, "no frames in " + frames_dir);
  Planner planner(config, frames.front().pose.translation(), config.sim.world.goal);
  for (const auto& frame : frames) {
    if (!planner.on_frame(frame)) continue;
    KinematicState s;
    s.position = frame.pose.translation();
    planner.plan_from(s, frame.stamp, frame.stamp);
  }
  return planner.log();
}

}  // namespace mapless
