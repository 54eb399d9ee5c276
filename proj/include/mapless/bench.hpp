#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mapless/config.hpp"
#include "mapless/planner.hpp"
#include "mapless/simworld.hpp"

namespace mapless {

enum class Outcome { success, collision, timeout };
const char* to_string(Outcome outcome);

using Histogram = std::map<std::size_t, std::size_t>;

struct TrialOptions {
  std::string record_frames_dir;  // non-empty: dump every rendered frame there
  bool keep_log = true;           // keep the per-replan episode log
};

struct TrialResult {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::timeout;
  std::optional<double> time_to_goal;  // present iff success
  std::string note;
  double sim_time = 0.0;
  double path_length = 0.0;
  double final_goal_distance = 0.0;
  std::size_t keyframes = 0;
  std::size_t replans = 0;
  std::size_t commits = 0;
  double mean_build_ms = 0.0;
  double mean_fst_ms = 0.0;
  double mean_traj_ms = 0.0;
  Histogram waypoint_histogram;
  Histogram ball_histogram;
  std::vector<ReplanRecord> log;
};

// Duration of the rest-to-rest trapezoidal (or triangular) speed profile.
double trapezoid_time(double distance, double v_max, double a_max);
// Configured limit, or 3x the optimistic straight-line time.
double trial_time_limit(const Config& config);

World make_trial_world(const Config& config, std::uint64_t seed);
TrialResult run_trial(const Config& config, std::uint64_t seed, const TrialOptions& options = {});
TrialResult run_trial_in_world(const Config& config, const World& world, std::uint64_t seed,
                               const TrialOptions& options = {});

void write_trial_json(std::ostream& out, const TrialResult& result);
void write_episode_log(std::ostream& out, const TrialResult& result);

// Runs fn(i) for i in [0, n) on `threads` workers (0 = hardware concurrency).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct CellResult {
  double v_max = 0.0;
  int i_obs = 0;
  int trials = 0;
  int successes = 0;
  int collisions = 0;
  int timeouts = 0;
  double success_rate = 0.0;
  double mean_time = 0.0;  // over successes; NaN when none
  std::vector<TrialResult> results;
};

struct MatrixReport {
  std::vector<CellResult> cells;
};

// Trial t of every cell uses seed base_seed + t.
MatrixReport run_matrix(const Config& config);
void write_matrix_csv(std::ostream& out, const MatrixReport& report);
void write_matrix_json(std::ostream& out, const MatrixReport& report);

struct SamplingRow {
  std::size_t n_samples = 0;
  int worlds = 0;
  int successes = 0;
  int shared = 0;              // worlds where every size succeeded
  double mean_time = 0.0;      // over the shared worlds
  double mean_time_all = 0.0;  // over this size's own successes
};

std::vector<SamplingRow> sampling_study(const Config& config, const std::vector<std::size_t>& sizes, int worlds);
void write_sampling_csv(std::ostream& out, const std::vector<SamplingRow>& rows);

struct ModularStats {
  std::size_t trials = 0;
  std::size_t replans = 0;  // trajectory generations
  Histogram ball_histogram;
  Histogram waypoint_histogram;
  double mean_build_ms = 0.0;
  double mean_fst_ms = 0.0;
  double mean_traj_ms = 0.0;
  double fraction_le1_waypoint = 0.0;
  double fraction_gt3_waypoints = 0.0;
};

// Runs trials (seeds base_seed, base_seed + 1, ...) until at least
// `min_replans` trajectory generations were recorded.
ModularStats modular_stats(const Config& config, std::size_t min_replans);
ModularStats aggregate_modular(const std::vector<TrialResult>& results);
void write_modular_json(std::ostream& out, const ModularStats& stats);
void write_histogram_csv(std::ostream& out, const ModularStats& stats);

// Offline pipeline over a recorded frame directory: every inserted keyframe
// triggers a plan from the camera position toward the configured goal.
std::vector<ReplanRecord> replay_frames(const Config& config, const std::string& frames_dir);

}  // namespace mapless
