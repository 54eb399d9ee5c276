#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mapless/config.hpp"
#include "mapless/fst.hpp"
#include "mapless/picomap.hpp"
#include "mapless/trajgen.hpp"

namespace mapless {

struct KinematicState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

// A committed spline together with the global time its local clock starts at.
struct ScheduledTrajectory {
  PolySpline spline;
  double start_time = 0.0;
};

enum class ReplanStatus {
  committed,
  not_committed,    // commit rule rejected the candidate
  not_inside_out,   // candidate turns back toward its start early on
  no_data,          // empty map
  no_goal,          // intermediate goal could not be nudged free
  empty_tree,       // pruned tree / path collapsed to the root
  empty_corridor,   // corridor truncated at the root
  traj_failed,      // trajectory generation threw
};

const char* to_string(ReplanStatus status);

// One row of the episode log.
struct ReplanRecord {
  double t = 0.0;
  std::size_t n_kf = 0;
  std::size_t n_samples = 0;
  std::size_t n_tree_nodes = 0;
  std::size_t n_pruned = 0;
  std::size_t n_balls = 0;
  std::size_t n_waypoints = 0;
  bool committed = false;
  double build_ms = 0.0;
  double fst_ms = 0.0;
  double traj_ms = 0.0;
  ReplanStatus status = ReplanStatus::no_data;
};

void write_episode_header(std::ostream& out);
void write_episode_row(std::ostream& out, const ReplanRecord& record);

// True when |p(t) - p(0)| is nondecreasing over the sampled first `fraction`
// of the spline's duration.
bool is_inside_out(const PolySpline& spline, double fraction = 0.25, int samples = 100);

class Planner {
 public:
  Planner(const Config& config, const Vec3& start, const Vec3& goal);

  const PicoMap& map() const { return map_; }
  const Vec3& goal() const { return goal_; }
  const Config& config() const { return config_; }

  // Frame ingestion. The map clock follows the frame stamps.
  bool wants_frame(const Pose& camera_pose, double stamp) const;
  bool on_frame(const DepthFrame& frame);
  // Advances the map clock without a frame (the frame would have been rejected).
  void observe_time(double stamp) { map_.set_clock(stamp); }

  // Clamps the goal to the horizon and nudges it by spiral search to a point
  // with positive safe radius; nullopt when nothing within 2 m is free.
  std::optional<Vec3> select_intermediate_goal(const Vec3& position) const;

  // Plans from the tracked state at the commit instant (default: one replan
  // period after `now`); a committed trajectory starts at that instant.
  ReplanRecord replan(double now);
  ReplanRecord replan(double now, double commit_time);
  // Same pipeline from an explicit start state (offline replay).
  ReplanRecord plan_from(const KinematicState& state, double now, double commit_time);

  // Trajectory schedule.
  KinematicState state_at(double t) const;
  // Promotes the pending trajectory once its start time is reached.
  bool activate_due(double t);
  const std::optional<ScheduledTrajectory>& active() const { return active_; }
  const std::optional<ScheduledTrajectory>& pending() const { return pending_; }
  // The latest committed trajectory (pending if any, else active).
  const ScheduledTrajectory* latest() const;

  const std::optional<BallCorridor>& previous_corridor() const { return prev_corridor_; }
  const std::vector<ReplanRecord>& log() const { return log_; }
  // Ball and waypoint counts of every generated trajectory.
  const std::vector<std::size_t>& ball_counts() const { return ball_counts_; }
  const std::vector<std::size_t>& waypoint_counts() const { return waypoint_counts_; }
  // Wall time of every keyframe insertion (downsample + index build), ms.
  const std::vector<double>& build_times_ms() const { return build_times_ms_; }

 private:
  SafeRadiusFn planning_query() const;
  Box sampling_region(const Vec3& root, const Vec3& target) const;

  Config config_;
  PicoMap map_;
  Vec3 start_;
  Vec3 goal_;
  Box flight_volume_;
  std::optional<ScheduledTrajectory> active_;
  std::optional<ScheduledTrajectory> pending_;
  std::optional<BallCorridor> prev_corridor_;
  std::vector<ReplanRecord> log_;
  std::vector<std::size_t> ball_counts_;
  std::vector<std::size_t> waypoint_counts_;
  std::vector<double> build_times_ms_;
  std::size_t builds_reported_ = 0;
  std::uint64_t replan_index_ = 0;
};

}  // namespace mapless
