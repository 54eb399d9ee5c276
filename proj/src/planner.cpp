#include "mapless/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include "mapless/error.hpp"

namespace mapless {

const char* to_string(ReplanStatus status) {
  switch (status) {
    case ReplanStatus::committed: return "committed";
    case ReplanStatus::not_committed: return "not_committed";
    case ReplanStatus::not_inside_out: return "not_inside_out";
    case ReplanStatus::no_data: return "no_data";
    case ReplanStatus::no_goal: return "no_goal";
    case ReplanStatus::empty_tree: return "empty_tree";
    case ReplanStatus::empty_corridor: return "empty_corridor";
    case ReplanStatus::traj_failed: return "traj_failed";
  }
  return "unknown";
}

void write_episode_header(std::ostream& out) {
  out << "t,n_kf,n_samples,n_tree_nodes,n_pruned,n_balls,n_waypoints,committed,build_ms,fst_ms,traj_ms,status\n";
}

void write_episode_row(std::ostream& out, const ReplanRecord& r) {
  out << r.t << ',' << r.n_kf << ',' << r.n_samples << ',' << r.n_tree_nodes << ',' << r.n_pruned << ','
      << r.n_balls << ',' << r.n_waypoints << ',' << (r.committed ? 1 : 0) << ',' << r.build_ms << ','
      << r.fst_ms << ',' << r.traj_ms << ',' << to_string(r.status) << '\n';
}

bool is_inside_out(const PolySpline& spline, double fraction, int samples) {
  if (spline.empty()) return false;
  const Vec3 p0 = spline.position(0.0);
  const double horizon = fraction * spline.duration();
  double last = 0.0;
  for (int j = 1; j <= samples; ++j) {
    const double d = (spline.position(horizon * j / samples) - p0).norm();
    if (d < last - 1e-9) return false;
    last = std::max(last, d);
  }
  return true;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Horizontal unit vector orthogonal to `dir` (falls back to x for vertical dirs).
Vec3 lateral_axis(const Vec3& dir) {
  Vec3 side(-dir.y(), dir.x(), 0.0);
  if (side.norm() < 1e-9) return Vec3::UnitX();
  return side.normalized();
}

}  // namespace

Planner::Planner(const Config& config, const Vec3& start, const Vec3& goal)
    : config_(config), map_(config.sim.camera, config.picomap), start_(start), goal_(goal) {
  config_.validate();
  const double r = config_.fst.r_inflate;
  flight_volume_ = config_.sim.world.bounds;
  flight_volume_.min += Vec3::Constant(r);
  flight_volume_.max -= Vec3::Constant(r);
}

bool Planner::wants_frame(const Pose& camera_pose, double stamp) const {
  return map_.should_insert({camera_pose, stamp});
}

bool Planner::on_frame(const DepthFrame& frame) {
  map_.set_clock(frame.stamp);
  if (!map_.should_insert({frame.pose, frame.stamp})) return false;
  const auto t0 = Clock::now();
  map_.insert_keyframe(frame);
  build_times_ms_.push_back(config_.planner.record_timing ? ms_since(t0) : 0.0);
  return true;
}

std::optional<Vec3> Planner::select_intermediate_goal(const Vec3& position) const {
  const Vec3 offset = goal_ - position;
  const double dist = offset.norm();
  const double horizon = config_.planner.horizon;
  if (dist <= horizon) return goal_;

  const Vec3 dir = offset / dist;
  const Vec3 clamped = flight_volume_.clamp(position + horizon * dir);
  auto free = [&](const Vec3& p) {
    return planning_query()(p).r_safe > config_.fst.r_inflate;
  };
  if (free(clamped)) return clamped;

  // Spiral outward in the plane orthogonal to the goal direction.
  const Vec3 e1 = lateral_axis(dir);
  const Vec3 e2 = dir.cross(e1).normalized();
  constexpr double kStep = 0.25;
  constexpr double kMaxRadius = 2.0;
  for (int ring = 1; ring * kStep <= kMaxRadius + 1e-12; ++ring) {
    const double rho = ring * kStep;
    const int n = 8 * ring;
    for (int k = 0; k < n; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / n;
      const Vec3 p = flight_volume_.clamp(clamped + rho * (std::cos(theta) * e1 + std::sin(theta) * e2));
      if (free(p)) return p;
    }
  }
  return std::nullopt;
}

SafeRadiusFn Planner::planning_query() const {
  // Until some keyframe holds points nothing has been observed: every query
  // is answered optimistically with the sensing range, like a never-seen point.
  const bool has_points = std::any_of(map_.keyframe_begin(), map_.keyframe_end(),
                                      [](const Keyframe& k) { return !k.empty(); });
  if (has_points) return make_query_fn(map_);
  const double reach = map_.camera().max_range;
  return [reach](const Vec3& p) {
    QueryResult r;
    r.r_safe = reach;
    r.x_obstacle = p + Vec3(reach, 0.0, 0.0);
    r.never_seen = true;
    return r;
  };
}

Box Planner::sampling_region(const Vec3& root, const Vec3& target) const {
  Vec3 dir = target - root;
  dir.z() = 0.0;
  if (dir.norm() < 1e-9) dir = goal_ - root;
  dir.z() = 0.0;
  dir = dir.norm() < 1e-9 ? Vec3::UnitX() : dir.normalized();
  const Vec3 side = lateral_axis(dir);
  const double half_l = 0.5 * config_.planner.region_length;
  const double half_w = 0.5 * config_.planner.region_width;
  const Vec3 center = root + half_l * dir;
  // Axis-aligned hull of the oriented rectangle, full flight-volume height.
  const Vec3 ext = half_l * dir.cwiseAbs() + half_w * side.cwiseAbs();
  Box region{center - ext, center + ext};
  region.min.z() = flight_volume_.min.z();
  region.max.z() = flight_volume_.max.z();
  return region.intersect(flight_volume_);
}

ReplanRecord Planner::replan(double now) { return replan(now, now + 1.0 / config_.planner.replan_rate_hz); }

ReplanRecord Planner::replan(double now, double commit_time) { return plan_from(state_at(commit_time), now, commit_time); }

ReplanRecord Planner::plan_from(const KinematicState& s, double now, double commit_time) {
  ReplanRecord rec;
  rec.t = now;
  rec.n_kf = map_.size();
  if (builds_reported_ < build_times_ms_.size()) {
    double sum = 0.0;
    for (std::size_t i = builds_reported_; i < build_times_ms_.size(); ++i) sum += build_times_ms_[i];
    rec.build_ms = sum / static_cast<double>(build_times_ms_.size() - builds_reported_);
    builds_reported_ = build_times_ms_.size();
  }
  const bool timing = config_.planner.record_timing;
  const std::uint64_t index = replan_index_++;
  auto finish = [&](ReplanStatus status) {
    rec.status = status;
    rec.committed = status == ReplanStatus::committed;
    if (!timing) rec.build_ms = rec.fst_ms = rec.traj_ms = 0.0;
    log_.push_back(rec);
    return rec;
  };
  if (map_.empty()) return finish(ReplanStatus::no_data);

  const Vec3 root = s.position;

  const auto t_fst = Clock::now();
  const auto sub_goal = select_intermediate_goal(root);
  if (!sub_goal) {
    rec.fst_ms = ms_since(t_fst);
    return finish(ReplanStatus::no_goal);
  }

  const SafeRadiusFn query = planning_query();
  const FstParams& fp = config_.fst;
  std::optional<ResampleDistribution> prior;
  if (config_.planner.use_resampling && prev_corridor_ && !prev_corridor_->empty()) {
    prior = make_resample_distribution(*prev_corridor_, fp.beta, fp.uniform_fraction);
  }
  const std::uint64_t seed = config_.planner.seed * 0x9E3779B97F4A7C15ULL + index;
  std::vector<Vec3> samples =
      batch_sample(sampling_region(root, *sub_goal), fp.n_samples, prior ? &*prior : nullptr, seed);
  samples.push_back(*sub_goal);
  rec.n_samples = samples.size();
  samples = sort_by_root_distance(std::move(samples), root);

  FstTree tree = build_fst(root, samples, query, fp);
  score_tree(tree, fp.alpha_threshold);
  prune_tree(tree, fp.prune_factor, *sub_goal);
  rec.n_tree_nodes = tree.size();
  rec.n_pruned = tree.size() - tree.active_count();
  const std::vector<int> path_ids = extract_path(tree, *sub_goal);
  if (path_ids.size() < 2) {
    rec.fst_ms = ms_since(t_fst);
    return finish(ReplanStatus::empty_tree);
  }
  const std::vector<Vec3> path = path_positions(tree, path_ids);
  // Corridor balls bound the vehicle centre, so they are shrunk by the body radius.
  const double body = config_.sim.r_drone;
  const SafeRadiusFn corridor_query = [&query, body](const Vec3& p) {
    QueryResult r = query(p);
    r.r_safe = std::max(0.0, r.r_safe - body);
    return r;
  };
  BallCorridor corridor = generate_sfc(path, corridor_query, fp.max_balls, fp.sfc_r_min);
  rec.fst_ms = ms_since(t_fst);
  rec.n_balls = corridor.balls.size();
  if (corridor.empty()) return finish(ReplanStatus::empty_corridor);

  // Terminal point: the goal when a ball already holds it, else the path end
  // (fully covered path) or the last ball centre.
  Vec3 p_f = corridor.reaches_path_end ? path.back() : corridor.balls.back().center;
  for (std::size_t i = 0; i < corridor.balls.size(); ++i) {
    if (corridor.balls[i].contains(goal_)) {
      corridor.balls.resize(i + 1);
      p_f = goal_;
      break;
    }
  }
  rec.n_balls = corridor.balls.size();
  if ((p_f - root).norm() < 0.1) return finish(ReplanStatus::empty_corridor);

  BoundaryCondition bc;
  bc.p_o = root;
  bc.v_o = s.velocity;
  bc.a_o = s.acceleration;
  bc.p_f = p_f;

  const auto t_traj = Clock::now();
  TrajectoryResult traj;
  try {
    traj = generate_trajectory(corridor, bc, config_.limits, config_.traj);
  } catch (const Error&) {
    rec.traj_ms = ms_since(t_traj);
    return finish(ReplanStatus::traj_failed);
  }
  rec.traj_ms = ms_since(t_traj);
  rec.n_waypoints = traj.iterations;
  ball_counts_.push_back(corridor.balls.size());
  waypoint_counts_.push_back(traj.iterations);

  if (!is_inside_out(traj.spline)) return finish(ReplanStatus::not_inside_out);
  const ScheduledTrajectory* current = latest();
  if (!commit_decision(traj.spline, current ? &current->spline : nullptr, goal_)) {
    return finish(ReplanStatus::not_committed);
  }
  pending_ = ScheduledTrajectory{std::move(traj.spline), commit_time};
  prev_corridor_ = std::move(corridor);
  return finish(ReplanStatus::committed);
}

const ScheduledTrajectory* Planner::latest() const {
  if (pending_) return &*pending_;
  if (active_) return &*active_;
  return nullptr;
}

KinematicState Planner::state_at(double t) const {
  const ScheduledTrajectory* traj = nullptr;
  if (pending_ && t >= pending_->start_time) {
    traj = &*pending_;
  } else if (active_) {
    traj = &*active_;
  }
  KinematicState s;
  if (!traj) {
    s.position = start_;
    return s;
  }
  const double local = std::clamp(t - traj->start_time, 0.0, traj->spline.duration());
  s.position = traj->spline.position(local);
  s.velocity = traj->spline.velocity(local);
  s.acceleration = traj->spline.acceleration(local);
  return s;
}

bool Planner::activate_due(double t) {
  if (!pending_ || t < pending_->start_time) return false;
  active_ = std::move(pending_);
  pending_.reset();
  return true;
}

}  // namespace mapless
