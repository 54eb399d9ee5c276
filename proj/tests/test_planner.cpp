#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mapless/bench.hpp"
#include "mapless/planner.hpp"
#include "mapless/simworld.hpp"

namespace mapless {
namespace {

World world_with(std::vector<Pillar> pillars) {
  World w;
  w.bounds = WorldSpec{}.bounds;
  w.start = WorldSpec{}.start;
  w.goal = WorldSpec{}.goal;
  w.pillars = std::move(pillars);
  return w;
}

DepthFrame frame_at(const World& w, const Config& c, const Vec3& position, double yaw, double stamp) {
  return render_depth(w, body_pose(position, yaw) * default_camera_mount(), c.sim.camera, stamp);
}

TEST(OnFrame, FirstFrameAlwaysInserted) {
  const Config c;
  Planner p(c, Vec3(11, 0, 1.5), Vec3(29, 0, 1.5));
  EXPECT_TRUE(p.on_frame(frame_at(world_with({}), c, Vec3(11, 0, 1.5), 0.0, 0.0)));
  EXPECT_EQ(p.map().size(), 1u);
  EXPECT_EQ(p.build_times_ms().size(), 1u);
}

TEST(OnFrame, HoveringInsertsTwicePerSecond) {
  const Config c;
  const World w = world_with({{15.0, 0.0, 0.3, 0.0, 5.0}});
  Planner p(c, w.start, w.goal);
  int inserted = 0;
  for (int k = 0; k < 150; ++k) inserted += p.on_frame(frame_at(w, c, w.start, 0.0, k / 30.0)) ? 1 : 0;
  // 5 s of hovering at d_t = 0.5 s: stamps 0, 0.5, ..., 4.5 (10 frames, +-1 for rounding).
  EXPECT_GE(inserted, 9);
  EXPECT_LE(inserted, 11);
}

TEST(OnFrame, FastTranslationInsertsFourPerSecond) {
  Config c;
  c.picomap.thresholds.d_t = 100.0;  // isolate the position gate
  const World w = world_with({});
  Planner p(c, w.start, w.goal);
  int inserted = 0;
  for (int k = 0; k < 90; ++k) {
    const double t = k / 30.0;
    inserted += p.on_frame(frame_at(w, c, w.start + Vec3(2.0 * t, 0, 0), 0.0, t)) ? 1 : 0;
  }
  // 3 s at 2 m/s with d_pos = 0.5 m: about 12 insertions.
  EXPECT_GE(inserted, 11);
  EXPECT_LE(inserted, 13);
}

TEST(IntermediateGoal, WithinHorizonIsTheGoal) {
  const Config c;
  Planner p(c, Vec3(11, 0, 1.5), Vec3(14, 0, 1.5));
  EXPECT_EQ(p.select_intermediate_goal(Vec3(11, 0, 1.5)).value(), Vec3(14, 0, 1.5));
}

TEST(IntermediateGoal, ClampedToHorizon) {
  const Config c;
  Planner p(c, Vec3(11, 0, 1.5), Vec3(29, 0, 1.5));
  const auto g = p.select_intermediate_goal(Vec3(11, 0, 1.5));
  ASSERT_TRUE(g.has_value());
  EXPECT_NEAR((*g - Vec3(19, 0, 1.5)).norm(), 0.0, 1e-12);
}

TEST(IntermediateGoal, NudgedOutOfObstacle) {
  const Config c;
  // The clamped point (19, 0, 1.5) lies inside this pillar, 0.1 m behind its visible face.
  const World w = world_with({{19.2, 0.0, 0.3, 0.0, 5.0}});
  Planner p(c, w.start, w.goal);
  ASSERT_TRUE(p.on_frame(frame_at(w, c, w.start, 0.0, 0.0)));
  const Vec3 clamped(19, 0, 1.5);
  ASSERT_LE(p.map().safe_radius_query(clamped).r_safe, c.fst.r_inflate);
  const auto g = p.select_intermediate_goal(w.start);
  ASSERT_TRUE(g.has_value());
  EXPECT_GT(p.map().safe_radius_query(*g).r_safe, 0.0);
  EXPECT_GT(p.map().safe_radius_query(*g).r_safe, c.fst.r_inflate);
  EXPECT_LE((*g - clamped).norm(), 2.0 + 1e-12);
  EXPECT_NEAR((*g - clamped).x(), 0.0, 1e-12);  // nudged within the plane orthogonal to the goal direction
}

TEST(Replan, NoDataBeforeAnyFrame) {
  const Config c;
  Planner p(c, Vec3(11, 0, 1.5), Vec3(29, 0, 1.5));
  EXPECT_EQ(p.replan(0.0).status, ReplanStatus::no_data);
  EXPECT_FALSE(p.latest());
}

TEST(Replan, FirstReplanInOpenSpaceCommitsCloserEnd) {
  const Config c;
  const World w = world_with({});
  Planner p(c, w.start, w.goal);
  p.on_frame(frame_at(w, c, w.start, 0.0, 0.0));
  const ReplanRecord r = p.replan(0.0);
  ASSERT_EQ(r.status, ReplanStatus::committed) << to_string(r.status);
  ASSERT_TRUE(p.pending());
  EXPECT_DOUBLE_EQ(p.pending()->start_time, 0.1);
  const PolySpline& s = p.pending()->spline;
  EXPECT_LT((s.end_position() - w.goal).norm(), (w.start - w.goal).norm());
  EXPECT_LT((s.start_position() - w.start).norm(), 1e-9);
  EXPECT_TRUE(is_inside_out(s));
  EXPECT_EQ(r.n_samples, c.fst.n_samples + 1);
  EXPECT_GT(r.n_balls, 0u);
  // Activation happens at the commit instant, not before.
  EXPECT_FALSE(p.activate_due(0.05));
  EXPECT_TRUE(p.activate_due(0.1));
  EXPECT_TRUE(p.active());
  EXPECT_FALSE(p.pending());
}

TEST(Replan, FartherEndIsNotCommittedAndCurrentRetained) {
  const Config c;
  const World w = world_with({});
  Planner p(c, w.start, w.goal);
  p.on_frame(frame_at(w, c, w.start, 0.0, 0.0));
  ASSERT_EQ(p.replan(0.0).status, ReplanStatus::committed);
  const Vec3 end = p.latest()->spline.end_position();
  KinematicState behind;
  behind.position = Vec3(4.0, 0.0, 1.5);
  const ReplanRecord r = p.plan_from(behind, 0.1, 0.2);
  EXPECT_EQ(r.status, ReplanStatus::not_committed) << to_string(r.status);
  EXPECT_EQ(p.latest()->spline.end_position(), end);
  EXPECT_DOUBLE_EQ(p.latest()->start_time, 0.1);
}

TEST(Replan, StateAtFollowsSchedule) {
  const Config c;
  const World w = world_with({});
  Planner p(c, w.start, w.goal);
  EXPECT_EQ(p.state_at(3.0).position, w.start);
  p.on_frame(frame_at(w, c, w.start, 0.0, 0.0));
  p.replan(0.0, 0.5);
  EXPECT_EQ(p.state_at(0.2).position, w.start);  // pending not yet due
  const auto& s = p.pending()->spline;
  EXPECT_LT((p.state_at(1.0).position - s.position(0.5)).norm(), 1e-12);
  EXPECT_LT((p.state_at(1.0).velocity - s.velocity(0.5)).norm(), 1e-12);
}

TEST(InsideOut, Examples) {
  BoundaryCondition bc;
  bc.p_f = Vec3(5, 0, 0);
  EXPECT_TRUE(is_inside_out(boundary_quintic(bc, 3.0)));
  // Moving forward while braking hard: the distance from the start peaks and
  // falls back within the first quarter of the trajectory.
  bc.v_o = Vec3(4, 0, 0);
  bc.a_o = Vec3(-20, 0, 0);
  bc.p_f = Vec3(0, 0, 0);
  EXPECT_FALSE(is_inside_out(boundary_quintic(bc, 3.0)));
  EXPECT_FALSE(is_inside_out(PolySpline{}));
}

TEST(EpisodeLog, HeaderAndRow) {
  std::ostringstream out;
  write_episode_header(out);
  ReplanRecord r;
  r.t = 1.5;
  r.n_kf = 3;
  r.committed = true;
  r.status = ReplanStatus::committed;
  write_episode_row(out, r);
  EXPECT_EQ(out.str(),
            "t,n_kf,n_samples,n_tree_nodes,n_pruned,n_balls,n_waypoints,committed,build_ms,fst_ms,traj_ms,status\n"
            "1.5,3,0,0,0,0,0,1,0,0,0,committed\n");
}

// Closed loop in a sparse world, checking the per-commit properties directly.
TEST(ClosedLoop, CommittedTrajectoriesAreInsideOutAndMonotone) {
  Config c;
  c.sim.world.set_density(30);
  const World w = generate_world(c.sim.world, 3);
  Planner p(c, w.start, w.goal);
  const double dt = 1.0 / c.sim.rate_hz;
  VehicleState v;
  v.position = w.start;
  double last_end = std::numeric_limits<double>::infinity();
  int commits = 0;
  for (int k = 0; k < 900; ++k) {
    const double t = k * dt;
    if (k > 0 && p.active()) v = step_vehicle(v, p.active()->spline, dt);
    if (p.activate_due(t)) v = reset_vehicle_clock(v, p.active()->spline, t - p.active()->start_time);
    if ((v.position - w.goal).norm() <= c.planner.goal_tolerance) break;
    const Vec3 vxy(v.velocity.x(), v.velocity.y(), 0.0);
    if (vxy.norm() > 0.3) v.yaw = std::atan2(vxy.y(), vxy.x());
    if (p.wants_frame(v.camera_pose(), t)) {
      p.on_frame(render_depth(w, v.camera_pose(), c.sim.camera, t));
    } else {
      p.observe_time(t);
    }
    if (k % 3 == 0) {
      const ReplanRecord r = p.replan(t, (k + 3) * dt);
      if (r.committed) {
        ++commits;
        const PolySpline& s = p.pending()->spline;
        EXPECT_TRUE(is_inside_out(s));
        const double end = (s.end_position() - w.goal).norm();
        EXPECT_LT(end, last_end);
        last_end = end;
        // The splice is continuous: the new spline starts at the tracked state.
        const KinematicState at = p.state_at((k + 3) * dt - 1e-9);
        EXPECT_LT((s.start_position() - at.position).norm(), 1e-6);
      }
    }
  }
  EXPECT_GT(commits, 3);
  EXPECT_LE((v.position - w.goal).norm(), c.planner.goal_tolerance);
}

TEST(ClosedLoop, EmptyWorldLivenessAcrossSeeds) {
  Config c;
  c.sim.world.n_pillars = 0;
  c.sim.world.n_rings = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrialResult r = run_trial(c, seed);
    EXPECT_EQ(r.outcome, Outcome::success) << "seed " << seed << " " << r.note;
    ASSERT_TRUE(r.time_to_goal.has_value());
    EXPECT_LE(*r.time_to_goal, trial_time_limit(c));
  }
}

// Resampling from the previous corridor should not lower the commit rate.
TEST(ClosedLoop, ResamplingDoesNotLowerCommitRate) {
  Config with;
  with.sim.world.set_density(30);
  Config without = with;
  without.planner.use_resampling = false;
  std::size_t commits_with = 0, replans_with = 0, commits_without = 0, replans_without = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const TrialResult a = run_trial(with, seed);
    const TrialResult b = run_trial(without, seed);
    commits_with += a.commits;
    replans_with += a.replans;
    commits_without += b.commits;
    replans_without += b.replans;
  }
  const double rate_with = double(commits_with) / double(replans_with);
  const double rate_without = double(commits_without) / double(replans_without);
  RecordProperty("commit_rate_with", std::to_string(rate_with));
  RecordProperty("commit_rate_without", std::to_string(rate_without));
  std::cout << "commit rate with resampling " << rate_with << ", without " << rate_without << '\n';
  EXPECT_GE(rate_with, rate_without);
}

}  // namespace
}  // namespace mapless
