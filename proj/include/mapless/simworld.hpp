#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mapless/picomap.hpp"
#include "mapless/trajgen.hpp"
#include "mapless/types.hpp"

namespace mapless {

// Vertical cylinder.
struct Pillar {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.3;
  double zmin = 0.0;
  double zmax = 5.0;
};

// Torus around `axis` through `center`.
struct Ring {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitX();
  double major_radius = 1.0;
  double minor_radius = 0.15;
};

struct WorldSpec {
  Box bounds{Vec3(0.0, -10.0, 0.0), Vec3(40.0, 10.0, 5.0)};
  int n_pillars = 21;
  int n_rings = 9;
  int i_obs = 30;
  double pillar_radius_min = 0.2;
  double pillar_radius_max = 0.4;
  double ring_major_min = 0.8;
  double ring_major_max = 1.5;
  double ring_minor_min = 0.1;
  double ring_minor_max = 0.2;
  Vec3 start{11.0, 0.0, 1.5};
  Vec3 goal{29.0, 0.0, 1.5};
  double clearance = 1.5;

  // Splits `i_obs` obstacles into pillars and rings at the 300:120 ratio.
  void set_density(int obstacles);
};

double pillar_distance(const Pillar& pillar, const Vec3& p);
double ring_distance(const Ring& ring, const Vec3& p);

struct World {
  Box bounds;
  std::vector<Pillar> pillars;
  std::vector<Ring> rings;
  std::uint64_t seed = 0;
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::Zero();

  // Signed distance to the nearest obstacle surface (+inf for an empty world).
  double signed_distance(const Vec3& p) const;
};

World generate_world(const WorldSpec& spec, std::uint64_t seed);

// Per-pixel analytic ray cast. Depth is z-depth; pixels without a hit inside
// [min_range, max_range] are 0.
DepthFrame render_depth(const World& world, const Pose& camera_pose, const CameraModel& camera, double stamp = 0.0);

// Open-ball convention: exactly r_drone from a surface is not a collision.
bool check_collision(const World& world, const Vec3& position, double r_drone);

// Body frame x-forward, z-up; camera looks along body x.
Pose default_camera_mount();
Pose body_pose(const Vec3& position, double yaw);

struct VehicleState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  double yaw = 0.0;
  double r_drone = 0.2;
  Pose camera_mount = default_camera_mount();

  // Trajectory clock = clock_origin + ticks * tick_dt; counting ticks keeps
  // N steps of dt exactly N * dt.
  double clock_origin = 0.0;
  std::int64_t ticks = 0;
  double tick_dt = 0.0;

  double clock() const { return clock_origin + static_cast<double>(ticks) * tick_dt; }
  Pose camera_pose() const { return body_pose(position, yaw) * camera_mount; }
};

// Perfect tracking: advance the clock by dt and sample the spline there; past
// the end the terminal state is held.
VehicleState step_vehicle(const VehicleState& state, const PolySpline& spline, double dt);
// Restart the trajectory clock at `local_time` on a newly committed spline.
VehicleState reset_vehicle_clock(const VehicleState& state, const PolySpline& spline, double local_time = 0.0);

// Line-oriented world file: `P cx cy r zmin zmax` and `R cx cy cz ax ay az Rmaj rmin`,
// plus `B` (bounds), `S` (start) and `G` (goal) records.
void write_world(std::ostream& out, const World& world);
World read_world(std::istream& in);

}  // namespace mapless
