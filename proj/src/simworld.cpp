#include "mapless/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "mapless/error.hpp"

namespace mapless {

void WorldSpec::set_density(int obstacles) {
  i_obs = obstacles;
  n_pillars = static_cast<int>(std::lround(obstacles * 300.0 / 420.0));
  n_rings = obstacles - n_pillars;
}

double pillar_distance(const Pillar& pillar, const Vec3& p) {
  const double radial = std::hypot(p.x() - pillar.cx, p.y() - pillar.cy) - pillar.radius;
  const double axial = std::max(pillar.zmin - p.z(), p.z() - pillar.zmax);
  const double outside = std::hypot(std::max(radial, 0.0), std::max(axial, 0.0));
  return outside + std::min(std::max(radial, axial), 0.0);
}

double ring_distance(const Ring& ring, const Vec3& p) {
  const Vec3 rel = p - ring.center;
  const double h = ring.axis.dot(rel);
  const double rho = (rel - h * ring.axis).norm();
  return std::hypot(rho - ring.major_radius, h) - ring.minor_radius;
}

double World::signed_distance(const Vec3& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& pl : pillars) d = std::min(d, pillar_distance(pl, p));
  for (const auto& r : rings) d = std::min(d, ring_distance(r, p));
  return d;
}

World generate_world(const WorldSpec& spec, std::uint64_t seed) {
  if (spec.bounds.empty() || spec.n_pillars < 0 || spec.n_rings < 0) {
    throw Error(ErrorCode::invalid_argument, "invalid world spec");
  }
  World world;
  world.bounds = spec.bounds;
  world.seed = seed;
  world.start = spec.start;
  world.goal = spec.goal;

  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const Box& b = spec.bounds;
  auto clear = [&](auto&& distance) {
    return distance(spec.start) > spec.clearance && distance(spec.goal) > spec.clearance;
  };
  constexpr int kRetries = 1000;

  for (int i = 0; i < spec.n_pillars; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
      Pillar p;
      p.radius = uniform(spec.pillar_radius_min, spec.pillar_radius_max);
      p.cx = uniform(b.min.x() + p.radius, b.max.x() - p.radius);
      p.cy = uniform(b.min.y() + p.radius, b.max.y() - p.radius);
      p.zmin = b.min.z();
      p.zmax = b.max.z();
      if (clear([&](const Vec3& q) { return pillar_distance(p, q); })) {
        world.pillars.push_back(p);
        placed = true;
      }
    }
    if (!placed) throw Error(ErrorCode::infeasible_world, "cannot place pillar with the requested clearance");
  }
  for (int i = 0; i < spec.n_rings; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
      Ring r;
      r.major_radius = uniform(spec.ring_major_min, spec.ring_major_max);
      r.minor_radius = uniform(spec.ring_minor_min, spec.ring_minor_max);
      const double ext = r.major_radius + r.minor_radius;
      const double theta = uniform(0.0, 2.0 * std::numbers::pi);
      r.axis = Vec3(std::cos(theta), std::sin(theta), 0.0);
      const double z_lo = b.min.z() + ext;
      const double z_hi = b.max.z() - ext;
      r.center = Vec3(uniform(b.min.x() + ext, b.max.x() - ext), uniform(b.min.y() + ext, b.max.y() - ext),
                      z_hi > z_lo ? uniform(z_lo, z_hi) : b.center().z());
      if (clear([&](const Vec3& q) { return ring_distance(r, q); })) {
        world.rings.push_back(r);
        placed = true;
      }
    }
    if (!placed) throw Error(ErrorCode::infeasible_world, "cannot place ring with the requested clearance");
  }
  return world;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::Zero();
};

// Ray o + t d (d not normalised).
void intersect_pillar(const Pillar& p, const Vec3& o, const Vec3& d, Hit& hit) {
  const double ox = o.x() - p.cx;
  const double oy = o.y() - p.cy;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 0.0) {
    const double bq = ox * d.x() + oy * d.y();
    const double c = ox * ox + oy * oy - p.radius * p.radius;
    const double disc = bq * bq - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-bq - sq) / a, (-bq + sq) / a}) {
        if (t <= 0.0 || t >= hit.t) continue;
        const double z = o.z() + t * d.z();
        if (z < p.zmin || z > p.zmax) continue;
        hit.t = t;
        hit.normal = Vec3(ox + t * d.x(), oy + t * d.y(), 0.0).normalized();
        break;
      }
    }
  }
  if (d.z() != 0.0) {
    for (double zc : {p.zmin, p.zmax}) {
      const double t = (zc - o.z()) / d.z();
      if (t <= 0.0 || t >= hit.t) continue;
      const double x = ox + t * d.x();
      const double y = oy + t * d.y();
      if (x * x + y * y <= p.radius * p.radius) {
        hit.t = t;
        hit.normal = Vec3(0.0, 0.0, zc == p.zmax ? 1.0 : -1.0);
      }
    }
  }
}

Vec3 ring_normal(const Ring& r, const Vec3& p) {
  const Vec3 rel = p - r.center;
  const double h = r.axis.dot(rel);
  Vec3 planar = rel - h * r.axis;
  const double rho = planar.norm();
  const Vec3 core = rho > 0.0 ? r.center + planar * (r.major_radius / rho) : r.center;
  return (p - core).normalized();
}

void intersect_ring(const Ring& r, const Vec3& o, const Vec3& d, Hit& hit) {
  // Bounding sphere interval, then sphere tracing on the exact torus distance.
  const double bound = r.major_radius + r.minor_radius;
  const Vec3 f = o - r.center;
  const double dd = d.squaredNorm();
  const double fd = f.dot(d);
  const double disc = fd * fd - dd * (f.squaredNorm() - bound * bound);
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  double t = std::max(0.0, (-fd - sq) / dd);
  const double t_exit = std::min(hit.t, (-fd + sq) / dd);
  const double inv_len = 1.0 / std::sqrt(dd);
  for (int it = 0; it < 300 && t <= t_exit; ++it) {
    const Vec3 p = o + t * d;
    const double s = ring_distance(r, p);
    if (s < 1e-7) {
      hit.t = t;
      hit.normal = ring_normal(r, p);
      return;
    }
    t += s * inv_len;
  }
}

const Vec3 kLight = Vec3(0.35, 0.45, 0.82).normalized();

}  // namespace

DepthFrame render_depth(const World& world, const Pose& camera_pose, const CameraModel& camera, double stamp) {
  DepthFrame frame;
  frame.width = camera.width;
  frame.height = camera.height;
  frame.pose = camera_pose;
  frame.stamp = stamp;
  frame.depth.assign(camera.pixel_count(), 0.0f);
  frame.intensity.assign(camera.pixel_count(), 0);

  const Eigen::Matrix3d R = camera_pose.linear();
  const Vec3 o = camera_pose.translation();
  const double tx = std::tan(0.5 * camera.horizontal_fov);
  const double ty = std::tan(0.5 * camera.vertical_fov);
  const double reach = camera.max_range * std::sqrt(1.0 + tx * tx + ty * ty);

  std::vector<const Pillar*> pillars;
  for (const auto& p : world.pillars) {
    if (std::hypot(o.x() - p.cx, o.y() - p.cy) - p.radius <= reach) pillars.push_back(&p);
  }
  std::vector<const Ring*> rings;
  for (const auto& r : world.rings) {
    const double bound = r.major_radius + r.minor_radius;
    const Vec3 c_cam = R.transpose() * (r.center - o);
    if (c_cam.norm() - bound <= reach && c_cam.z() >= -bound) rings.push_back(&r);
  }

  const double fx = camera.fx();
  const double fy = camera.fy();
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Vec3 d_cam((u + 0.5 - camera.cx()) / fx, (v + 0.5 - camera.cy()) / fy, 1.0);
      const Vec3 d = R * d_cam;  // unit z-component in the camera frame: t is z-depth
      Hit hit;
      hit.t = camera.max_range * (1.0 + 1e-9);
      for (const Pillar* p : pillars) intersect_pillar(*p, o, d, hit);
      for (const Ring* r : rings) intersect_ring(*r, o, d, hit);
      if (hit.t < camera.min_range || hit.t > camera.max_range) continue;
      const std::size_t idx = static_cast<std::size_t>(v) * camera.width + u;
      frame.depth[idx] = static_cast<float>(hit.t);
      const double lambert = std::max(0.0, hit.normal.dot(kLight));
      const double facing = std::abs(hit.normal.dot(d.normalized()));
      const double shade = std::clamp(0.1 + 0.6 * lambert + 0.3 * facing, 0.0, 1.0);
      frame.intensity[idx] = static_cast<std::uint8_t>(std::lround(255.0 * shade));
    }
  }
  return frame;
}

bool check_collision(const World& world, const Vec3& position, double r_drone) {
  return world.signed_distance(position) < r_drone;
}

// ---------------------------------------------------------------------------
// Vehicle

Pose default_camera_mount() {
  Eigen::Matrix3d r;
  // columns: camera x (right) = -body y, camera y (down) = -body z, camera z (optical) = body x
  r << 0.0, 0.0, 1.0,
      -1.0, 0.0, 0.0,
       0.0, -1.0, 0.0;
  Pose mount = Pose::Identity();
  mount.linear() = r;
  return mount;
}

Pose body_pose(const Vec3& position, double yaw) {
  Pose pose = Pose::Identity();
  pose.linear() = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  pose.translation() = position;
  return pose;
}

namespace {
VehicleState sample_into(VehicleState state, const PolySpline& spline) {
  const double t = std::min(state.clock(), spline.duration());
  state.position = spline.position(t);
  // Past the end the terminal state is held (derivatives at the final knot).
  state.velocity = spline.velocity(t);
  state.acceleration = spline.acceleration(t);
  return state;
}
}  // namespace

VehicleState step_vehicle(const VehicleState& state, const PolySpline& spline, double dt) {
  VehicleState next = state;
  if (next.tick_dt == dt) {
    ++next.ticks;
  } else {
    next.clock_origin = state.clock();
    next.ticks = 1;
    next.tick_dt = dt;
  }
  return sample_into(next, spline);
}

VehicleState reset_vehicle_clock(const VehicleState& state, const PolySpline& spline, double local_time) {
  VehicleState next = state;
  next.clock_origin = local_time;
  next.ticks = 0;
  return sample_into(next, spline);
}

// ---------------------------------------------------------------------------
// World files

void write_world(std::ostream& out, const World& world) {
  out.precision(17);
  out << "B " << world.bounds.min.x() << ' ' << world.bounds.min.y() << ' ' << world.bounds.min.z() << ' '
      << world.bounds.max.x() << ' ' << world.bounds.max.y() << ' ' << world.bounds.max.z() << '\n';
  out << "S " << world.start.x() << ' ' << world.start.y() << ' ' << world.start.z() << '\n';
  out << "G " << world.goal.x() << ' ' << world.goal.y() << ' ' << world.goal.z() << '\n';
  for (const auto& p : world.pillars) {
    out << "P " << p.cx << ' ' << p.cy << ' ' << p.radius << ' ' << p.zmin << ' ' << p.zmax << '\n';
  }
  for (const auto& r : world.rings) {
    out << "R " << r.center.x() << ' ' << r.center.y() << ' ' << r.center.z() << ' ' << r.axis.x() << ' '
        << r.axis.y() << ' ' << r.axis.z() << ' ' << r.major_radius << ' ' << r.minor_radius << '\n';
  }
}

World read_world(std::istream& in) {
  World world;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    char tag = 0;
    ss >> tag;
    bool ok = true;
    if (tag == 'P') {
      Pillar p;
      ok = static_cast<bool>(ss >> p.cx >> p.cy >> p.radius >> p.zmin >> p.zmax);
      world.pillars.push_back(p);
    } else if (tag == 'R') {
      Ring r;
      ok = static_cast<bool>(ss >> r.center.x() >> r.center.y() >> r.center.z() >> r.axis.x() >> r.axis.y() >>
                             r.axis.z() >> r.major_radius >> r.minor_radius);
      world.rings.push_back(r);
    } else if (tag == 'B') {
      ok = static_cast<bool>(ss >> world.bounds.min.x() >> world.bounds.min.y() >> world.bounds.min.z() >>
                             world.bounds.max.x() >> world.bounds.max.y() >> world.bounds.max.z());
    } else if (tag == 'S') {
      ok = static_cast<bool>(ss >> world.start.x() >> world.start.y() >> world.start.z());
    } else if (tag == 'G') {
      ok = static_cast<bool>(ss >> world.goal.x() >> world.goal.y() >> world.goal.z());
    } else {
      ok = false;
    }
    if (!ok) throw Error(ErrorCode::io, "malformed world line: " + line);
  }
  return world;
}

}  // namespace mapless
