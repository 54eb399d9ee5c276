#pragma once

// Test-side reference implementations. They share no code with the library
// beyond plain data types, so agreement is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "mapless/fst.hpp"
#include "mapless/picomap.hpp"

namespace mapless::oracle {

inline bool inside_frustum(const Vec3& p, const CameraModel& cam) {
  if (p.z() < cam.min_range || p.z() > cam.max_range) return false;
  // Angles measured from the optical axis in the two principal planes.
  return std::atan2(std::abs(p.x()), p.z()) <= 0.5 * cam.horizontal_fov + 1e-15 &&
         std::atan2(std::abs(p.y()), p.z()) <= 0.5 * cam.vertical_fov + 1e-15;
}

// Minimum over the six faces using explicit inward plane normals.
inline double edge_distance(const Vec3& p, const CameraModel& cam) {
  const double h = 0.5 * cam.horizontal_fov;
  const double v = 0.5 * cam.vertical_fov;
  const Vec3 normals[4] = {
      Vec3(-std::cos(h), 0.0, std::sin(h)),  // right face
      Vec3(std::cos(h), 0.0, std::sin(h)),   // left face
      Vec3(0.0, -std::cos(v), std::sin(v)),  // bottom face
      Vec3(0.0, std::cos(v), std::sin(v)),   // top face
  };
  double d = std::min(p.z() - cam.min_range, cam.max_range - p.z());
  for (const Vec3& n : normals) d = std::min(d, n.dot(p));
  return std::max(0.0, d);
}

struct Frame {
  std::vector<Vec3> points_cam;
  Pose pose;
  double stamp = 0.0;
};

struct Answer {
  double r_safe = 0.0;
  Vec3 obstacle = Vec3::Zero();
  bool never_seen = false;
};

// Full linear scan of every retained point. `frames` newest first.
inline Answer safe_radius(const std::vector<Frame>& frames, const CameraModel& cam, const UncertaintyParams& u,
                          double now, const Vec3& x) {
  Answer best;
  best.r_safe = std::numeric_limits<double>::infinity();
  bool seen = false;
  int first_nonempty = -1;
  double travelled = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0) travelled += (frames[i].pose.translation() - frames[i - 1].pose.translation()).norm();
    const Frame& f = frames[i];
    if (f.points_cam.empty()) continue;
    if (first_nonempty < 0) first_nonempty = static_cast<int>(i);
    const Vec3 p = f.pose.inverse() * x;
    if (!inside_frustum(p, cam)) continue;
    seen = true;
    double d = std::numeric_limits<double>::infinity();
    Vec3 nearest = Vec3::Zero();
    for (const Vec3& q : f.points_cam) {
      const double dq = (q - p).norm();
      if (dq < d) {
        d = dq;
        nearest = q;
      }
    }
    const double sigma = u.sigma0 + u.k_t * std::max(0.0, now - f.stamp) + u.k_d * travelled;
    if (d - sigma < best.r_safe) {
      best.r_safe = d - sigma;
      best.obstacle = f.pose * nearest;
    }
    if (d < edge_distance(p, cam)) break;
  }
  if (!seen && first_nonempty >= 0) {
    const Frame& f = frames[first_nonempty];
    const Vec3 p = f.pose.inverse() * x;
    double d = std::numeric_limits<double>::infinity();
    Vec3 nearest = Vec3::Zero();
    for (const Vec3& q : f.points_cam) {
      if ((q - p).norm() < d) {
        d = (q - p).norm();
        nearest = q;
      }
    }
    best.r_safe = d;
    best.obstacle = f.pose * nearest;
    best.never_seen = true;
  }
  best.r_safe = std::max(0.0, best.r_safe);
  return best;
}

// Random scene: up to `max_frames` keyframes near the origin looking roughly
// along +x, each holding up to `max_points` camera-frame points.
struct Scene {
  CameraModel camera;
  UncertaintyParams uncertainty;
  std::vector<Frame> frames;  // newest first
  double now = 0.0;
};

inline Pose random_camera_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::uniform_real_distribution<double> ang(-0.6, 0.6);
  // Optical axis along world +x, image y down.
  Eigen::Matrix3d base;
  base << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  Pose pose = Pose::Identity();
  pose.linear() = (Eigen::AngleAxisd(ang(rng), Vec3::UnitZ()) * Eigen::AngleAxisd(0.5 * ang(rng), Vec3::UnitY()))
                      .toRotationMatrix() *
                  base;
  pose.translation() = Vec3(pos(rng), pos(rng), 0.5 * pos(rng));
  return pose;
}

inline Scene random_scene(std::mt19937_64& rng, int max_frames, int max_points) {
  Scene s;
  s.uncertainty = {0.01, 0.01, 0.02};
  std::uniform_int_distribution<int> n_frames(1, max_frames);
  std::uniform_int_distribution<int> n_points(0, max_points);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> depth(s.camera.min_range, s.camera.max_range);
  const int frames = n_frames(rng);
  double stamp = 0.0;
  std::vector<Frame> oldest_first;
  for (int f = 0; f < frames; ++f) {
    Frame frame;
    frame.pose = random_camera_pose(rng);
    frame.stamp = stamp;
    stamp += 0.1 + 0.4 * (unit(rng) + 1.0);
    const int n = (f == 0) ? std::max(1, n_points(rng)) : n_points(rng);
    const double tx = std::tan(0.5 * s.camera.horizontal_fov);
    const double ty = std::tan(0.5 * s.camera.vertical_fov);
    for (int i = 0; i < n; ++i) {
      const double z = depth(rng);
      frame.points_cam.emplace_back(unit(rng) * z * tx, unit(rng) * z * ty, z);
    }
    oldest_first.push_back(std::move(frame));
  }
  s.frames.assign(oldest_first.rbegin(), oldest_first.rend());
  s.now = stamp;
  return s;
}

inline PicoMap build_map(const Scene& s) {
  PicoMapConfig cfg;
  cfg.n_keyframes = std::max<std::size_t>(s.frames.size(), 1);
  cfg.uncertainty = s.uncertainty;
  PicoMap map(s.camera, cfg);
  for (auto it = s.frames.rbegin(); it != s.frames.rend(); ++it) map.insert_points(it->points_cam, it->pose, it->stamp);
  map.set_clock(s.now);
  return map;
}

inline Vec3 random_query(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> x(-3.0, 12.0);
  std::uniform_real_distribution<double> yz(-6.0, 6.0);
  return Vec3(x(rng), yz(rng), 0.5 * yz(rng));
}

// Analytic sphere obstacles; r_safe is the exact clearance (clamped at 0).
struct SphereWorld {
  std::vector<Ball> spheres;

  QueryResult query(const Vec3& x) const {
    QueryResult r;
    r.r_safe = std::numeric_limits<double>::infinity();
    r.x_obstacle = x + Vec3(1e6, 0.0, 0.0);
    for (const Ball& s : spheres) {
      const Vec3 d = x - s.center;
      const double n = d.norm();
      const double clearance = n - s.radius;
      if (clearance < r.r_safe) {
        r.r_safe = clearance;
        r.x_obstacle = n > 0.0 ? Vec3(s.center + d * (s.radius / n)) : Vec3(s.center + Vec3(s.radius, 0, 0));
      }
    }
    if (spheres.empty()) r.r_safe = 1e6;
    r.r_safe = std::max(0.0, r.r_safe);
    r.conclusive = true;
    return r;
  }
  SafeRadiusFn fn() const {
    return [this](const Vec3& x) { return query(x); };
  }
};

inline SphereWorld random_sphere_world(std::mt19937_64& rng, const Box& box, int count, double r_lo, double r_hi) {
  std::uniform_real_distribution<double> ux(box.min.x(), box.max.x());
  std::uniform_real_distribution<double> uy(box.min.y(), box.max.y());
  std::uniform_real_distribution<double> uz(box.min.z(), box.max.z());
  std::uniform_real_distribution<double> ur(r_lo, r_hi);
  SphereWorld w;
  for (int i = 0; i < count; ++i) w.spheres.push_back({Vec3(ux(rng), uy(rng), uz(rng)), ur(rng)});
  return w;
}

// Chain of balls, each centred on its predecessor's surface, turning by at
// most `max_turn` radians per step. Radii stay within (0, 2 r_prev) so every
// adjacent pair intersects properly.
inline BallCorridor random_corridor(std::mt19937_64& rng, int n_balls, double max_turn = 1.0) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  BallCorridor c;
  Vec3 center(0.0, 0.0, 1.5);
  Vec3 dir(1.0, 0.0, 0.0);
  double r = 0.6 + 0.9 * unit(rng);
  for (int i = 0; i < n_balls; ++i) {
    c.balls.push_back({center, r});
    c.source_path.push_back(center);
    // Random rotation of dir by an angle in [0, max_turn].
    Vec3 axis(normal(rng), normal(rng), normal(rng));
    axis = (axis - axis.dot(dir) * dir).normalized();
    const double angle = max_turn * unit(rng);
    dir = (std::cos(angle) * dir + std::sin(angle) * axis).normalized();
    center = center + r * dir;
    r = std::clamp(r * (0.6 + 0.8 * unit(rng)), 0.4, 1.8);
  }
  return c;
}

// Single-axis quintic (ascending powers of tau) matching position, velocity
// and acceleration at tau = 0 and tau = T, from a direct 6x6 solve.
inline Eigen::Matrix<double, 6, 1> quintic_hermite(double T, double p0, double v0, double a0, double p1, double v1,
                                                   double a1) {
  Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
  for (int k = 0; k < 6; ++k) {
    M(3, k) = std::pow(T, k);
    if (k >= 1) M(4, k) = k * std::pow(T, k - 1);
    if (k >= 2) M(5, k) = k * (k - 1) * std::pow(T, k - 2);
  }
  M(0, 0) = 1.0;
  M(1, 1) = 1.0;
  M(2, 2) = 2.0;
  Eigen::Matrix<double, 6, 1> rhs;
  rhs << p0, v0, a0, p1, v1, a1;
  return M.fullPivLu().solve(rhs);
}

// Gate circle of two properly intersecting balls found numerically: bisect
// the polar angle on the first sphere where the second sphere's implicit
// function changes sign. Returns (centre, radius).
inline std::pair<Vec3, double> gate_by_bisection(const Ball& b1, const Ball& b2) {
  const Vec3 axis = (b2.center - b1.center).normalized();
  const Vec3 perp = axis.unitOrthogonal();
  auto point = [&](double theta) {
    return Vec3(b1.center + b1.radius * (std::cos(theta) * axis + std::sin(theta) * perp));
  };
  auto f = [&](double theta) { return (point(theta) - b2.center).norm() - b2.radius; };
  double lo = 0.0;
  double hi = std::numbers::pi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
  }
  const Vec3 p = point(0.5 * (lo + hi));
  const Vec3 c = b1.center + (p - b1.center).dot(axis) * axis;
  return {c, (p - c).norm()};
}

// Structural checks on a freshly built tree. Empty string when all hold.
inline std::string check_built_tree(const FstTree& tree, const SafeRadiusFn& query, const FstParams& params) {
  const auto& nodes = tree.nodes();
  if (nodes.empty() || nodes[0].parent != -1 || nodes[0].cost != 0.0) return "bad root";
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const FstNode& n = nodes[i];
    // Parent inserted earlier: also rules out cycles and guarantees reachability.
    if (n.parent < 0 || static_cast<std::size_t>(n.parent) >= i) return "parent not inserted before child";
    double sum = 0.0;
    int hops = 0;
    for (int cur = static_cast<int>(i); cur != 0; cur = nodes[cur].parent) {
      sum += (nodes[cur].position - nodes[nodes[cur].parent].position).norm();
      if (++hops > static_cast<int>(nodes.size())) return "cycle";
    }
    if (std::abs(sum - n.cost) > 1e-9) return "cost mismatch";
    if (!(n.cost > nodes[n.parent].cost)) return "cost not increasing";
    if (n.safe_radius < params.r_inflate) return "unsafe sample inserted";
    const Vec3& a = nodes[n.parent].position;
    const double len = (n.position - a).norm();
    if (len > params.edge_check_step) {
      const auto m = static_cast<int>(std::ceil(len / params.edge_check_step));
      for (int j = 1; j < m; ++j) {
        if (query(a + (double(j) / m) * (n.position - a)).r_safe < params.r_inflate) return "unsafe edge";
      }
    }
  }
  if (tree.dynamic_index().size() != nodes.size()) return "index size mismatch";
  return {};
}

// Score conservation: every node's score equals its number of score-1 leaves.
inline std::string check_scores(const FstTree& tree, double alpha) {
  const auto& nodes = tree.nodes();
  std::vector<int> ones(nodes.size(), 0);
  for (int i = static_cast<int>(nodes.size()) - 1; i >= 0; --i) {
    if (nodes[i].children.empty()) {
      const int want = i == 0 ? 0 : leaf_score(tree, i, alpha);
      if (nodes[i].score != want) return "leaf score";
      ones[i] = want;
    }
    if (nodes[i].score != ones[i]) return "score not conserved";
    if (i > 0) ones[nodes[i].parent] += ones[i];
  }
  return {};
}

// Post-prune soundness: survivors have w >= prune_factor among surviving
// siblings (or survived a zero-score guard); cut branches recorded w < factor.
inline std::string check_pruned(const FstTree& tree, double prune_factor) {
  const auto& nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const FstNode& n = nodes[i];
    if (n.active && !n.children.empty()) {
      int max_score = 0;
      for (int c : n.children) max_score = std::max(max_score, nodes[c].score);
      if (max_score == 0) {
        if (n.children.size() != 1) return "zero-score guard kept more than one child";
        continue;
      }
      for (int c : n.children) {
        if (!nodes[c].active) return "inactive node listed as child";
        if (double(nodes[c].score) / max_score < prune_factor) return "survivor below prune factor";
      }
    }
    if (!n.active && std::isfinite(n.prune_weight) && !(n.prune_weight < prune_factor)) {
      return "cut branch at or above prune factor";
    }
    if (!n.active && n.parent >= 0 && nodes[n.parent].active) {
      if (!std::isfinite(n.prune_weight)) return "cut branch root without weight";
    }
  }
  return {};
}

}  // namespace mapless::oracle
