#include "mapless/picomap.hpp"

#include <cmath>
#include <limits>

#include "mapless/error.hpp"

namespace mapless {

double CameraModel::fx() const { return 0.5 * width / std::tan(0.5 * horizontal_fov); }
double CameraModel::fy() const { return 0.5 * height / std::tan(0.5 * vertical_fov); }

Vec3 CameraModel::back_project(int u, int v, double depth) const {
  return {(u + 0.5 - cx()) / fx() * depth, (v + 0.5 - cy()) / fy() * depth, depth};
}

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::invalid_argument, "camera resolution must be positive");
  if (!(horizontal_fov > 0.0 && horizontal_fov < std::numbers::pi) ||
      !(vertical_fov > 0.0 && vertical_fov < std::numbers::pi)) {
    throw Error(ErrorCode::invalid_argument, "camera fov must lie in (0, pi)");
  }
  if (!(min_range >= 0.0 && min_range < max_range)) {
    throw Error(ErrorCode::invalid_argument, "camera requires 0 <= min_range < max_range");
  }
}

// ---------------------------------------------------------------------------
// Adaptive downsampling

namespace {

bool valid_depth(float d, const CameraModel& camera) {
  return std::isfinite(d) && d > 0.0f && d >= camera.min_range && d <= camera.max_range;
}

// True when a lattice point k*stride + stride/2 falls in (x, x+1].
bool on_lattice(int x, double stride) {
  const double half = 0.5 * stride;
  return std::floor((x + 1 - half) / stride) != std::floor((x - half) / stride);
}

}  // namespace

BlockStrides compute_block_strides(const DepthFrame& frame, const DownsampleParams& params) {
  const int bs = params.block_size;
  BlockStrides out;
  out.blocks_x = (frame.width + bs - 1) / bs;
  out.blocks_y = (frame.height + bs - 1) / bs;
  const std::size_t n_blocks = static_cast<std::size_t>(out.blocks_x) * out.blocks_y;
  out.gradient.assign(n_blocks, 0.0);
  std::vector<int> counts(n_blocks, 0);

  const int w = frame.width;
  const int h = frame.height;
  for (int v = 0; v < h; ++v) {
    const int vm = v > 0 ? v - 1 : v;
    const int vp = v + 1 < h ? v + 1 : v;
    for (int u = 0; u < w; ++u) {
      const int um = u > 0 ? u - 1 : u;
      const int up = u + 1 < w ? u + 1 : u;
      const double gx = (double(frame.intensity_at(up, v)) - frame.intensity_at(um, v)) / std::max(1, up - um);
      const double gy = (double(frame.intensity_at(u, vp)) - frame.intensity_at(u, vm)) / std::max(1, vp - vm);
      const std::size_t b = static_cast<std::size_t>(v / bs) * out.blocks_x + u / bs;
      out.gradient[b] += std::sqrt(gx * gx + gy * gy);
      ++counts[b];
    }
  }
  double g_max = 0.0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    if (counts[b] > 0) out.gradient[b] /= counts[b];
    g_max = std::max(g_max, out.gradient[b]);
  }
  out.stride.resize(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const double ratio = g_max > 0.0 ? out.gradient[b] / g_max : 0.0;
    out.stride[b] = params.s_max - (params.s_max - params.s_min) * ratio;
  }
  return out;
}

std::vector<Vec3> adaptive_downsample(const DepthFrame& frame, const CameraModel& camera, std::size_t budget,
                                      const DownsampleParams& params) {
  if (frame.width != camera.width || frame.height != camera.height ||
      frame.depth.size() != camera.pixel_count() || frame.intensity.size() != camera.pixel_count()) {
    throw Error(ErrorCode::invalid_argument, "frame dimensions do not match the camera model");
  }
  std::vector<Vec3> points;
  if (budget == 0) return points;

  const BlockStrides blocks = compute_block_strides(frame, params);
  const int bs = params.block_size;

  // Scale all block strides by one factor so the expected count meets the budget.
  std::vector<int> valid(blocks.stride.size(), 0);
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      if (valid_depth(frame.depth_at(u, v), camera)) ++valid[static_cast<std::size_t>(v / bs) * blocks.blocks_x + u / bs];
    }
  }
  double expected = 0.0;
  for (std::size_t b = 0; b < valid.size(); ++b) expected += valid[b] / (blocks.stride[b] * blocks.stride[b]);
  if (expected <= 0.0) return points;
  const double scale = std::sqrt(expected / static_cast<double>(budget));

  for (int v = 0; v < frame.height; ++v) {
    const int by = v / bs;
    for (int u = 0; u < frame.width; ++u) {
      const std::size_t b = static_cast<std::size_t>(by) * blocks.blocks_x + u / bs;
      const double stride = std::max(1.0, scale * blocks.stride[b]);
      if (!on_lattice(u, stride) || !on_lattice(v, stride)) continue;
      const float d = frame.depth_at(u, v);
      if (!valid_depth(d, camera)) continue;
      points.push_back(camera.back_project(u, v, d));
    }
  }

  const std::size_t cap = budget + budget / 5;
  if (points.size() > cap) {
    std::vector<Vec3> kept;
    kept.reserve(cap);
    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) {
      if ((i + 1) * cap / n > i * cap / n) kept.push_back(points[i]);
    }
    points = std::move(kept);
  }
  return points;
}

bool should_insert_keyframe(const StampedPose& last, const StampedPose& next, const KeyframeThresholds& thresholds) {
  const double dp = (next.pose.translation() - last.pose.translation()).norm();
  const double dr = relative_rotation_angle(last.pose, next.pose);
  const double dt = next.stamp - last.stamp;
  return dp > thresholds.d_pos || dr > thresholds.d_rot || dt > thresholds.d_t;
}

// ---------------------------------------------------------------------------
// Keyframes and frustum geometry

Keyframe::Keyframe(std::vector<Vec3> points, const Pose& pose, double stamp)
    : index_(std::move(points)), pose_(pose), inverse_(pose.inverse(Eigen::Isometry)), stamp_(stamp) {}

bool in_frustum(const Vec3& p, const CameraModel& camera) {
  if (p.z() < camera.min_range || p.z() > camera.max_range) return false;
  // A relative tolerance keeps points exactly on a face inside despite the
  // rounding of tan() (tan(pi/4) evaluates just below 1).
  const double tx = std::tan(0.5 * camera.horizontal_fov) * (1.0 + 1e-12);
  const double ty = std::tan(0.5 * camera.vertical_fov) * (1.0 + 1e-12);
  return std::abs(p.x()) <= p.z() * tx && std::abs(p.y()) <= p.z() * ty;
}

double frustum_edge_distance(const Vec3& p, const CameraModel& camera) {
  const double sh = std::sin(0.5 * camera.horizontal_fov);
  const double ch = std::cos(0.5 * camera.horizontal_fov);
  const double sv = std::sin(0.5 * camera.vertical_fov);
  const double cv = std::cos(0.5 * camera.vertical_fov);
  // Side planes pass through the optical centre; inward distance of p.
  const double side_x = p.z() * sh - std::abs(p.x()) * ch;
  const double side_y = p.z() * sv - std::abs(p.y()) * cv;
  const double near_d = p.z() - camera.min_range;
  const double far_d = camera.max_range - p.z();
  return std::max(0.0, std::min({side_x, side_y, near_d, far_d}));
}

bool is_in_fov(const Vec3& x_world, const Keyframe& keyframe, const CameraModel& camera) {
  return in_frustum(keyframe.world_to_camera() * x_world, camera);
}

double min_edge_distance(const Vec3& x_world, const Keyframe& keyframe, const CameraModel& camera) {
  const Vec3 p = keyframe.world_to_camera() * x_world;
  if (!in_frustum(p, camera)) throw Error(ErrorCode::out_of_fov, "min_edge_distance on a point outside the frustum");
  return frustum_edge_distance(p, camera);
}

// ---------------------------------------------------------------------------
// PicoMap

PicoMap::PicoMap(CameraModel camera, PicoMapConfig config) : camera_(camera), config_(config) {
  camera_.validate();
  if (config_.n_keyframes == 0) throw Error(ErrorCode::invalid_argument, "n_keyframes must be positive");
}

Pose PicoMap::chained_pose(std::size_t i) const {
  Pose pose = ring_.at(0).pose();
  for (std::size_t j = 0; j < i; ++j) pose = pose * tfs_.at(j);
  return pose;
}

bool PicoMap::should_insert(const StampedPose& next) const {
  if (ring_.empty()) return true;
  return should_insert_keyframe({ring_.front().pose(), ring_.front().stamp()}, next, config_.thresholds);
}

void PicoMap::insert_keyframe(const DepthFrame& frame) {
  insert_points(adaptive_downsample(frame, camera_, config_.downsample_budget, config_.downsample), frame.pose,
                frame.stamp);
}

void PicoMap::insert_points(std::vector<Vec3> points_cam, const Pose& pose, double stamp) {
  if (!ring_.empty()) tfs_.push_front(pose.inverse(Eigen::Isometry) * ring_.front().pose());
  ring_.emplace_front(std::move(points_cam), pose, stamp);
  if (ring_.size() > config_.n_keyframes) {
    ring_.pop_back();
    tfs_.pop_back();
  }
  now_ = std::max(now_, stamp);
}

double PicoMap::accumulated_translation(std::size_t i) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < i && j < tfs_.size(); ++j) acc += tfs_[j].translation().norm();
  return acc;
}

double PicoMap::estimate_standard_deviation(std::size_t i) const {
  const auto& u = config_.uncertainty;
  const double age = std::max(0.0, now_ - ring_.at(i).stamp());
  return u.sigma0 + u.k_t * age + u.k_d * accumulated_translation(i);
}

QueryResult PicoMap::safe_radius_query(const Vec3& x_query) const {
  if (ring_.empty()) throw Error(ErrorCode::no_data, "safe_radius_query on an empty map");
  const auto& u = config_.uncertainty;

  QueryResult best;
  best.r_safe = std::numeric_limits<double>::infinity();
  bool seen = false;
  std::size_t first_nonempty = ring_.size();
  double acc = 0.0;

  for (std::size_t i = 0; i < ring_.size(); ++i) {
    if (i > 0) acc += tfs_[i - 1].translation().norm();
    const Keyframe& kf = ring_[i];
    if (kf.empty()) continue;
    if (first_nonempty == ring_.size()) first_nonempty = i;

    const Vec3 p = kf.world_to_camera() * x_query;
    if (!in_frustum(p, camera_)) continue;
    seen = true;

    const double sigma = u.sigma0 + u.k_t * std::max(0.0, now_ - kf.stamp()) + u.k_d * acc;
    const double d_edge = frustum_edge_distance(p, camera_);
    // A neighbour at or beyond max(best + sigma, d_edge) can neither lower the
    // running minimum nor end the scan, so the search may stop there. The
    // bound is padded so rounding never hides a point that matters.
    std::optional<Neighbor> found;
    if (std::isinf(best.r_safe)) {
      found = kf.index().nearest(p);
    } else {
      const double bound = std::max(best.r_safe + sigma, d_edge);
      found = kf.index().nearest_within(p, bound * (1.0 + 1e-12) + 1e-12);
      if (!found) continue;
    }
    const Neighbor nn = *found;
    const double r = nn.distance - sigma;
    if (r < best.r_safe) {
      best.r_safe = r;
      best.x_obstacle = kf.pose() * kf.points()[nn.index];
      best.keyframe = i;
    }
    if (nn.distance < d_edge) {
      best.conclusive = true;
      break;
    }
  }

  if (first_nonempty == ring_.size()) throw Error(ErrorCode::no_data, "all keyframes are empty");

  if (!seen) {
    // Optimistic fallback: raw nearest neighbour in the newest usable frame.
    const Keyframe& kf = ring_[first_nonempty];
    const Neighbor nn = *kf.index().nearest(kf.world_to_camera() * x_query);
    best.r_safe = nn.distance;
    best.x_obstacle = kf.pose() * kf.points()[nn.index];
    best.keyframe = first_nonempty;
    best.never_seen = true;
    return best;
  }
  best.r_safe = std::max(0.0, best.r_safe);
  return best;
}

}  // namespace mapless
