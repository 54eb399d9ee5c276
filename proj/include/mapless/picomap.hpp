#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "mapless/kdtree.hpp"
#include "mapless/types.hpp"

namespace mapless {

// Pinhole depth camera. Camera frame: +z optical axis, +x right, +y down.
// The viewing frustum is bounded by four planes through the optical centre
// and by the near/far planes z = min_range and z = max_range.
struct CameraModel {
  int width = 160;
  int height = 120;
  double horizontal_fov = deg_to_rad(78.0);
  double vertical_fov = deg_to_rad(64.0);
  double min_range = 0.1;
  double max_range = 10.0;

  double fx() const;
  double fy() const;
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  // Camera-frame point at z-depth `depth` through the centre of pixel (u, v).
  Vec3 back_project(int u, int v, double depth) const;
  void validate() const;
};

// Registered depth + intensity pair. Depth is z-depth in metres, 0 = invalid.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  std::vector<std::uint8_t> intensity;
  Pose pose = Pose::Identity();  // camera -> world
  double stamp = 0.0;

  float depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  std::uint8_t intensity_at(int u, int v) const { return intensity[static_cast<std::size_t>(v) * width + u]; }
};

struct KeyframeThresholds {
  double d_pos = 0.5;                 // metres
  double d_rot = deg_to_rad(15.0);    // radians
  double d_t = 0.5;                   // seconds
};

// Sigma_i = sigma0 + k_t * age + k_d * (translation accumulated along the chain)
struct UncertaintyParams {
  double sigma0 = 0.01;
  double k_t = 0.01;
  double k_d = 0.02;
};

struct DownsampleParams {
  int block_size = 16;
  double s_min = 2.0;
  double s_max = 8.0;
};

struct PicoMapConfig {
  std::size_t n_keyframes = 16;
  KeyframeThresholds thresholds;
  UncertaintyParams uncertainty;
  std::size_t downsample_budget = 2000;
  DownsampleParams downsample;
};

// Per-block relative strides of the texture-adaptive sampler, row-major over
// blocks. Exposed for inspection; adaptive_downsample uses the same values.
struct BlockStrides {
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<double> gradient;  // mean intensity-gradient magnitude per block
  std::vector<double> stride;    // s_max - (s_max - s_min) * g / g_max
};

BlockStrides compute_block_strides(const DepthFrame& frame, const DownsampleParams& params);

// Texture-adaptive subsampling of the valid depth pixels, back-projected into
// the camera frame. Returns at most 1.2 * budget points.
std::vector<Vec3> adaptive_downsample(const DepthFrame& frame, const CameraModel& camera,
                                      std::size_t budget, const DownsampleParams& params = {});

bool should_insert_keyframe(const StampedPose& last, const StampedPose& next,
                            const KeyframeThresholds& thresholds);

class Keyframe {
 public:
  Keyframe(std::vector<Vec3> points, const Pose& pose, double stamp);

  const std::vector<Vec3>& points() const { return index_.points(); }
  const KdTree& index() const { return index_; }
  const Pose& pose() const { return pose_; }               // camera -> world
  const Pose& world_to_camera() const { return inverse_; }
  double stamp() const { return stamp_; }
  bool empty() const { return index_.empty(); }

 private:
  KdTree index_;
  Pose pose_;
  Pose inverse_;
  double stamp_;
};

// Frustum tests on camera-frame points.
bool in_frustum(const Vec3& p_cam, const CameraModel& camera);
double frustum_edge_distance(const Vec3& p_cam, const CameraModel& camera);

bool is_in_fov(const Vec3& x_world, const Keyframe& keyframe, const CameraModel& camera);
// Distance to the nearest of the six frustum faces. Throws Error(out_of_fov)
// when the point is outside the frustum.
double min_edge_distance(const Vec3& x_world, const Keyframe& keyframe, const CameraModel& camera);

struct QueryResult {
  double r_safe = 0.0;
  Vec3 x_obstacle = Vec3::Zero();
  std::size_t keyframe = 0;  // ring index of the answering keyframe
  bool never_seen = false;   // no keyframe contained the query in its FOV
  bool conclusive = false;   // answered by a view with d < d_edge
};

class PicoMap {
 public:
  explicit PicoMap(CameraModel camera = {}, PicoMapConfig config = {});

  const CameraModel& camera() const { return camera_; }
  const PicoMapConfig& config() const { return config_; }

  std::size_t size() const { return ring_.size(); }
  bool empty() const { return ring_.empty(); }
  // Ring index 0 is the newest keyframe.
  const Keyframe& keyframe(std::size_t i) const { return ring_.at(i); }
  auto keyframe_begin() const { return ring_.begin(); }
  auto keyframe_end() const { return ring_.end(); }
  // tf(i) maps keyframe i+1's camera frame into keyframe i's: pose(i)^-1 * pose(i+1).
  const Pose& relative_transform(std::size_t i) const { return tfs_.at(i); }
  std::size_t relative_transform_count() const { return tfs_.size(); }
  // Pose of keyframe i obtained by composing the relative transforms from the head.
  Pose chained_pose(std::size_t i) const;

  bool should_insert(const StampedPose& next) const;
  // Downsamples the frame and pushes it at the ring head, evicting the oldest
  // keyframe when full.
  void insert_keyframe(const DepthFrame& frame);
  void insert_points(std::vector<Vec3> points_cam, const Pose& pose, double stamp);

  // Query time used for the age term of the uncertainty model.
  void set_clock(double now) { now_ = now; }
  double clock() const { return now_; }

  double accumulated_translation(std::size_t i) const;
  double estimate_standard_deviation(std::size_t i) const;

  QueryResult safe_radius_query(const Vec3& x_query) const;

 private:
  CameraModel camera_;
  PicoMapConfig config_;
  std::deque<Keyframe> ring_;
  std::deque<Pose> tfs_;
  double now_ = 0.0;
};

}  // namespace mapless
