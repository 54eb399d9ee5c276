#pragma once

#include <algorithm>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mapless {

using Vec3 = Eigen::Vector3d;
using Pose = Eigen::Isometry3d;

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool empty() const { return (max.array() <= min.array()).any(); }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(min).cwiseMin(max); }
  Box intersect(const Box& other) const { return {min.cwiseMax(other.min), max.cwiseMin(other.max)}; }
};

struct StampedPose {
  Pose pose = Pose::Identity();
  double stamp = 0.0;
};

inline Pose make_pose(const Vec3& translation, const Eigen::Quaterniond& rotation) {
  Pose pose = Pose::Identity();
  pose.linear() = rotation.normalized().toRotationMatrix();
  pose.translation() = translation;
  return pose;
}

// Rotation angle of the relative rotation between two poses, in [0, pi].
inline double relative_rotation_angle(const Pose& a, const Pose& b) {
  const Eigen::Quaterniond rel(a.linear().transpose() * b.linear());
  return Eigen::AngleAxisd(rel).angle();
}

}  // namespace mapless
