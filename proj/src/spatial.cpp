#include "reposer/spatial.hpp"

#include <algorithm>
#include <stdexcept>

namespace reposer {

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = reposer::norm(axis);
  if (n == 0.0) return identity();
  const double s = std::sin(0.5 * angle) / n;
  return {axis.x * s, axis.y * s, axis.z * s, std::cos(0.5 * angle)};
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  if (n == 0.0 || !std::isfinite(n)) return identity();
  return {x / n, y / n, z / n, w / n};
}

Mat3 to_matrix(const Quaternion& q) {
  const Vec3 c0 = rotate(q, {1, 0, 0});
  const Vec3 c1 = rotate(q, {0, 1, 0});
  const Vec3 c2 = rotate(q, {0, 0, 1});
  return {{{c0.x, c1.x, c2.x}, {c0.y, c1.y, c2.y}, {c0.z, c1.z, c2.z}}};
}

Quaternion integrate_angular(const Quaternion& q, const Vec3& omega, double dt) {
  const double angle = norm(omega) * dt;
  if (angle == 0.0) return q;
  return (Quaternion::from_axis_angle(omega, angle) * q).normalized();
}

Pose Pose::inverse() const {
  const Quaternion inv = rotation.conjugate();
  return {-rotate(inv, translation), inv};
}

KeypointSet cube_local_keypoints(double half_extent) {
  if (!(half_extent > 0.0)) throw std::invalid_argument("cube_local_keypoints: half_extent must be > 0");
  KeypointSet out;
  for (int i = 0; i < kNumKeypoints; ++i) {
    out.points[i] = {(i & 1) ? half_extent : -half_extent, (i & 2) ? half_extent : -half_extent,
                     (i & 4) ? half_extent : -half_extent};
  }
  return out;
}

KeypointSet pose_to_keypoints(const Pose& pose, const KeypointSet& local) {
  const Pose p{pose.translation, pose.rotation.normalized()};
  KeypointSet out;
  for (int i = 0; i < kNumKeypoints; ++i) out.points[i] = p.apply(local.points[i]);
  return out;
}

std::array<double, kKeypointFlatDim> keypoints_to_flat(const KeypointSet& kps) {
  std::array<double, kKeypointFlatDim> flat{};
  for (int i = 0; i < kNumKeypoints; ++i) {
    flat[3 * i + 0] = kps.points[i].x;
    flat[3 * i + 1] = kps.points[i].y;
    flat[3 * i + 2] = kps.points[i].z;
  }
  return flat;
}

KeypointSet keypoints_from_flat(std::span<const double, kKeypointFlatDim> flat) {
  KeypointSet out;
  for (int i = 0; i < kNumKeypoints; ++i) out.points[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
  return out;
}

double keypoint_distance_sum(const KeypointSet& a, const KeypointSet& b) {
  double s = 0.0;
  for (int i = 0; i < kNumKeypoints; ++i) s += norm(a.points[i] - b.points[i]);
  return s;
}

double logistic_kernel(double x, const KernelParams& p) {
  const double ax = p.a * x;
  return 1.0 / (std::exp(ax) + p.b + std::exp(-ax));
}

double rot_dist(const Quaternion& q1, const Quaternion& q2) {
  const Quaternion diff = q1 * q2.conjugate();
  return 2.0 * std::asin(std::min(1.0, norm(diff.vec())));
}

Quaternion quat_sign_filter(const Quaternion& q_new, const Quaternion& q_last, double threshold) {
  const Quaternion neg = -q_new;
  const double dx = q_last.x - neg.x, dy = q_last.y - neg.y, dz = q_last.z - neg.z, dw = q_last.w - neg.w;
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz + dw * dw);
  return d < threshold ? neg : q_new;
}

}  // namespace reposer
