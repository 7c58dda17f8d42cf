#pragma once

#include <array>
#include <cmath>
#include <span>

namespace reposer {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline bool isfinite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Rotation quaternion stored as (x, y, z, w); w is the scalar part.
/// q and -q describe the same rotation.
struct Quaternion {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;

  constexpr Quaternion() = default;
  constexpr Quaternion(double x_, double y_, double z_, double w_) : x(x_), y(y_), z(z_), w(w_) {}

  static constexpr Quaternion identity() { return {}; }
  static Quaternion from_axis_angle(const Vec3& axis, double angle);

  constexpr Vec3 vec() const { return {x, y, z}; }
  constexpr Quaternion conjugate() const { return {-x, -y, -z, w}; }
  constexpr Quaternion operator-() const { return {-x, -y, -z, -w}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }
  Quaternion normalized() const;
  constexpr bool operator==(const Quaternion&) const = default;
};

/// Hamilton product.
constexpr Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
          a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z};
}

/// Rotates v by unit quaternion q. The result is bit-identical for q and -q
/// since every term is quadratic in the quaternion components.
constexpr Vec3 rotate(const Quaternion& q, const Vec3& v) {
  const double xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  return {(1.0 - 2.0 * (yy + zz)) * v.x + 2.0 * (xy - wz) * v.y + 2.0 * (xz + wy) * v.z,
          2.0 * (xy + wz) * v.x + (1.0 - 2.0 * (xx + zz)) * v.y + 2.0 * (yz - wx) * v.z,
          2.0 * (xz - wy) * v.x + 2.0 * (yz + wx) * v.y + (1.0 - 2.0 * (xx + yy)) * v.z};
}

using Mat3 = std::array<std::array<double, 3>, 3>;
Mat3 to_matrix(const Quaternion& q);

/// Integrates a world-frame angular velocity over dt: q <- exp(omega dt / 2) * q.
Quaternion integrate_angular(const Quaternion& q, const Vec3& omega, double dt);

struct Pose {
  Vec3 translation;
  Quaternion rotation;

  Vec3 apply(const Vec3& p) const { return rotate(rotation, p) + translation; }
  Pose inverse() const;
};

inline constexpr int kNumKeypoints = 8;
inline constexpr int kKeypointFlatDim = 3 * kNumKeypoints;

/// Eight cube corners. Corner i has coordinate k = +h when bit k of i is set
/// and -h otherwise (bit 0 -> x, bit 1 -> y, bit 2 -> z).
struct KeypointSet {
  std::array<Vec3, kNumKeypoints> points{};
  bool operator==(const KeypointSet&) const = default;
};

struct KernelParams {
  double a = 30.0;
  double b = 2.0;
};

KeypointSet cube_local_keypoints(double half_extent);
KeypointSet pose_to_keypoints(const Pose& pose, const KeypointSet& local);
std::array<double, kKeypointFlatDim> keypoints_to_flat(const KeypointSet& kps);
KeypointSet keypoints_from_flat(std::span<const double, kKeypointFlatDim> flat);

/// Sum over corners of the Euclidean distance between matching keypoints.
double keypoint_distance_sum(const KeypointSet& a, const KeypointSet& b);

/// K(x) = 1 / (e^{ax} + b + e^{-ax}).
double logistic_kernel(double x, const KernelParams& p);

/// Angle of the relative rotation q1 q2*, from the norm of its vector part.
double rot_dist(const Quaternion& q1, const Quaternion& q2);

/// Returns -q_new when q_last is within 0.2 (Euclidean, 4-D) of -q_new.
Quaternion quat_sign_filter(const Quaternion& q_new, const Quaternion& q_last,
                            double threshold = 0.2);

}  // namespace reposer
