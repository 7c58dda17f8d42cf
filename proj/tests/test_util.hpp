#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "reposer/spatial.hpp"

namespace reposer::testing {

inline Quaternion random_unit_quaternion(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion{n(gen), n(gen), n(gen), n(gen)}.normalized();
}

inline Vec3 random_vec(std::mt19937_64& gen, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(gen), u(gen), u(gen)};
}

inline Pose random_pose(std::mt19937_64& gen) { return {random_vec(gen, 0.2), random_unit_quaternion(gen)}; }

// Rodrigues rotation matrix, built without quaternions.
inline Mat3 axis_angle_matrix(Vec3 axis, double angle) {
  axis = axis / norm(axis);
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  const double x = axis.x, y = axis.y, z = axis.z;
  return {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
           {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
           {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
}

inline Vec3 mat_vec(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z, m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

}  // namespace reposer::testing
