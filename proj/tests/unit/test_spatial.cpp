#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "../test_util.hpp"
#include "reposer/spatial.hpp"

using namespace reposer;
using reposer::testing::random_pose;
using reposer::testing::random_unit_quaternion;

TEST_CASE("cube corners follow the bit-pattern order") {
  const KeypointSet k = cube_local_keypoints(0.5);
  CHECK(k.points[0] == Vec3{-0.5, -0.5, -0.5});
  CHECK(k.points[7] == Vec3{0.5, 0.5, 0.5});
  CHECK(k.points[1] == Vec3{0.5, -0.5, -0.5});
  CHECK(k.points[2] == Vec3{-0.5, 0.5, -0.5});
  CHECK(k.points[4] == Vec3{-0.5, -0.5, 0.5});

  const KeypointSet c = cube_local_keypoints(0.0325);
  Vec3 centroid;
  for (const Vec3& p : c.points) {
    CHECK(std::abs(p.x) == 0.0325);
    CHECK(std::abs(p.y) == 0.0325);
    CHECK(std::abs(p.z) == 0.0325);
    centroid += p;
  }
  CHECK(norm(centroid) == 0.0);

  CHECK_THROWS_AS(cube_local_keypoints(0.0), std::invalid_argument);
  CHECK_THROWS_AS(cube_local_keypoints(-1.0), std::invalid_argument);
}

TEST_CASE("pose_to_keypoints: identity, translation, rotation oracle") {
  const KeypointSet local = cube_local_keypoints(0.0325);
  CHECK(pose_to_keypoints(Pose{}, local) == local);

  const KeypointSet shifted = pose_to_keypoints({{0.1, 0, 0}, {}}, local);
  for (int i = 0; i < kNumKeypoints; ++i) CHECK(norm(shifted.points[i] - (local.points[i] + Vec3{0.1, 0, 0})) < 1e-15);

  const double angle = std::numbers::pi / 2;
  const Mat3 R = reposer::testing::axis_angle_matrix({0, 0, 1}, angle);
  const KeypointSet rotated = pose_to_keypoints({{0.01, -0.02, 0.03}, Quaternion::from_axis_angle({0, 0, 1}, angle)}, local);
  for (int i = 0; i < kNumKeypoints; ++i) {
    const Vec3 expected = reposer::testing::mat_vec(R, local.points[i]) + Vec3{0.01, -0.02, 0.03};
    CHECK(norm(rotated.points[i] - expected) < 1e-12);
  }
  // A 90 degree turn about z maps corner 0 (-,-,-) onto where corner 1 (+,-,-) was.
  CHECK(norm(rotated.points[0] - Vec3{0.01, -0.02, 0.03} - local.points[1]) < 1e-12);
}

TEST_CASE("random rotations agree with the Rodrigues matrix oracle") {
  std::mt19937_64 gen(11);
  const KeypointSet local = cube_local_keypoints(0.0325);
  for (int n = 0; n < 200; ++n) {
    const Vec3 axis = reposer::testing::random_vec(gen, 1.0);
    const double angle = std::uniform_real_distribution<double>(-3.0, 3.0)(gen);
    const Mat3 R = reposer::testing::axis_angle_matrix(axis, angle);
    const KeypointSet k = pose_to_keypoints({{}, Quaternion::from_axis_angle(axis, angle)}, local);
    for (int i = 0; i < kNumKeypoints; ++i) CHECK(norm(k.points[i] - reposer::testing::mat_vec(R, local.points[i])) < 1e-12);
  }
}

TEST_CASE("keypoints_to_flat layout") {
  KeypointSet k = cube_local_keypoints(1.0);
  k.points[0] = {1, 2, 3};
  const auto flat = keypoints_to_flat(k);
  CHECK(flat[0] == 1);
  CHECK(flat[1] == 2);
  CHECK(flat[2] == 3);
  CHECK(keypoints_from_flat(flat) == k);

  const auto cube = keypoints_to_flat(pose_to_keypoints(Pose{}, cube_local_keypoints(0.0325)));
  for (double v : cube) CHECK(std::abs(v) == 0.0325);
}

TEST_CASE("logistic kernel values") {
  CHECK(logistic_kernel(0.0, {30, 2}) == 0.25);
  CHECK(logistic_kernel(0.1, {30, 2}) == doctest::Approx(1.0 / (std::exp(3.0) + 2.0 + std::exp(-3.0))).epsilon(1e-14));
  CHECK(logistic_kernel(0.1, {30, 2}) == doctest::Approx(0.04518).epsilon(1e-4));
  CHECK(logistic_kernel(1.0, {50, 2}) < 1e-20);
  CHECK(logistic_kernel(0.05, {30, 2}) == logistic_kernel(-0.05, {30, 2}));
  // Monotone decreasing on a grid.
  double prev = logistic_kernel(0.0, {30, 2});
  for (int i = 1; i <= 2000; ++i) {
    const double k = logistic_kernel(i * 5e-4, {30, 2});
    CHECK(k < prev);
    prev = k;
  }
}

TEST_CASE("rot_dist") {
  const Quaternion q = Quaternion::from_axis_angle({1, 2, 3}, 0.7);
  CHECK(rot_dist(q, q) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rot_dist(q, -q) < 1e-7);
  CHECK(rot_dist(Quaternion::from_axis_angle({0, 0, 1}, std::numbers::pi), Quaternion{}) ==
        doctest::Approx(std::numbers::pi).epsilon(1e-12));
  for (double angle : {0.1, 0.5, 1.0, 2.0, 3.0}) {
    const Quaternion r = Quaternion::from_axis_angle({0.3, -1, 0.2}, angle);
    CHECK(rot_dist(r * q, q) == doctest::Approx(angle).epsilon(1e-9));
  }
}

TEST_CASE("rot_dist is a metric on rotations") {
  std::mt19937_64 gen(5);
  for (int n = 0; n < 2000; ++n) {
    const Quaternion a = random_unit_quaternion(gen), b = random_unit_quaternion(gen), c = random_unit_quaternion(gen);
    const double ab = rot_dist(a, b), ba = rot_dist(b, a);
    CHECK(ab >= 0.0);
    CHECK(ab <= std::numbers::pi + 1e-12);
    CHECK(std::abs(ab - ba) < 1e-6);
    CHECK(rot_dist(a, c) <= ab + rot_dist(b, c) + 1e-6);
    CHECK(std::abs(rot_dist(-a, b) - ab) < 1e-6);
  }
}

TEST_CASE("quaternion sign filter") {
  const Quaternion last = Quaternion::from_axis_angle({0, 1, 0}, 0.4);
  CHECK(quat_sign_filter(-last, last) == last);
  CHECK(quat_sign_filter(last, last) == last);

  // Perturb -last by a vector of length 0.1 orthogonal to it.
  Quaternion perturbed{-last.x + 0.1, -last.y, -last.z, -last.w};
  const double dist_to_neg = std::sqrt(std::pow(last.x - (-perturbed.x), 2) + std::pow(last.y - (-perturbed.y), 2) +
                                       std::pow(last.z - (-perturbed.z), 2) + std::pow(last.w - (-perturbed.w), 2));
  REQUIRE(dist_to_neg == doctest::Approx(0.1));
  CHECK(quat_sign_filter(perturbed, last) == -perturbed);

  // Unrelated rotation keeps its sign.
  const Quaternion far = Quaternion::from_axis_angle({1, 0, 0}, 2.0);
  CHECK(quat_sign_filter(far, last) == far);
}

TEST_CASE("keypoint properties over random poses") {
  std::mt19937_64 gen(42);
  const KeypointSet local = cube_local_keypoints(0.0325);
  for (int n = 0; n < 2000; ++n) {
    const Pose p = random_pose(gen);
    const KeypointSet k = pose_to_keypoints(p, local);
    // Double cover: bit-identical.
    CHECK(pose_to_keypoints({p.translation, -p.rotation}, local) == k);
    CHECK(keypoint_distance_sum(k, pose_to_keypoints({p.translation, -p.rotation}, local)) == 0.0);
    // Rigid edges.
    for (int i = 0; i < kNumKeypoints; ++i)
      for (int b = 0; b < 3; ++b) {
        const int j = i ^ (1 << b);
        CHECK(std::abs(norm(k.points[i] - k.points[j]) - 0.065) < 1e-9);
      }
    // Inverse pose recovers the local corners.
    const KeypointSet back = pose_to_keypoints(p.inverse(), k);
    for (int i = 0; i < kNumKeypoints; ++i) CHECK(norm(back.points[i] - local.points[i]) < 1e-9);
    // Different pose -> positive distance.
    const Pose other = random_pose(gen);
    CHECK(keypoint_distance_sum(k, pose_to_keypoints(other, local)) > 0.0);
  }
}
