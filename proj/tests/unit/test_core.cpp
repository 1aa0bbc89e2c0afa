#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "evrecon/camera.hpp"
#include "evrecon/error.hpp"
#include "evrecon/frame.hpp"
#include "evrecon/pose.hpp"
#include "oracles.hpp"

using namespace evrecon;

namespace {

Vector6d twist(double wx, double wy, double wz, double vx, double vy, double vz) {
  Vector6d t;
  t << wx, wy, wz, vx, vy, vz;
  return t;
}

}  // namespace

TEST_CASE("se3_exp of zero twist is identity") {
  const Pose p = se3_exp(Vector6d::Zero());
  CHECK(p.rotation().isApprox(Eigen::Matrix3d::Identity(), 0.0));
  CHECK(p.translation().norm() == 0.0);
}

TEST_CASE("se3_exp quarter turn about z") {
  const Pose p = se3_exp(twist(0, 0, std::numbers::pi / 2, 0, 0, 0));
  const Eigen::Matrix4d ref = oracle::se3_exp_matrix(twist(0, 0, std::numbers::pi / 2, 0, 0, 0));
  CHECK(p.rotation()(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(p.rotation()(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((oracle::to_matrix(p) - ref).norm() < 1e-12);
}

TEST_CASE("se3_exp pure translation") {
  const Pose p = se3_exp(twist(0, 0, 0, 1, 2, 3));
  CHECK(p.rotation().isApprox(Eigen::Matrix3d::Identity()));
  CHECK((p.translation() - Eigen::Vector3d(1, 2, 3)).norm() < 1e-15);
}

TEST_CASE("se3_exp matches the matrix exponential on random twists") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vector6d t = oracle::random_twist(rng, 3.0, 2.0);
    CHECK((oracle::to_matrix(se3_exp(t)) - oracle::se3_exp_matrix(t)).norm() < 1e-9);
  }
  // tiny angles go through the series branch
  const Vector6d t = twist(1e-9, -2e-9, 3e-10, 0.5, 0.1, -0.2);
  CHECK((oracle::to_matrix(se3_exp(t)) - oracle::se3_exp_matrix(t)).norm() < 1e-14);
}

TEST_CASE("se3_exp rejects non-finite twists") {
  CHECK_THROWS_AS(se3_exp(twist(std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, 0, 0)), InvalidArgument);
  CHECK_THROWS_AS(se3_exp(twist(0, 0, 0, std::numeric_limits<double>::infinity(), 0, 0)), InvalidArgument);
}

TEST_CASE("se3_log inverts se3_exp") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vector6d t = oracle::random_twist(rng, 1.0, 2.0);
    const Pose p = se3_exp(t);
    CHECK((se3_log(p.rotation(), p.translation()) - t).norm() < 1e-9);
  }
  const Pose near_pi = se3_exp(twist(0, 0, std::numbers::pi - 1e-7, 0.3, 0.0, 0.0));
  const Pose back = Pose::from_twist(se3_log(near_pi.rotation(), near_pi.translation()));
  CHECK((oracle::to_matrix(back) - oracle::to_matrix(near_pi)).norm() < 1e-6);
}

TEST_CASE("compose with identity and inverse") {
  std::mt19937_64 rng(3);
  const Pose p = se3_exp(oracle::random_twist(rng, 0.5, 1.0));
  const Pose a = se3_compose(Pose(), p);
  CHECK((oracle::to_matrix(a) - oracle::to_matrix(p)).norm() < 1e-12);
  const Pose b = se3_compose(p, se3_invert(p));
  CHECK((oracle::to_matrix(b) - Eigen::Matrix4d::Identity()).norm() < 1e-9);
  CHECK(b.angle() < 1e-9);
}

TEST_CASE("compose matches homogeneous matrix product") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Vector6d ta = oracle::random_twist(rng, 0.2, 0.3), tb = oracle::random_twist(rng, 0.2, 0.3);
    const Eigen::Matrix4d ref = oracle::se3_exp_matrix(ta) * oracle::se3_exp_matrix(tb);
    CHECK((oracle::to_matrix(se3_compose(se3_exp(ta), se3_exp(tb))) - ref).norm() < 1e-9);
  }
}

TEST_CASE("pose acts on points as R x + t") {
  const Pose p = se3_exp(twist(0, 0, std::numbers::pi / 2, 1, 0, 0));
  const Eigen::Matrix4d m = oracle::se3_exp_matrix(twist(0, 0, std::numbers::pi / 2, 1, 0, 0));
  const Eigen::Vector3d x(0.3, -0.2, 2.0);
  CHECK((p * x - (m * x.homogeneous()).head<3>()).norm() < 1e-12);
}

TEST_CASE("rotation and direction distances") {
  const Pose a = se3_exp(twist(0, 0, 0.1, 1, 0, 0));
  const Pose b = se3_exp(twist(0, 0, 0.3, 0, 1, 0));
  CHECK(rotation_distance(a, b) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(direction_angle({1, 0, 0}, {0, 2, 0}) == doctest::Approx(std::numbers::pi / 2));
  CHECK(direction_angle({1, 1, 0}, {2, 2, 0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(direction_angle({0, 0, 0}, {1, 0, 0}) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("twist derivative matches finite differences of the matrix exponential") {
  std::mt19937_64 rng(5);
  const Vector6d t = oracle::random_twist(rng, 0.7, 1.0);
  const PoseDerivative d = twist_derivative(t);
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    Vector6d p = t, m = t;
    p[i] += h;
    m[i] -= h;
    const Eigen::Matrix4d fd = (oracle::se3_exp_matrix(p) - oracle::se3_exp_matrix(m)) / (2 * h);
    CHECK((d.rotation[i] - fd.block<3, 3>(0, 0)).norm() < 1e-7);
    CHECK((d.translation[i] - fd.block<3, 1>(0, 3)).norm() < 1e-7);
  }
}

TEST_CASE("inverse and compose derivatives") {
  std::mt19937_64 rng(6);
  const Vector6d ta = oracle::random_twist(rng, 0.5, 1.0), tb = oracle::random_twist(rng, 0.5, 1.0);
  const Pose a = se3_exp(ta), b = se3_exp(tb);
  const PoseDerivative da = twist_derivative(ta);
  const PoseDerivative inv = invert_derivative(a, da);
  const PoseDerivative left = compose_derivative_left(da, b);
  const PoseDerivative right = compose_derivative_right(b, da);
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    Vector6d p = ta, m = ta;
    p[i] += h;
    m[i] -= h;
    const Eigen::Matrix4d mp = oracle::se3_exp_matrix(p), mm = oracle::se3_exp_matrix(m);
    const Eigen::Matrix4d fi = (mp.inverse() - mm.inverse()) / (2 * h);
    const Eigen::Matrix4d fl = (mp * oracle::to_matrix(b) - mm * oracle::to_matrix(b)) / (2 * h);
    const Eigen::Matrix4d fr = (oracle::to_matrix(b) * mp - oracle::to_matrix(b) * mm) / (2 * h);
    CHECK((inv.rotation[i] - fi.block<3, 3>(0, 0)).norm() < 1e-7);
    CHECK((inv.translation[i] - fi.block<3, 1>(0, 3)).norm() < 1e-7);
    CHECK((left.rotation[i] - fl.block<3, 3>(0, 0)).norm() < 1e-7);
    CHECK((left.translation[i] - fl.block<3, 1>(0, 3)).norm() < 1e-7);
    CHECK((right.rotation[i] - fr.block<3, 3>(0, 0)).norm() < 1e-7);
    CHECK((right.translation[i] - fr.block<3, 1>(0, 3)).norm() < 1e-7);
  }
}

TEST_CASE("project") {
  const CameraIntrinsics k(100, 100, 50, 50, 101, 101);
  for (double z : {0.1, 1.0, 37.0}) {
    const Projection p = project({0, 0, z}, k);
    CHECK(p.pixel.x() == 50.0);
    CHECK(p.pixel.y() == 50.0);
    CHECK(p.in_bounds);
  }
  const Projection p = project({1, 0, 2}, k);
  CHECK(p.pixel.x() == doctest::Approx(100.0));
  CHECK(p.pixel.y() == doctest::Approx(50.0));
  CHECK_FALSE(project({0, 0, -1}, k).in_bounds);
  CHECK_FALSE(project({10, 0, 1}, k).in_bounds);
}

TEST_CASE("backproject") {
  const CameraIntrinsics k(100, 100, 50, 50, 101, 101);
  const Eigen::Vector3d a = backproject({50, 50}, 0.25, k);
  CHECK((a - Eigen::Vector3d(0, 0, 4)).norm() < 1e-15);
  const Eigen::Vector3d b = backproject({100, 50}, 0.5, k);
  CHECK((b - Eigen::Vector3d(1, 0, 2)).norm() < 1e-12);
  CHECK_THROWS_AS(backproject({1, 1}, 0.0, k), InvalidArgument);
  CHECK_THROWS_AS(backproject({1, 1}, -1.0, k), InvalidArgument);
}

TEST_CASE("backproject then project round-trips") {
  const CameraIntrinsics k(120, 110, 63.2, 58.7, 128, 120);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 127), v(0, 119), q(0.05, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d px(u(rng), v(rng));
    const double inv = q(rng);
    const Eigen::Vector3d x = backproject(px, inv, k);
    CHECK((project(x, k).pixel - px).norm() < 1e-9);
    CHECK(1.0 / x.z() == doctest::Approx(inv).epsilon(1e-12));
    CHECK((oracle::pinhole(x, 120, 110, 63.2, 58.7) - px).norm() < 1e-9);
  }
}

TEST_CASE("calibration text") {
  const CameraIntrinsics k = parse_calibration("  200 201.5 63.5 47.5 128 96\n");
  CHECK(k == CameraIntrinsics(200, 201.5, 63.5, 47.5, 128, 96));
  CHECK(parse_calibration(format_calibration(k)) == k);
  CHECK_THROWS(parse_calibration("200 200 63.5"));
  CHECK_THROWS(parse_calibration("200 200 63.5 47.5 128 -3"));
  CHECK_THROWS(parse_calibration("-1 200 63.5 47.5 128 96"));
  const CameraIntrinsics h = k.half_resolution();
  CHECK(h.width() == 64);
  CHECK(h.fx() == doctest::Approx(100));
  CHECK(h.cx() == doctest::Approx(31.5));
}

TEST_CASE("intensity frame and depth map validation") {
  ImageGrid g(4, 3, 0.5);
  CHECK_NOTHROW(IntensityFrame(g, 0.1));
  g(1, 1) = 1.5;
  CHECK_THROWS_AS(IntensityFrame(g, 0.1), ValidationError);
  g(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(IntensityFrame(g, 0.1), ValidationError);
  CHECK(clamped_frame(g, 0.0).pixels()(1, 1) == 0.0);

  ImageGrid q(3, 3, 0.5);
  CHECK_NOTHROW(DepthMap{q});
  q(0, 0) = 0.0;
  CHECK_THROWS_AS(DepthMap{q}, ValidationError);
  Mask m(3, 3, 1);
  m(0, 0) = 0;
  const DepthMap d(q, m);
  CHECK(d.valid_count() == 8);
  CHECK(d.mean_valid_inv_depth() == doctest::Approx(0.5));
  CHECK(d.scaled(2.0).mean_valid_inv_depth() == doctest::Approx(1.0));
}

TEST_CASE("downsample_image averages 2x2 cells") {
  ImageGrid g(5, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) g(x, y) = x + 10 * y;
  const ImageGrid d = downsample_image(g);
  CHECK(d.width() == 2);
  CHECK(d.height() == 2);
  CHECK(d(0, 0) == doctest::Approx((0 + 1 + 10 + 11) / 4.0));
  CHECK(d(1, 1) == doctest::Approx((22 + 23 + 32 + 33) / 4.0));
}
