#include <doctest.h>

#include <cmath>
#include <random>

#include "evrecon/error.hpp"
#include "evrecon/warp.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace evrecon;

namespace {

Pose translation(double x, double y, double z) {
  Vector6d t = Vector6d::Zero();
  t[3] = x;
  t[4] = y;
  t[5] = z;
  return Pose::from_twist(t);
}

// Reference bilinear interpolation written out independently.
double lerp2(const ImageGrid& img, double u, double v) {
  const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
  const double a = u - x0, b = v - y0;
  auto at = [&](int x, int y) { return img(std::min(x, img.width() - 1), std::min(y, img.height() - 1)); };
  return (1 - a) * (1 - b) * at(x0, y0) + a * (1 - b) * at(x0 + 1, y0) + (1 - a) * b * at(x0, y0 + 1) +
         a * b * at(x0 + 1, y0 + 1);
}

}  // namespace

TEST_CASE("bilinear sample reproduces nodes") {
  const ImageGrid img = oracle::smooth_noise(8, 8, 1);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      const Sample s = bilinear_sample(img, x, y);
      REQUIRE(s.valid);
      CHECK(s.value == img(x, y));
      CHECK(s.du == doctest::Approx(img(x + 1, y) - img(x, y)));
      CHECK(s.dv == doctest::Approx(img(x, y + 1) - img(x, y)));
    }
}

TEST_CASE("bilinear sample at the centre of a 2x2 patch") {
  ImageGrid img(2, 2);
  img(0, 0) = 0.0;
  img(1, 0) = 1.0;
  img(0, 1) = 1.0;
  img(1, 1) = 0.0;
  CHECK(bilinear_sample(img, 0.5, 0.5).value == doctest::Approx(0.5));
}

TEST_CASE("bilinear sample bounds") {
  const ImageGrid img(4, 4, 0.3);
  CHECK_FALSE(bilinear_sample(img, -0.5, 1.0).valid);
  CHECK_FALSE(bilinear_sample(img, 1.0, 3.01).valid);
  CHECK(bilinear_sample(img, 3.0, 3.0).valid);
  CHECK(bilinear_sample(img, 3.0, 3.0).value == doctest::Approx(0.3));
}

TEST_CASE("bilinear sample matches the reference at random points") {
  const ImageGrid img = oracle::smooth_noise(12, 9, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 11), v(0, 8);
  for (int i = 0; i < 500; ++i) {
    const double a = u(rng), b = v(rng);
    CHECK(bilinear_sample(img, a, b).value == doctest::Approx(lerp2(img, a, b)).epsilon(1e-12));
  }
}

TEST_CASE("identity inverse warp reproduces the source") {
  const CameraIntrinsics k(20, 20, 9.5, 9.5, 20, 20);
  const ImageGrid img = oracle::smooth_noise(20, 20, 4);
  const DepthMap d(oracle::smooth_noise(20, 20, 5, 2, 0.2, 2.0));
  const WarpResult w = inverse_warp(img, d, Pose(), k);
  for (int y = 1; y < 19; ++y)
    for (int x = 1; x < 19; ++x) {
      REQUIRE(w.valid(x, y));
      CHECK(std::abs(w.image(x, y) - img(x, y)) < 1e-9);
    }
}

TEST_CASE("inverse warp of a fronto-parallel plane under x translation") {
  const CameraIntrinsics k(16, 16, 15.5, 11.5, 32, 24);
  const ImageGrid img = oracle::smooth_noise(32, 24, 6);
  const double q = 0.5;
  for (double tx : {0.25, 0.1, -0.3}) {
    const WarpResult w = inverse_warp(img, DepthMap(ImageGrid(32, 24, q)), translation(tx, 0, 0), k);
    const double shift = 16 * tx * q;
    std::size_t expected_valid = 0;
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 32; ++x) {
        const double u = x + shift;
        if (u < 0 || u > 31) {
          CHECK_FALSE(w.valid(x, y));
          continue;
        }
        ++expected_valid;
        REQUIRE(w.valid(x, y));
        CHECK(w.image(x, y) == doctest::Approx(lerp2(img, u, y)).epsilon(1e-9));
      }
    CHECK(w.valid_count == expected_valid);
  }
}

TEST_CASE("inverse warp validity count matches per-pixel projection") {
  const CameraIntrinsics k(24, 24, 15.5, 15.5, 32, 32);
  const ImageGrid img = oracle::smooth_noise(32, 32, 7);
  const ImageGrid q(32, 32, 1.0);
  Vector6d t;
  t << 0.02, -0.01, 0.03, 0.05, 0.02, -0.8;
  const Pose pose = Pose::from_twist(t);
  const WarpResult w = inverse_warp(img, DepthMap(q), pose, k);
  std::size_t count = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const Eigen::Vector3d p(x - 15.5, y - 15.5, 24.0);
      const Eigen::Vector3d s = oracle::to_matrix(pose).block<3, 3>(0, 0) * (p / 24.0) + pose.translation();
      const Eigen::Vector2d px = oracle::pinhole(s, 24, 24, 15.5, 15.5);
      const bool in = s.z() > 0 && px.x() >= 0 && px.y() >= 0 && px.x() <= 31 && px.y() <= 31;
      count += in;
      CHECK(static_cast<bool>(w.valid(x, y)) == in);
    }
  CHECK(w.valid_count == count);
  CHECK(count < 32 * 32 / 2);
}

TEST_CASE("inverse warp jacobian matches finite differences") {
  const CameraIntrinsics k(16, 16, 7.5, 7.5, 16, 16);
  const ImageGrid img = oracle::smooth_noise(16, 16, 8);
  const ImageGrid q = oracle::smooth_noise(16, 16, 9, 2, 0.5, 1.0);
  std::mt19937_64 rng(10);
  const Vector6d tw = oracle::random_twist(rng, 0.02, 0.05);
  const WarpJacobian j = inverse_warp_jacobian(img, DepthMap(q), Pose::from_twist(tw), k);
  std::vector<double> an, fd;
  for (int y = 4; y < 12; y += 3)
    for (int x = 4; x < 12; x += 3) {
      REQUIRE(j.warp.valid(x, y));
      for (int i = 0; i < 6; ++i) {
        an.push_back(j.d_params[static_cast<std::size_t>(i)](x, y));
        fd.push_back(gradcheck::settled_difference(
            [&](double h) {
              Vector6d p = tw;
              p[i] += h;
              return inverse_warp(img, DepthMap(q), Pose::from_twist(p), k).image(x, y);
            },
            1e-5));
      }
      an.push_back(j.d_inv_depth(x, y));
      fd.push_back(gradcheck::settled_difference(
          [&](double h) {
            ImageGrid qq = q;
            qq(x, y) += h;
            return inverse_warp(img, DepthMap(qq), Pose::from_twist(tw), k).image(x, y);
          },
          1e-4));
    }
  CHECK(oracle::relative_error(an, fd) < 1e-5);
}

TEST_CASE("warp shape mismatch is rejected") {
  const CameraIntrinsics k(16, 16, 7.5, 7.5, 16, 16);
  CHECK_THROWS_AS(inverse_warp(ImageGrid(8, 8), DepthMap(ImageGrid(16, 16, 1.0)), Pose(), k), InvalidArgument);
}

TEST_CASE("identity splat reproduces the source") {
  const CameraIntrinsics k(20, 20, 9.5, 9.5, 20, 20);
  const ImageGrid img = oracle::smooth_noise(20, 20, 11);
  const DepthMap d(oracle::smooth_noise(20, 20, 12, 2, 0.2, 2.0));
  const SplatBuffer s = forward_splat(img, d, Pose(), k);
  const ImageGrid n = s.normalized();
  CHECK(s.splatted >= 18 * 18);
  for (int y = 1; y < 19; ++y)
    for (int x = 1; x < 19; ++x) {
      CHECK(std::abs(n(x, y) - img(x, y)) < 1e-6);
      CHECK(s.weight(x, y) >= 1.0 - 1e-9);
    }
}

TEST_CASE("identity splat stays exact under strong depth contrast") {
  const CameraIntrinsics k(128, 128, 63.5, 63.5, 128, 128);
  const ImageGrid img = oracle::smooth_noise(128, 128, 13);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  ImageGrid q(128, 128);
  for (double& v : q.values()) v = u(rng);
  const ImageGrid n = forward_splat(img, DepthMap(q), Pose(), k, 10.0).normalized();
  double worst = 0.0;
  for (int y = 1; y < 127; ++y)
    for (int x = 1; x < 127; ++x) worst = std::max(worst, std::abs(n(x, y) - img(x, y)));
  CHECK(worst < 1e-6);
}

TEST_CASE("splat with everything out of view is empty") {
  const CameraIntrinsics k(20, 20, 9.5, 9.5, 20, 20);
  const SplatBuffer s = forward_splat(ImageGrid(20, 20, 0.5), DepthMap(ImageGrid(20, 20, 1.0)), translation(50, 0, 0), k);
  CHECK(s.empty());
  for (double w : s.weight.values()) CHECK(w == 0.0);
}

TEST_CASE("splat collision favours the nearer surface by exp(gamma * q)") {
  const CameraIntrinsics k(10, 10, 0, 0, 16, 1);
  ImageGrid img(16, 1, 0.5), q(16, 1, 0.0);
  Mask valid(16, 1, 0);
  img(1, 0) = 0.2;
  q(1, 0) = 1.0;
  valid(1, 0) = 1;
  img(10, 0) = 0.9;
  q(10, 0) = 0.1;
  valid(10, 0) = 1;
  // x-translation 1 moves pixel 1 by 10 px and pixel 10 by 1 px: both land on 11.
  const SplatBuffer s = forward_splat(img, DepthMap(q, valid), translation(1.0, 0, 0), k, 10.0);
  const double wn = std::exp(10.0 * 1.0), wf = std::exp(10.0 * 0.1);
  CHECK(s.weight(11, 0) == doctest::Approx(wn + wf).epsilon(1e-12));
  CHECK(s.normalized()(11, 0) == doctest::Approx((0.2 * wn + 0.9 * wf) / (wn + wf)).epsilon(1e-12));
  CHECK(s.normalized()(11, 0) < 0.201);
}

TEST_CASE("blend") {
  const int w = 4, h = 3;
  SplatBuffer a{ImageGrid(w, h, 0.0), ImageGrid(w, h, 0.0), 1};
  SplatBuffer empty{ImageGrid(w, h, 0.0), ImageGrid(w, h, 0.0), 0};
  for (std::size_t i = 0; i < a.weight.size(); ++i) {
    a.weight[i] = 1.0 + 0.1 * static_cast<double>(i);
    a.accum[i] = a.weight[i] * 0.05 * static_cast<double>(i);
  }
  SUBCASE("single source") {
    for (double alpha : {0.0, 0.3, 1.0}) CHECK(blend(a, empty, alpha) == a.normalized());
  }
  SUBCASE("identical buffers") {
    const ImageGrid out = blend(a, a, 0.5);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(a.normalized()[i]));
  }
  SUBCASE("convex combination") {
    SplatBuffer x{ImageGrid(1, 1, 0.2), ImageGrid(1, 1, 1.0), 1};
    SplatBuffer y{ImageGrid(1, 1, 0.6), ImageGrid(1, 1, 1.0), 1};
    CHECK(blend(x, y, 0.25)(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("holes are filled from neighbours") {
    SplatBuffer holed = a;
    holed.weight(1, 1) = 0.0;
    holed.accum(1, 1) = 0.0;
    const ImageGrid out = blend(holed, empty, 0.5);
    const ImageGrid n = holed.normalized();
    double sum = 0.0;
    int cnt = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dx || dy) sum += n(1 + dx, 1 + dy), ++cnt;
    CHECK(out(1, 1) == doctest::Approx(sum / cnt));
  }
  SUBCASE("bad alpha") { CHECK_THROWS_AS(blend(a, a, 1.5), InvalidArgument); }
}
