#include <doctest.h>

#include <cmath>

#include "evrecon/error.hpp"
#include "evrecon/sim.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace evrecon;

namespace {

Trajectory linear_motion(const Vector6d& rate) { return Trajectory({Keyframe{0, Vector6d::Zero()}, Keyframe{1, rate}}); }

Vector6d x_rate(double v) {
  Vector6d r = Vector6d::Zero();
  r[3] = v;
  return r;
}

}  // namespace

TEST_CASE("render_view of a single plane") {
  const CameraIntrinsics cam = scenes::square_camera(32);
  const SyntheticScene scene(scenes::single_plane(2.0));
  const View v = render_view(scene, Pose(), cam);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      CHECK(v.depth.is_valid(x, y));
      CHECK(std::abs(v.depth.inv_depth()(x, y) - 0.5) < 1e-9);
      CHECK(v.image.pixels()(x, y) >= 0.0);
      CHECK(v.image.pixels()(x, y) <= 1.0);
    }
}

TEST_CASE("render_view depth of a tilted view matches the plane") {
  const CameraIntrinsics cam = scenes::square_camera(24);
  const SyntheticScene scene(scenes::single_plane(3.0));
  std::mt19937_64 rng(2);
  const Pose p = Pose::from_twist(oracle::random_twist(rng, 0.1, 0.3));
  const View v = render_view(scene, p, cam);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      // Ray from the camera centre through the pixel meets Z = 3 in world coordinates.
      const Eigen::Vector3d dir_cam((x - cam.cx()) / cam.fx(), (y - cam.cy()) / cam.fy(), 1.0);
      const Eigen::Vector3d o = p.translation(), d = p.rotation() * dir_cam;
      const double s = (3.0 - o.z()) / d.z();
      CHECK(std::abs(v.depth.inv_depth()(x, y) - 1.0 / s) < 1e-9);
    }
}

TEST_CASE("x translation shifts the image by fx * t / depth") {
  const CameraIntrinsics cam = scenes::square_camera(64);
  const SyntheticScene scene(scenes::single_plane(2.0));
  for (double tx : {0.05, 0.1, -0.08}) {
    Vector6d tw = Vector6d::Zero();
    tw[3] = tx;
    const View a = render_view(scene, Pose(), cam);
    const View b = render_view(scene, Pose::from_twist(tw), cam);
    // Moving the camera by +tx moves the image content by -fx * tx / 2.
    const double expected = -cam.fx() * tx / 2.0;
    CHECK(oracle::horizontal_shift(a.image.pixels(), b.image.pixels(), 6) == doctest::Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("near plane occludes the far plane up to its silhouette") {
  const CameraIntrinsics cam = scenes::square_camera(64);
  const auto planes = default_two_plane_scene();
  const SyntheticScene scene(planes);
  const View v = render_view(scene, Pose(), cam);
  const double near_depth = planes[1].depth, far_depth = planes[0].depth, edge = planes[1].x_max;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double world_x = (x - cam.cx()) / cam.fx() * near_depth;
      const double expected = world_x <= edge ? 1.0 / near_depth : 1.0 / far_depth;
      CHECK(v.depth.inv_depth()(x, y) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("render_view with nothing in view") {
  const CameraIntrinsics cam = scenes::square_camera(8);
  PlaneSpec p = scenes::single_plane(2.0)[0];
  p.x_min = 100.0;
  p.x_max = 101.0;
  CHECK_THROWS_AS(render_view(SyntheticScene({p}), Pose(), cam), Error);
  CHECK_THROWS_AS(SyntheticScene({}), ValidationError);
  p.depth = -1.0;
  CHECK_THROWS_AS(SyntheticScene({p}), ValidationError);
}

TEST_CASE("trajectory interpolation") {
  Vector6d a, b;
  a << 0.1, 0.0, 0.0, 1.0, 0.0, 0.0;
  b << 0.1, 0.2, 0.0, 1.0, 2.0, 0.0;
  const Trajectory t({Keyframe{0, Vector6d::Zero()}, Keyframe{1, a}, Keyframe{3, b}});
  CHECK(t.at(0).twist().norm() < 1e-15);
  CHECK((t.at(0.5).twist() - 0.5 * a).norm() < 1e-12);
  CHECK((t.at(2).twist() - 0.5 * (a + b)).norm() < 1e-12);
  CHECK((t.at(10).twist() - b).norm() < 1e-12);
  const Eigen::Matrix4d rel = oracle::to_matrix(t.relative(0.5, 2));
  const Eigen::Matrix4d expected = oracle::to_matrix(t.at(2)).inverse() * oracle::to_matrix(t.at(0.5));
  CHECK((rel - expected).norm() < 1e-12);
  CHECK_THROWS(Trajectory({Keyframe{0.5, Vector6d::Zero()}}));
  CHECK_THROWS(Trajectory({Keyframe{0, Vector6d::Zero()}, Keyframe{0, a}}));
  CHECK_THROWS(Trajectory({Keyframe{0, a}}));
}

TEST_CASE("emit_crossings") {
  SUBCASE("ramp of exactly two thresholds") {
    PixelEventState s;
    std::vector<Event> out;
    for (int i = 1; i <= 10; ++i) emit_crossings(s, 0.1 * i, 0.02 * i, 0.1, 3, 4, out);
    REQUIRE(out.size() == 2);
    for (const Event& e : out) {
      CHECK(e.polarity == 1);
      CHECK(e.x == 3);
      CHECK(e.y == 4);
    }
    CHECK(out[0].t == doctest::Approx(0.5));
    CHECK(out[1].t == doctest::Approx(1.0));
  }
  SUBCASE("down and back up") {
    PixelEventState s;
    std::vector<Event> out;
    emit_crossings(s, 1.0, -0.35, 0.1, 0, 0, out);
    emit_crossings(s, 2.0, 0.0, 0.1, 0, 0, out);
    REQUIRE(out.size() == 6);
    for (int i = 0; i < 3; ++i) CHECK(out[i].polarity == -1);
    for (int i = 3; i < 6; ++i) CHECK(out[i].polarity == 1);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i].t >= out[i - 1].t);
  }
}

TEST_CASE("static camera produces no events") {
  const CameraIntrinsics cam = scenes::square_camera(16);
  const SyntheticScene scene(default_two_plane_scene());
  const EventStream s = generate_events(scene, linear_motion(Vector6d::Zero()), cam, 0.1, 1000.0, 0.0, 0.5);
  CHECK(s.empty());
}

TEST_CASE("events of a moving edge match the analytic count") {
  const int w = 48;
  const CameraIntrinsics cam = scenes::square_camera(w);
  PlaneSpec plane;
  plane.depth = 2.0;
  plane.texture.kind = TextureKind::step;
  plane.texture.contrast = 0.2;
  const SyntheticScene scene({plane});
  const double speed = 1.0, t0 = 0.1, t1 = 0.4;
  const EventStream s = generate_events(scene, linear_motion(x_rate(speed)), cam, 0.1, 2000.0, t0, t1);
  const double swept = cam.fx() * speed * (t1 - t0) / plane.depth;
  const double dlog = std::log(0.7 / 0.3);
  const double analytic = w * swept * dlog / 0.1;
  CHECK(std::abs(static_cast<double>(s.size()) - analytic) < 0.1 * analytic);
}

TEST_CASE("summed events track each pixel's log intensity change") {
  const CameraIntrinsics cam = scenes::square_camera(32);
  const SyntheticScene scene(default_two_plane_scene());
  const Trajectory traj(default_keyframes(1.0));
  const double t0 = 0.0, t1 = 0.2, c = 0.1;
  const EventStream s = generate_events(scene, traj, cam, c, 1000.0, t0, t1);
  REQUIRE(s.size() > 100);
  ImageGrid sum(32, 32);
  for (const Event& e : s.events()) sum(e.x, e.y) += e.polarity * c;
  const View a = render_view(scene, traj.at(t0), cam), b = render_view(scene, traj.at(t1), cam);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double change = safe_log(b.image.pixels()(x, y)) - safe_log(a.image.pixels()(x, y));
      CHECK(std::abs(sum(x, y) - change) < c + 1e-9);
    }
}

TEST_CASE("corrupt_events") {
  const EventStream clean = simulate(scenes::config(32, 1.0, 2)).events;
  REQUIRE(clean.size() > 1000);
  CHECK(corrupt_events(clean, 0.0, 3) == clean);

  std::vector<Event> ev(10000);
  for (std::size_t i = 0; i < ev.size(); ++i) ev[i] = Event{1e-4 * static_cast<double>(i), int(i % 7), int(i % 5), 1};
  const EventStream base(7, 5, ev);
  const EventStream noisy = corrupt_events(base, 0.1, 9);
  CHECK(noisy.size() == 11000);
  for (std::size_t i = 1; i < noisy.size(); ++i) CHECK(noisy.events()[i].t >= noisy.events()[i - 1].t);
  CHECK(noisy == corrupt_events(base, 0.1, 9));
  CHECK_FALSE(noisy == corrupt_events(base, 0.1, 10));
  CHECK_THROWS_AS(corrupt_events(base, 1.5, 1), ValidationError);
}

TEST_CASE("simulate is deterministic and consistent") {
  const SimulatorConfig c = scenes::config(24, 1.0, 3);
  const SimulatedSequence a = simulate(c), b = simulate(c);
  REQUIRE(a.frames.size() == 3);
  REQUIRE(a.depths.size() == 3);
  CHECK(a.events == b.events);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].pixels() == b.frames[i].pixels());
    CHECK(a.frames[i].timestamp() == doctest::Approx(c.first_frame_time + c.frame_interval * double(i)));
  }
  CHECK(a.events.events().back().t <= c.end_time());
  SimulatorConfig other = c;
  other.seed = 8;
  CHECK_FALSE(simulate(other).frames[0].pixels() == a.frames[0].pixels());
}

TEST_CASE("simulator config validation") {
  SimulatorConfig c;
  CHECK_NOTHROW(c.validate());
  c.sample_rate = 50.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SimulatorConfig{};
  c.frame_count = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SimulatorConfig{};
  c.noise_rate = -0.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("noise texture renders stay in range") {
  const SyntheticScene scene(default_two_plane_scene());
  const Trajectory traj(default_keyframes(1.0));
  const CameraIntrinsics cam(128, 128, 63.5, 63.5, 128, 128);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double t = 0.2 + 0.001 * i;
    const View v = render_view(scene, traj.at(t), cam, t);
    for (double p : v.image.pixels().values()) lo = std::min(lo, p), hi = std::max(hi, p);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
}
