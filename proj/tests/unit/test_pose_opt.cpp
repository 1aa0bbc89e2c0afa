#include <doctest.h>

#include <cmath>

#include "evrecon/error.hpp"
#include "evrecon/pipeline.hpp"
#include "evrecon/pose_opt.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace evrecon;

namespace {

// First window of a 64x64 simulator run with its pseudo-intensity frames and
// ground-truth depths and poses.
struct SimWindow {
  SimulatedSequence seq;
  WindowBlocks blocks;
  WindowPseudoFrames pseudo;
  Pose xi;  // frame k -> frame k+1

  IntermediatePoseProblem problem(std::size_t j) const {
    return {&pseudo.e_k0.pixels, &pseudo.e_k1_0.pixels, &pseudo.blocks.at(j).pixels, &seq.depths[0], &seq.depths[1],
            &seq.frames[0].pixels(), &seq.frames[1].pixels()};
  }
  Pose truth_k(std::size_t j) const { return seq.trajectory.relative(blocks.t_k, blocks.blocks.at(j).t_mid()); }
  Pose truth_k1(std::size_t j) const { return seq.trajectory.relative(blocks.t_k1, blocks.blocks.at(j).t_mid()); }
};

const SimWindow& sim_window() {
  static const SimWindow w = [] {
    SimWindow s{simulate(scenes::config(64, 2.0, 2)), {}, {}, {}};
    const PipelineConfig config;
    s.blocks = plan_windows(s.seq.frames, s.seq.events, config.block_size).at(0);
    s.pseudo = window_pseudo_frames(s.seq.events, s.blocks, config.pseudo, config.pseudo_warmup_blocks);
    s.xi = s.seq.trajectory.relative(s.blocks.t_k, s.blocks.t_k1);
    return s;
  }();
  return w;
}

double deg(double rad) { return rad * oracle::kDeg; }

}  // namespace

TEST_CASE("pose loss of identical frames under the identity pose") {
  const CameraIntrinsics k(16, 16, 7.5, 7.5, 16, 16);
  for (std::uint64_t s = 1; s <= 4; ++s) {
    const ImageGrid e = oracle::smooth_noise(16, 16, s);
    const DepthMap d(oracle::smooth_noise(16, 16, s + 10, 1, 0.3, 2.0));
    CHECK(pose_photometric_loss(e, e, d, Pose(), k).value <= 2 * kCharbonnierDelta);
  }
}

TEST_CASE("pose loss is lower at the true pose than at identity") {
  const SimWindow& w = sim_window();
  const CameraIntrinsics& cam = w.seq.camera;
  REQUIRE(w.blocks.blocks.size() >= 4);
  for (std::size_t j : {w.blocks.blocks.size() / 2, w.blocks.blocks.size() - 1}) {
    const double at_truth = pose_photometric_loss(w.pseudo.e_k0.pixels, w.pseudo.blocks[j].pixels, w.seq.depths[0],
                                                  w.truth_k(j), cam)
                                .value;
    const double at_identity =
        pose_photometric_loss(w.pseudo.e_k0.pixels, w.pseudo.blocks[j].pixels, w.seq.depths[0], Pose(), cam).value;
    CHECK(at_truth < 0.9 * at_identity);
  }
}

TEST_CASE("pose loss gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(gradcheck::pose_photometric(seed) < 1e-3);
    CHECK(gradcheck::consistency(seed) < 1e-3);
  }
}

TEST_CASE("chained relative pose") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Pose a = Pose::from_twist(oracle::random_twist(rng, 0.3, 1.0));
    const Pose b = Pose::from_twist(oracle::random_twist(rng, 0.3, 1.0));
    // a maps k into j, b maps k+1 into j, so the chain maps k into k+1.
    const Eigen::Matrix4d expected = oracle::to_matrix(b).inverse() * oracle::to_matrix(a);
    CHECK((oracle::to_matrix(chained_relative_pose(a, b)) - expected).norm() < 1e-9);
    CHECK((oracle::to_matrix(chained_relative_pose(a, a)) - Eigen::Matrix4d::Identity()).norm() < 1e-12);
  }
  const SimWindow& w = sim_window();
  const std::size_t j = w.blocks.blocks.size() / 2;
  CHECK(rotation_distance(chained_relative_pose(w.truth_k(j), w.truth_k1(j)), w.xi) < 1e-9);
  CHECK((chained_relative_pose(w.truth_k(j), w.truth_k1(j)).translation() - w.xi.translation()).norm() < 1e-9);
}

TEST_CASE("self-alignment converges to identity") {
  const SimWindow& w = sim_window();
  IntermediatePoseProblem p = w.problem(0);
  p.e_kj = &w.pseudo.e_k0.pixels;
  Vector6d nudge;
  nudge << 0.004, -0.003, 0.002, 0.01, -0.008, 0.006;
  const IntermediatePoseEstimate e =
      estimate_intermediate_pose(p, {Pose::from_twist(nudge), se3_invert(w.xi)}, w.seq.camera);
  CHECK(deg(rotation_distance(e.xi_k_j, Pose())) < 0.1);
  // Scene depth is about 2 to 4 world units.
  CHECK(e.xi_k_j.translation().norm() < 0.01 * 2.0);
  CHECK(e.final_total <= e.initial_total);
}

TEST_CASE("intermediate poses of a simulated window") {
  const SimWindow& w = sim_window();
  std::pair<Pose, Pose> init{Pose(), se3_invert(w.xi)};
  int warm_not_worse = 0, compared = 0, observable = 0;
  double dir_sum = 0.0;
  for (std::size_t j = 0; j < w.blocks.blocks.size(); ++j) {
    const IntermediatePoseProblem p = w.problem(j);
    if (j > 0) {
      const double warm = intermediate_pose_losses(p, init.first, init.second, w.seq.camera).total(0.01);
      const double cold = intermediate_pose_losses(p, Pose(), Pose(), w.seq.camera).total(0.01);
      warm_not_worse += warm <= cold;
      ++compared;
    }
    const IntermediatePoseEstimate e = estimate_intermediate_pose(p, init, w.seq.camera);
    CAPTURE(j);
    CHECK(e.final_total <= e.initial_total);
    CHECK(deg(rotation_distance(e.xi_k_j, w.truth_k(j))) < 0.5);
    CHECK(deg(rotation_distance(chained_relative_pose(e.xi_k_j, e.xi_k1_j), w.xi)) < 1.0);
    const Pose tk = w.truth_k(j);
    // Direction only means something once the block has moved a few pixels.
    const double dir = deg(direction_angle(e.xi_k_j.translation(), tk.translation()));
    if (j == w.blocks.blocks.size() / 2) CHECK(dir < 5.0);
    // Direction is only observable once the near plane has moved half a pixel.
    if (tk.translation().norm() * w.seq.camera.fx() / 2.0 >= 0.5) dir_sum += dir, ++observable;
    init = {e.xi_k_j, e.xi_k1_j};
  }
  REQUIRE(observable > 0);
  CHECK(dir_sum / observable < 5.0);
  REQUIRE(compared > 0);
  CHECK(warm_not_worse >= 0.9 * compared);
}

TEST_CASE("pose stage settings") {
  PoseStageSettings s;
  CHECK(s.lambda_r == 0.01);
  CHECK(s.pyramid_levels == 3);
  CHECK_NOTHROW(s.validate());
  s.lambda_r = -1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("downsample_depth") {
  ImageGrid q(4, 2, 1.0);
  Mask m(4, 2, 1);
  q(2, 0) = 3.0;
  m(3, 0) = m(2, 1) = m(3, 1) = 0;
  const DepthMap d = downsample_depth(DepthMap(q, m));
  REQUIRE(d.width() == 2);
  REQUIRE(d.height() == 1);
  CHECK(d.inv_depth()(0, 0) == doctest::Approx(1.0));
  CHECK(d.inv_depth()(1, 0) == doctest::Approx(3.0));
  CHECK(d.is_valid(1, 0));
}
