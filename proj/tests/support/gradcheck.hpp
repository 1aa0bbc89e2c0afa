#pragma once

// Central finite-difference checks of the analytic loss gradients on random
// 16x16 instances. Each check returns the worst relative error over its
// gradient blocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "evrecon/depth_opt.hpp"
#include "evrecon/pose_opt.hpp"
#include "oracles.hpp"

namespace gradcheck {

using namespace evrecon;

inline constexpr int kSize = 16;
inline constexpr double kDepthStep = 1e-4;
inline constexpr double kPoseStep = 1e-5;

// Central difference starting at `step`. The losses are only piecewise smooth
// (bilinear cells, Charbonnier near zero), so the step is divided by 10 until
// two successive estimates agree; the analytic value plays no part in this.
template <class F>
double settled_difference(F f, double step) {
  double prev = (f(step) - f(-step)) / (2.0 * step);
  for (int i = 0; i < 4; ++i) {
    step *= 0.1;
    const double next = (f(step) - f(-step)) / (2.0 * step);
    if (std::abs(next - prev) <= 1e-7 + 1e-5 * std::max(std::abs(next), std::abs(prev))) return prev;
    prev = next;
  }
  return prev;
}

struct Instance {
  CameraIntrinsics camera{16.0, 16.0, 7.5, 7.5, kSize, kSize};
  ImageGrid a, b;
  ImageGrid q_a, q_b;
  Vector6d twist_a, twist_b;
};

inline Instance make_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Instance in;
  in.a = oracle::smooth_noise(kSize, kSize, seed * 3 + 1, 1);
  in.b = oracle::smooth_noise(kSize, kSize, seed * 3 + 2, 1);
  in.q_a = oracle::smooth_noise(kSize, kSize, seed * 3 + 3, 2, 0.4, 1.0);
  in.q_b = oracle::smooth_noise(kSize, kSize, seed * 5 + 7, 2, 0.4, 1.0);
  in.twist_a = oracle::random_twist(rng, 0.02, 0.05);
  in.twist_b = oracle::random_twist(rng, 0.02, 0.05);
  return in;
}

// Indices of the depth entries probed per map (all would be 256 evaluations).
inline std::vector<std::size_t> probe_pixels(std::uint64_t seed, int count = 24) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> all(kSize * kSize);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(count));
  return all;
}

template <class F>
double depth_block_error(const ImageGrid& q, const ImageGrid& analytic, const std::vector<std::size_t>& probes, F loss) {
  std::vector<double> a, n;
  for (std::size_t i : probes) {
    n.push_back(settled_difference(
        [&](double h) {
          ImageGrid p = q;
          p[i] += h;
          return loss(p);
        },
        kDepthStep));
    a.push_back(analytic[i]);
  }
  return oracle::relative_error(a, n);
}

template <class F>
double twist_block_error(const Vector6d& twist, const Vector6d& analytic, F loss) {
  std::vector<double> a, n;
  for (int i = 0; i < 6; ++i) {
    n.push_back(settled_difference(
        [&](double h) {
          Vector6d p = twist;
          p[i] += h;
          return loss(p);
        },
        kPoseStep));
    a.push_back(analytic[i]);
  }
  return oracle::relative_error(a, n);
}

// Two-view photometric loss: d_k, d_k1 and xi.
inline double photometric(std::uint64_t seed) {
  const Instance in = make_instance(seed);
  const auto probes = probe_pixels(seed);
  const Pose xi = Pose::from_twist(in.twist_a);
  const auto g = photometric_loss(in.a, in.b, DepthMap(in.q_a), DepthMap(in.q_b), xi, in.camera);
  const double e_k = depth_block_error(in.q_a, g.grad_d_k, probes, [&](const ImageGrid& q) {
    return photometric_loss(in.a, in.b, DepthMap(q), DepthMap(in.q_b), xi, in.camera).value;
  });
  const double e_k1 = depth_block_error(in.q_b, g.grad_d_k1, probes, [&](const ImageGrid& q) {
    return photometric_loss(in.a, in.b, DepthMap(in.q_a), DepthMap(q), xi, in.camera).value;
  });
  const double e_xi = twist_block_error(in.twist_a, g.grad_xi, [&](const Vector6d& t) {
    return photometric_loss(in.a, in.b, DepthMap(in.q_a), DepthMap(in.q_b), Pose::from_twist(t), in.camera).value;
  });
  return std::max({e_k, e_k1, e_xi});
}

inline double smoothness(std::uint64_t seed) {
  const Instance in = make_instance(seed);
  const double beta = 10.0;
  const auto g = smoothness_loss(DepthMap(in.q_a), in.a, beta);
  std::vector<std::size_t> all(kSize * kSize);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return depth_block_error(in.q_a, g.grad, all,
                           [&](const ImageGrid& q) { return smoothness_loss(DepthMap(q), in.a, beta).value; });
}

inline double pose_photometric(std::uint64_t seed) {
  const Instance in = make_instance(seed);
  const auto g = pose_photometric_loss(in.a, in.b, DepthMap(in.q_a), Pose::from_twist(in.twist_a), in.camera);
  return twist_block_error(in.twist_a, g.grad, [&](const Vector6d& t) {
    return pose_photometric_loss(in.a, in.b, DepthMap(in.q_a), Pose::from_twist(t), in.camera).value;
  });
}

inline double consistency(std::uint64_t seed) {
  const Instance in = make_instance(seed);
  const DepthMap d(in.q_a);
  const Pose pa = Pose::from_twist(in.twist_a), pb = Pose::from_twist(in.twist_b);
  const auto g = pose_consistency_loss(in.a, in.b, d, pa, pb, in.camera);
  const double e_a = twist_block_error(in.twist_a, g.grad_k_j, [&](const Vector6d& t) {
    return pose_consistency_loss(in.a, in.b, d, Pose::from_twist(t), pb, in.camera).value;
  });
  const double e_b = twist_block_error(in.twist_b, g.grad_k1_j, [&](const Vector6d& t) {
    return pose_consistency_loss(in.a, in.b, d, pa, Pose::from_twist(t), in.camera).value;
  });
  return std::max(e_a, e_b);
}

}  // namespace gradcheck
