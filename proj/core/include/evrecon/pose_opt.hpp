#pragma once

#include <cstddef>
#include <utility>

#include "evrecon/adam.hpp"
#include "evrecon/camera.hpp"
#include "evrecon/frame.hpp"
#include "evrecon/pose.hpp"

namespace evrecon {

struct PoseLoss {
  double value = 0.0;
  Vector6d grad = Vector6d::Zero();
  std::size_t valid = 0;
};

// mean rho(E_ref - warp(E_j -> ref)) over valid interior pixels; `xi` maps
// reference-camera points into the camera of E_j. Throws DivergenceError below
// 1% overlap.
PoseLoss pose_photometric_loss(const ImageGrid& e_ref, const ImageGrid& e_j, const DepthMap& d_ref, const Pose& xi,
                               const CameraIntrinsics& camera);

// Relative pose frame k -> frame k+1 implied by the two intermediate poses.
Pose chained_relative_pose(const Pose& xi_k_j, const Pose& xi_k1_j);

struct ConsistencyLoss {
  double value = 0.0;
  Vector6d grad_k_j = Vector6d::Zero();
  Vector6d grad_k1_j = Vector6d::Zero();
  std::size_t valid = 0;
};

// Warps I_k1 to frame k through chained_relative_pose using d_k and compares
// with I_k.
ConsistencyLoss pose_consistency_loss(const ImageGrid& i_k, const ImageGrid& i_k1, const DepthMap& d_k,
                                      const Pose& xi_k_j, const Pose& xi_k1_j, const CameraIntrinsics& camera);

/// Everything the intermediate pose of one event block is matched against.
struct IntermediatePoseProblem {
  const ImageGrid* e_k0 = nullptr;   // pseudo-intensity at frame k
  const ImageGrid* e_k1_0 = nullptr; // pseudo-intensity at frame k+1
  const ImageGrid* e_kj = nullptr;   // pseudo-intensity of block j
  const DepthMap* d_k = nullptr;
  const DepthMap* d_k1 = nullptr;
  const ImageGrid* i_k = nullptr;
  const ImageGrid* i_k1 = nullptr;
};

struct PoseStageSettings {
  OptimizerSettings optimizer{};
  double lambda_r = 0.01;
  int pyramid_levels = 3;

  PoseStageSettings();
  void validate() const;
};

struct PoseLossTerms {
  double to_k = 0.0;
  double to_k1 = 0.0;
  double consistency = 0.0;
  double total(double lambda_r) const { return to_k + to_k1 + lambda_r * consistency; }
};

struct IntermediatePoseEstimate {
  Pose xi_k_j;   // frame k camera -> block j camera
  Pose xi_k1_j;  // frame k+1 camera -> block j camera
  PoseLossTerms initial;
  PoseLossTerms final;
  double initial_total = 0.0;
  double final_total = 0.0;
  bool converged = true;
  int iterations_run = 0;
};

PoseLossTerms intermediate_pose_losses(const IntermediatePoseProblem& problem, const Pose& xi_k_j,
                                       const Pose& xi_k1_j, const CameraIntrinsics& camera);

// Coarse-to-fine Adam descent on both poses from `init`. Never returns a total
// loss above the loss at `init`.
IntermediatePoseEstimate estimate_intermediate_pose(const IntermediatePoseProblem& problem,
                                                    const std::pair<Pose, Pose>& init,
                                                    const CameraIntrinsics& camera,
                                                    const PoseStageSettings& settings = {});

// 2x2 average of the valid inverse depths; valid when any input is.
DepthMap downsample_depth(const DepthMap& depth);

}  // namespace evrecon
