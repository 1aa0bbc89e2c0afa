#pragma once

#include <cstddef>

#include "evrecon/adam.hpp"
#include "evrecon/camera.hpp"
#include "evrecon/error.hpp"
#include "evrecon/frame.hpp"
#include "evrecon/pose.hpp"

namespace evrecon {

// Charbonnier smoothing of |x|: sqrt(x^2 + delta^2) - delta. Zero at zero.
inline constexpr double kCharbonnierDelta = 1e-3;
double charbonnier(double x);
double charbonnier_derivative(double x);

// True for pixels on the one-pixel image frame, which no loss uses.
bool is_border(int x, int y, int width, int height);

/// Two-view photometric reconstruction loss and its gradients.
///
/// `xi` maps points from the camera of frame k into the camera of frame k+1.
/// The loss is mean_k rho(warp(I_k1 -> k) - I_k) + mean_k1 rho(warp(I_k -> k1) - I_k1)
/// where each mean runs over the pixels that warped validly.
struct PhotometricLoss {
  double value = 0.0;
  ImageGrid grad_d_k;
  ImageGrid grad_d_k1;
  Vector6d grad_xi = Vector6d::Zero();
  std::size_t valid_k = 0;
  std::size_t valid_k1 = 0;
};

// Throws DivergenceError when fewer than 1% of pixels overlap in either direction.
PhotometricLoss photometric_loss(const ImageGrid& i_k, const ImageGrid& i_k1, const DepthMap& d_k,
                                 const DepthMap& d_k1, const Pose& xi, const CameraIntrinsics& camera);

struct SmoothnessLoss {
  double value = 0.0;
  ImageGrid grad;
};

// Edge-aware first-order smoothness of inverse depth, averaged over the pixels
// that own at least one forward difference with both ends valid.
SmoothnessLoss smoothness_loss(const DepthMap& depth, const ImageGrid& image, double beta);

struct DepthStageSettings {
  // step_size applies to the inverse-depth entries.
  OptimizerSettings optimizer{};
  double twist_step_size = 1e-4;
  double lambda_sm = 1.0;
  double beta = 10.0;
  // Mean inverse depth of d_k is reset to 1 this often; translation absorbs the scale.
  int renormalize_every = 50;

  DepthStageSettings();
  void validate() const;
};

struct DepthPoseEstimate {
  DepthMap d_k;
  DepthMap d_k1;
  Pose xi;  // frame k camera -> frame k+1 camera
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations_run = 0;
};

class DepthDivergenceError : public DivergenceError {
 public:
  DepthDivergenceError(const std::string& what, DepthPoseEstimate best)
      : DivergenceError(what), best_(std::move(best)) {}
  const DepthPoseEstimate& best() const noexcept { return best_; }

 private:
  DepthPoseEstimate best_;
};

struct DepthObjective {
  double value = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
};

// L_ph + lambda_sm * (L_sm(d_k) + L_sm(d_k1)), value only.
DepthObjective depth_objective(const IntensityFrame& i_k, const IntensityFrame& i_k1, const DepthMap& d_k,
                               const DepthMap& d_k1, const Pose& xi, const CameraIntrinsics& camera,
                               const DepthStageSettings& settings);

// Joint Adam descent over both inverse-depth maps and the relative pose,
// starting from the given depths and pose. Returns the best iterate seen.
DepthPoseEstimate estimate_depth_and_pose(const IntensityFrame& i_k, const IntensityFrame& i_k1,
                                          const DepthMap& init_d_k, const DepthMap& init_d_k1,
                                          const CameraIntrinsics& camera, const DepthStageSettings& settings = {},
                                          const Pose& init_xi = Pose());

}  // namespace evrecon
