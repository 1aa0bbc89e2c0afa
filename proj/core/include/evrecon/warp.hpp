#pragma once

#include <array>

#include "evrecon/camera.hpp"
#include "evrecon/frame.hpp"
#include "evrecon/grid.hpp"
#include "evrecon/pose.hpp"

namespace evrecon {

// Value stored in WarpResult::image where the warp has no sample.
inline constexpr double kInvalidSample = -1.0;

struct Sample {
  double value = 0.0;
  bool valid = false;
  double du = 0.0;  // d value / d u
  double dv = 0.0;  // d value / d v
};

// Bilinear lookup at sub-pixel (u, v). Invalid when any of the four neighbors
// falls outside the image.
Sample bilinear_sample(const ImageGrid& image, double u, double v);

struct WarpResult {
  ImageGrid image;
  Mask valid;
  std::size_t valid_count = 0;
};

// Gathers `source` into the target view. `pose` maps target-camera points into
// the source camera; depth is given on the target grid.
WarpResult inverse_warp(const ImageGrid& source, const DepthMap& depth_at_target, const Pose& pose,
                        const CameraIntrinsics& camera);

/// inverse_warp together with its derivatives: d image / d inverse depth (per
/// pixel, only the pixel's own depth matters) and d image / d parameter for
/// the parameters described by `dpose`.
struct WarpJacobian {
  WarpResult warp;
  Grid<double> d_inv_depth;
  std::array<ImageGrid, 6> d_params;
};

WarpJacobian inverse_warp_jacobian(const ImageGrid& source, const DepthMap& depth_at_target, const Pose& pose,
                                   const PoseDerivative& dpose, const CameraIntrinsics& camera);
// Parameters are the pose's own twist components.
WarpJacobian inverse_warp_jacobian(const ImageGrid& source, const DepthMap& depth_at_target, const Pose& pose,
                                   const CameraIntrinsics& camera);

struct SplatBuffer {
  ImageGrid accum;   // sum of intensity * weight
  ImageGrid weight;  // sum of weights, >= 0
  std::size_t splatted = 0;

  bool empty() const noexcept { return splatted == 0; }
  // accum / weight, 0 where nothing landed.
  ImageGrid normalized() const;
};

inline constexpr double kDefaultSplatGamma = 10.0;

// Scatters `source` into the target view. Each landing sample spreads over its
// four enclosing pixels with bilinear weights times exp(gamma * inv_depth in
// the target view), so nearer surfaces dominate.
SplatBuffer forward_splat(const ImageGrid& source, const DepthMap& depth_at_source, const Pose& pose,
                          const CameraIntrinsics& camera, double gamma = kDefaultSplatGamma);

// Per-pixel weighted alpha blend of two splat buffers; pixels with no weight
// in either are filled by iterated 3x3 averaging.
ImageGrid blend(const SplatBuffer& a, const SplatBuffer& b, double alpha);

}  // namespace evrecon
