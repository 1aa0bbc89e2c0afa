#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evrecon/camera.hpp"
#include "evrecon/frame.hpp"
#include "evrecon/pose.hpp"
#include "evrecon/warp.hpp"

namespace evrecon {

// Blend weight of frame k for block j of n (1-based): linear in block index.
double default_alpha(int j, int n);

// Forward-splats both bracketing frames into the block view and blends them.
// Throws Error when neither frame lands anywhere in the view.
IntensityFrame render_intermediate(const IntensityFrame& i_k, const IntensityFrame& i_k1, const DepthMap& d_k,
                                   const DepthMap& d_k1, const Pose& xi_k_j, const Pose& xi_k1_j, double alpha,
                                   const CameraIntrinsics& camera, double timestamp,
                                   double gamma = kDefaultSplatGamma);

/// Poses and timestamps of every block inside one frame-pair window.
struct WindowPlan {
  DepthMap d_k;
  DepthMap d_k1;
  std::vector<double> block_times;             // t_mid of each block, ascending
  std::vector<std::pair<Pose, Pose>> poses;    // (xi_k_j, xi_k1_j) per block
};

enum class FrameOrigin { input, intermediate, substituted };

struct RenderedFrame {
  IntensityFrame frame;
  FrameOrigin origin = FrameOrigin::input;
  int window = -1;  // -1 for input frames
  int block = -1;   // 1-based block index inside the window
  std::string error;
};

struct RenderSettings {
  double gamma = kDefaultSplatGamma;
};

// Input frames plus one rendered frame per block, in time order. A block that
// fails to render is replaced by the temporally nearer input frame.
std::vector<RenderedFrame> render_sequence(const std::vector<IntensityFrame>& frames,
                                           const std::vector<WindowPlan>& windows, const CameraIntrinsics& camera,
                                           const RenderSettings& settings = {});

}  // namespace evrecon
