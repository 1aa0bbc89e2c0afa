#include "evrecon/renderer.hpp"

#include <cmath>

#include "evrecon/error.hpp"

namespace evrecon {

double default_alpha(int j, int n) { return 1.0 - static_cast<double>(j) / (n + 1); }

IntensityFrame render_intermediate(const IntensityFrame& i_k, const IntensityFrame& i_k1, const DepthMap& d_k,
                                   const DepthMap& d_k1, const Pose& xi_k_j, const Pose& xi_k1_j, double alpha,
                                   const CameraIntrinsics& camera, double timestamp, double gamma) {
  const SplatBuffer from_k = forward_splat(i_k.pixels(), d_k, xi_k_j, camera, gamma);
  const SplatBuffer from_k1 = forward_splat(i_k1.pixels(), d_k1, xi_k1_j, camera, gamma);
  if (from_k.empty() && from_k1.empty()) throw Error("render_intermediate: both splats are empty (pathological pose)");
  return clamped_frame(blend(from_k, from_k1, alpha), timestamp);
}

std::vector<RenderedFrame> render_sequence(const std::vector<IntensityFrame>& frames,
                                           const std::vector<WindowPlan>& windows, const CameraIntrinsics& camera,
                                           const RenderSettings& settings) {
  if (!frames.empty() && windows.size() + 1 != frames.size()) {
    throw InvalidArgument("render_sequence: need exactly one window per consecutive frame pair");
  }
  std::vector<RenderedFrame> out;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    out.push_back({frames[k], FrameOrigin::input, -1, -1, {}});
    if (k + 1 == frames.size()) break;
    const WindowPlan& plan = windows[k];
    if (plan.poses.size() != plan.block_times.size()) {
      throw InvalidArgument("render_sequence: one pose pair per block is required");
    }
    const int n = static_cast<int>(plan.block_times.size());
    for (int j = 1; j <= n; ++j) {
      const double t = plan.block_times[static_cast<std::size_t>(j - 1)];
      const auto& [xi_k_j, xi_k1_j] = plan.poses[static_cast<std::size_t>(j - 1)];
      RenderedFrame r{IntensityFrame(), FrameOrigin::intermediate, static_cast<int>(k), j, {}};
      try {
        r.frame = render_intermediate(frames[k], frames[k + 1], plan.d_k, plan.d_k1, xi_k_j, xi_k1_j,
                                      default_alpha(j, n), camera, t, settings.gamma);
      } catch (const std::exception& e) {
        const bool first_nearer = t - frames[k].timestamp() <= frames[k + 1].timestamp() - t;
        r.frame = IntensityFrame((first_nearer ? frames[k] : frames[k + 1]).pixels(), t);
        r.origin = FrameOrigin::substituted;
        r.error = e.what();
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace evrecon
