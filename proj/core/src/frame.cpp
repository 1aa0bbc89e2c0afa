#include "evrecon/frame.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "evrecon/error.hpp"

namespace evrecon {

IntensityFrame::IntensityFrame(ImageGrid pixels, double timestamp)
    : pixels_(std::move(pixels)), timestamp_(timestamp) {
  for (double v : pixels_.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError("intensity frame", "pixels must be finite and within [0, 1]");
    }
  }
}

ImageGrid downsample_image(const ImageGrid& in) {
  const int w = std::max(1, in.width() / 2), h = std::max(1, in.height() / 2);
  ImageGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::min(2 * x, in.width() - 1), x1 = std::min(2 * x + 1, in.width() - 1);
      const int y0 = std::min(2 * y, in.height() - 1), y1 = std::min(2 * y + 1, in.height() - 1);
      out(x, y) = 0.25 * (in(x0, y0) + in(x1, y0) + in(x0, y1) + in(x1, y1));
    }
  }
  return out;
}

IntensityFrame clamped_frame(ImageGrid pixels, double timestamp) {
  for (double& v : pixels.values()) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return IntensityFrame(std::move(pixels), timestamp);
}

DepthMap::DepthMap(ImageGrid inv_depth)
    : DepthMap(inv_depth, Mask(inv_depth.width(), inv_depth.height(), 1)) {}

DepthMap::DepthMap(ImageGrid inv_depth, Mask valid) : inv_depth_(std::move(inv_depth)), valid_(std::move(valid)) {
  if (!inv_depth_.same_shape(valid_)) throw ValidationError("depth map", "mask shape mismatch");
  for (std::size_t i = 0; i < inv_depth_.size(); ++i) {
    if (valid_[i]) {
      if (!(std::isfinite(inv_depth_[i]) && inv_depth_[i] > 0.0)) {
        throw ValidationError("depth map", "valid inverse depths must be positive and finite");
      }
    } else {
      inv_depth_[i] = 0.0;
    }
  }
}

std::size_t DepthMap::valid_count() const noexcept {
  std::size_t n = 0;
  for (auto v : valid_.values()) n += v ? 1 : 0;
  return n;
}

double DepthMap::mean_valid_inv_depth() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < inv_depth_.size(); ++i) {
    if (valid_[i]) {
      sum += inv_depth_[i];
      ++n;
    }
  }
  if (n == 0) throw Error("depth map has no valid pixels");
  return sum / static_cast<double>(n);
}

DepthMap DepthMap::scaled(double factor) const {
  ImageGrid scaled = inv_depth_;
  for (double& v : scaled.values()) v *= factor;
  return DepthMap(std::move(scaled), valid_);
}

}  // namespace evrecon
