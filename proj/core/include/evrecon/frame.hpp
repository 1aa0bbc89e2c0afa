#pragma once

#include "evrecon/camera.hpp"
#include "evrecon/grid.hpp"

namespace evrecon {

/// Grayscale image with intensities in [0, 1] and a capture time in seconds.
class IntensityFrame {
 public:
  IntensityFrame() = default;
  // Throws ValidationError on non-finite or out-of-range pixels.
  IntensityFrame(ImageGrid pixels, double timestamp);

  const ImageGrid& pixels() const noexcept { return pixels_; }
  double timestamp() const noexcept { return timestamp_; }
  int width() const noexcept { return pixels_.width(); }
  int height() const noexcept { return pixels_.height(); }

  bool matches(const CameraIntrinsics& camera) const noexcept {
    return width() == camera.width() && height() == camera.height();
  }

 private:
  ImageGrid pixels_;
  double timestamp_ = 0.0;
};

// 2x2 box average; odd trailing rows/columns are dropped.
ImageGrid downsample_image(const ImageGrid& image);

// Clamps every pixel into [0, 1] and maps non-finite values to 0.
IntensityFrame clamped_frame(ImageGrid pixels, double timestamp);

/// Per-pixel inverse depth with a validity mask. Invalid entries store 0 and
/// never take part in a loss or warp.
class DepthMap {
 public:
  DepthMap() = default;
  // All pixels valid. Throws ValidationError unless every entry is positive and finite.
  explicit DepthMap(ImageGrid inv_depth);
  DepthMap(ImageGrid inv_depth, Mask valid);

  const ImageGrid& inv_depth() const noexcept { return inv_depth_; }
  const Mask& valid() const noexcept { return valid_; }
  bool is_valid(int x, int y) const noexcept { return valid_(x, y) != 0; }
  int width() const noexcept { return inv_depth_.width(); }
  int height() const noexcept { return inv_depth_.height(); }
  std::size_t valid_count() const noexcept;

  double mean_valid_inv_depth() const;
  DepthMap scaled(double factor) const;

 private:
  ImageGrid inv_depth_;
  Mask valid_;
};

}  // namespace evrecon
