#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

namespace evrecon {

/// Pinhole intrinsics of the hybrid sensor. Pixel (0,0) is the center of the
/// top-left pixel.
class CameraIntrinsics {
 public:
  CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height);

  double fx() const noexcept { return fx_; }
  double fy() const noexcept { return fy_; }
  double cx() const noexcept { return cx_; }
  double cy() const noexcept { return cy_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  // Intrinsics of the 2x2-averaged image one pyramid level up.
  CameraIntrinsics half_resolution() const;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;

 private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
};

struct Projection {
  Eigen::Vector2d pixel{0.0, 0.0};
  bool in_bounds = false;
};

Projection project(const Eigen::Vector3d& point, const CameraIntrinsics& camera);

// Throws InvalidArgument for inv_depth <= 0.
Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double inv_depth, const CameraIntrinsics& camera);

// Calibration text: one line `fx fy cx cy width height`.
CameraIntrinsics parse_calibration(const std::string& text);
std::string format_calibration(const CameraIntrinsics& camera);
CameraIntrinsics read_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const CameraIntrinsics& camera);

}  // namespace evrecon
