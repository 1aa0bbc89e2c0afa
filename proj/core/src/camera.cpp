#include "evrecon/camera.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "evrecon/error.hpp"

namespace evrecon {

CameraIntrinsics::CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height) {
  if (!(std::isfinite(fx) && fx > 0.0)) throw ValidationError("fx", "must be finite and positive");
  if (!(std::isfinite(fy) && fy > 0.0)) throw ValidationError("fy", "must be finite and positive");
  if (width <= 0 || height <= 0) throw ValidationError("width/height", "must be positive");
  if (!(cx >= 0.0 && cx < width)) throw ValidationError("cx", "must lie in [0, width)");
  if (!(cy >= 0.0 && cy < height)) throw ValidationError("cy", "must lie in [0, height)");
}

CameraIntrinsics CameraIntrinsics::half_resolution() const {
  return CameraIntrinsics(fx_ * 0.5, fy_ * 0.5, (cx_ + 0.5) * 0.5 - 0.5, (cy_ + 0.5) * 0.5 - 0.5,
                          width_ / 2, height_ / 2);
}

Projection project(const Eigen::Vector3d& point, const CameraIntrinsics& camera) {
  Projection out;
  if (!(point.z() > 0.0)) return out;
  out.pixel.x() = camera.fx() * point.x() / point.z() + camera.cx();
  out.pixel.y() = camera.fy() * point.y() / point.z() + camera.cy();
  out.in_bounds = out.pixel.x() >= 0.0 && out.pixel.y() >= 0.0 &&
                  out.pixel.x() <= camera.width() - 1 && out.pixel.y() <= camera.height() - 1;
  return out;
}

Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double inv_depth, const CameraIntrinsics& camera) {
  if (!(inv_depth > 0.0) || !std::isfinite(inv_depth)) {
    throw InvalidArgument("backproject: inverse depth must be positive and finite");
  }
  const double z = 1.0 / inv_depth;
  return {(pixel.x() - camera.cx()) * z / camera.fx(), (pixel.y() - camera.cy()) * z / camera.fy(), z};
}

CameraIntrinsics parse_calibration(const std::string& text) {
  std::istringstream in(text);
  double fx, fy, cx, cy;
  int width, height;
  if (!(in >> fx >> fy >> cx >> cy >> width >> height)) {
    throw ParseError("calibration must be `fx fy cx cy width height`", 1);
  }
  return CameraIntrinsics(fx, fy, cx, cy, width, height);
}

std::string format_calibration(const CameraIntrinsics& camera) {
  std::ostringstream out;
  out << std::setprecision(17) << camera.fx() << ' ' << camera.fy() << ' ' << camera.cx() << ' ' << camera.cy()
      << ' ' << camera.width() << ' ' << camera.height() << '\n';
  return out.str();
}

CameraIntrinsics read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open calibration file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_calibration(buffer.str());
}

void write_calibration(const std::filesystem::path& path, const CameraIntrinsics& camera) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write calibration file " + path.string());
  out << format_calibration(camera);
}

}  // namespace evrecon
