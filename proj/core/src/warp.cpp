#include "evrecon/warp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "evrecon/error.hpp"

namespace evrecon {
namespace {

// Exponent cap for the occlusion weight, well below double overflow.
constexpr double kMaxSplatExponent = 600.0;

// Derivative of the projected pixel with respect to the camera-frame point.
struct ProjectionJacobian {
  Eigen::Matrix<double, 2, 3> m;
};

ProjectionJacobian projection_jacobian(const Eigen::Vector3d& p, const CameraIntrinsics& camera) {
  const double iz = 1.0 / p.z();
  ProjectionJacobian j;
  j.m << camera.fx() * iz, 0.0, -camera.fx() * p.x() * iz * iz, 0.0, camera.fy() * iz, -camera.fy() * p.y() * iz * iz;
  return j;
}

Eigen::Vector3d ray(int x, int y, const CameraIntrinsics& camera) {
  return {(x - camera.cx()) / camera.fx(), (y - camera.cy()) / camera.fy(), 1.0};
}

void check_shapes(const ImageGrid& image, const DepthMap& depth, const CameraIntrinsics& camera) {
  if (image.width() != camera.width() || image.height() != camera.height() ||
      depth.width() != camera.width() || depth.height() != camera.height()) {
    throw InvalidArgument("warp: image, depth and camera shapes must match");
  }
}

}  // namespace

Sample bilinear_sample(const ImageGrid& image, double u, double v) {
  Sample s;
  const int w = image.width(), h = image.height();
  if (!(u >= 0.0 && v >= 0.0 && u <= w - 1 && v <= h - 1)) return s;
  const int x0 = std::min(static_cast<int>(u), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(v), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = u - x0, fy = v - y0;
  const double i00 = image(x0, y0), i10 = image(x1, y0), i01 = image(x0, y1), i11 = image(x1, y1);
  s.valid = true;
  s.value = (1.0 - fx) * (1.0 - fy) * i00 + fx * (1.0 - fy) * i10 + (1.0 - fx) * fy * i01 + fx * fy * i11;
  s.du = (1.0 - fy) * (i10 - i00) + fy * (i11 - i01);
  s.dv = (1.0 - fx) * (i01 - i00) + fx * (i11 - i10);
  return s;
}

WarpResult inverse_warp(const ImageGrid& source, const DepthMap& depth_at_target, const Pose& pose,
                        const CameraIntrinsics& camera) {
  check_shapes(source, depth_at_target, camera);
  WarpResult out{ImageGrid(camera.width(), camera.height(), kInvalidSample), Mask(camera.width(), camera.height(), 0), 0};
  for (int y = 0; y < camera.height(); ++y) {
    for (int x = 0; x < camera.width(); ++x) {
      if (!depth_at_target.is_valid(x, y)) continue;
      const Eigen::Vector3d p = pose * (ray(x, y, camera) / depth_at_target.inv_depth()(x, y));
      const Projection proj = project(p, camera);
      if (!proj.in_bounds) continue;
      const Sample s = bilinear_sample(source, proj.pixel.x(), proj.pixel.y());
      if (!s.valid) continue;
      out.image(x, y) = s.value;
      out.valid(x, y) = 1;
      ++out.valid_count;
    }
  }
  return out;
}

WarpJacobian inverse_warp_jacobian(const ImageGrid& source, const DepthMap& depth_at_target, const Pose& pose,
                                   const PoseDerivative& dpose, const CameraIntrinsics& camera) {
  check_shapes(source, depth_at_target, camera);
  const int w = camera.width(), h = camera.height();
  WarpJacobian out;
  out.warp = WarpResult{ImageGrid(w, h, kInvalidSample), Mask(w, h, 0), 0};
  out.d_inv_depth = ImageGrid(w, h, 0.0);
  for (auto& g : out.d_params) g = ImageGrid(w, h, 0.0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth_at_target.is_valid(x, y)) continue;
      const double q = depth_at_target.inv_depth()(x, y);
      const Eigen::Vector3d r = ray(x, y, camera);
      const Eigen::Vector3d point = r / q;
      const Eigen::Vector3d p = pose * point;
      const Projection proj = project(p, camera);
      if (!proj.in_bounds) continue;
      const Sample s = bilinear_sample(source, proj.pixel.x(), proj.pixel.y());
      if (!s.valid) continue;
      out.warp.image(x, y) = s.value;
      out.warp.valid(x, y) = 1;
      ++out.warp.valid_count;

      const Eigen::RowVector3d g = Eigen::RowVector2d(s.du, s.dv) * projection_jacobian(p, camera).m;
      out.d_inv_depth(x, y) = -g.dot(pose.rotation() * r) / (q * q);
      for (int i = 0; i < 6; ++i) {
        out.d_params[static_cast<std::size_t>(i)](x, y) =
            g.dot(dpose.rotation[static_cast<std::size_t>(i)] * point + dpose.translation[static_cast<std::size_t>(i)]);
      }
    }
  }
  return out;
}

WarpJacobian inverse_warp_jacobian(const ImageGrid& source, const DepthMap& depth_at_target, const Pose& pose,
                                   const CameraIntrinsics& camera) {
  return inverse_warp_jacobian(source, depth_at_target, pose, twist_derivative(pose.twist()), camera);
}

ImageGrid SplatBuffer::normalized() const {
  ImageGrid out(accum.width(), accum.height(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (weight[i] > 0.0) out[i] = accum[i] / weight[i];
  }
  return out;
}

namespace {

double snap_to_grid(double u) {
  const double r = std::round(u);
  return std::abs(u - r) < 1e-9 ? r : u;
}

}  // namespace

SplatBuffer forward_splat(const ImageGrid& source, const DepthMap& depth_at_source, const Pose& pose,
                          const CameraIntrinsics& camera, double gamma) {
  check_shapes(source, depth_at_source, camera);
  const int w = camera.width(), h = camera.height();
  SplatBuffer out{ImageGrid(w, h, 0.0), ImageGrid(w, h, 0.0), 0};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth_at_source.is_valid(x, y)) continue;
      const Eigen::Vector3d p = pose * (ray(x, y, camera) / depth_at_source.inv_depth()(x, y));
      const Projection proj = project(p, camera);
      if (!proj.in_bounds) continue;
      const double occlusion = std::exp(std::min(gamma / p.z(), kMaxSplatExponent));
      // Round-off leakage into a neighbour gets amplified by the occlusion weight, so snap to the grid.
      const double u = snap_to_grid(proj.pixel.x()), v = snap_to_grid(proj.pixel.y());
      const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
      const double fx = u - x0, fy = v - y0;
      const double value = source(x, y);
      const int xs[2] = {x0, x0 + 1};
      const int ys[2] = {y0, y0 + 1};
      const double wx[2] = {1.0 - fx, fx};
      const double wy[2] = {1.0 - fy, fy};
      for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
          const double bw = wx[i] * wy[j];
          if (bw <= 0.0 || !out.weight.contains(xs[i], ys[j])) continue;
          out.weight(xs[i], ys[j]) += bw * occlusion;
          out.accum(xs[i], ys[j]) += bw * occlusion * value;
        }
      }
      ++out.splatted;
    }
  }
  return out;
}

ImageGrid blend(const SplatBuffer& a, const SplatBuffer& b, double alpha) {
  if (!a.weight.same_shape(b.weight)) throw InvalidArgument("blend: buffer shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("blend: alpha must lie in [0, 1]");
  const int w = a.weight.width(), h = a.weight.height();
  ImageGrid out(w, h, 0.0);
  Mask known(w, h, 0);
  std::size_t holes = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double wa = a.weight[i], wb = b.weight[i];
    if (wa > 0.0 && wb > 0.0) {
      const double va = a.accum[i] / wa, vb = b.accum[i] / wb;
      const double ca = alpha * wa, cb = (1.0 - alpha) * wb;
      out[i] = (ca * va + cb * vb) / (ca + cb);
    } else if (wa > 0.0) {
      out[i] = a.accum[i] / wa;
    } else if (wb > 0.0) {
      out[i] = b.accum[i] / wb;
    } else {
      ++holes;
      continue;
    }
    known[i] = 1;
  }
  if (holes == out.size()) return out;

  // Jacobi-style passes so the fill does not depend on scan order.
  while (holes > 0) {
    std::vector<std::pair<std::size_t, double>> filled;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (known(x, y)) continue;
        double sum = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (known.contains(x + dx, y + dy) && known(x + dx, y + dy)) {
              sum += out(x + dx, y + dy);
              ++n;
            }
          }
        }
        if (n > 0) filled.emplace_back(out.index(x, y), sum / n);
      }
    }
    for (const auto& [i, value] : filled) {
      out[i] = value;
      known[i] = 1;
    }
    holes -= filled.size();
  }
  return out;
}

}  // namespace evrecon
