#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "evrecon/frame.hpp"
#include "evrecon/grid.hpp"

namespace evrecon {

/// Dense optical flow in pixels: I1(x, y) ~ I2(x + du, y + dv).
struct FlowField {
  ImageGrid du;
  ImageGrid dv;
  Mask valid;
  // Set when the inputs carry no usable gradient (e.g. constant images).
  bool low_confidence = false;

  FlowField() = default;
  FlowField(int width, int height);
  int width() const noexcept { return du.width(); }
  int height() const noexcept { return du.height(); }
};

struct FlowSettings {
  int levels = 4;
  int iterations = 100;  // Jacobi iterations per warp
  int warps = 3;         // re-linearizations per level
  // Horn-Schunck alpha relative to the joint intensity range of the inputs.
  double smoothness = 0.1;
};

// Pyramidal Horn-Schunck with warping between levels.
FlowField estimate_flow(const ImageGrid& first, const ImageGrid& second, const FlowSettings& settings = {});

// Middlebury `.flo`: float 202021.25, int32 width, int32 height, then
// row-major interleaved float32 (du, dv). Little-endian.
inline constexpr float kFloMagic = 202021.25f;

std::vector<std::byte> encode_flo(const FlowField& flow);
// Throws FormatError naming the byte offset of the first problem.
FlowField decode_flo(std::span<const std::byte> bytes);
void export_flow(const std::filesystem::path& path, const FlowField& flow);
FlowField import_flow(const std::filesystem::path& path);

inline constexpr double kDefaultFlowEpsilon = 0.1;

// Inverse depth proportional to flow magnitude (floored at epsilon), scaled so
// the mean valid inverse depth is 1. Throws Error when no flow vector is valid.
DepthMap depth_from_flow(const FlowField& flow, double epsilon = kDefaultFlowEpsilon);

struct RefineSettings {
  double spatial_sigma = 4.0;
  double range_sigma = 0.05;
  int iterations = 3;
};

// Iterated joint bilateral filter on inverse depth, guided by intensity.
// Invalid pixels neither change nor contribute.
DepthMap edge_aware_refine(const DepthMap& depth, const ImageGrid& guide, const RefineSettings& settings = {});

}  // namespace evrecon
