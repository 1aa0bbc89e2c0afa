#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evrecon/camera.hpp"
#include "evrecon/events.hpp"
#include "evrecon/frame.hpp"
#include "evrecon/pose.hpp"

namespace evrecon {

// 8-bit grayscale PNG. Values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const ImageGrid& image);
// Any PNG color type; color images are converted to gray. Values in [0, 1].
ImageGrid read_png(const std::filesystem::path& path);

// Single-channel little-endian PFM ("Pf", scale -1), rows stored bottom-up.
std::vector<std::byte> encode_pfm(const ImageGrid& image);
ImageGrid decode_pfm(std::span<const std::byte> bytes);
void write_pfm(const std::filesystem::path& path, const ImageGrid& image);
ImageGrid read_pfm(const std::filesystem::path& path);

// Depth maps go to disk as metric depth (1 / inverse depth); invalid pixels as 0.
void write_depth_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth_pfm(const std::filesystem::path& path);

struct TrajectoryEntry {
  double t_mid = 0.0;
  Vector6d twist = Vector6d::Zero();
};

// One `t_mid tx ty tz wx wy wz` line per entry (translational twist part first).
std::string format_trajectory(const std::vector<TrajectoryEntry>& entries);
std::vector<TrajectoryEntry> parse_trajectory(const std::string& text);
void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryEntry>& entries);
std::vector<TrajectoryEntry> read_trajectory(const std::filesystem::path& path);

struct ManifestEntry {
  std::string filename;
  double timestamp = 0.0;
};

// One `filename timestamp` line per frame; used by frames.txt and output manifests.
std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(const std::string& text);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

std::string frame_filename(std::size_t index);  // frame_%08d.png

/// Dataset directory: frames/frame_%08d.png, frames.txt, events.txt, calib.txt.
struct Dataset {
  CameraIntrinsics camera;
  std::vector<IntensityFrame> frames;
  EventStream events;
  std::size_t dropped_events = 0;
};

Dataset load_dataset(const std::filesystem::path& directory);
void save_dataset(const std::filesystem::path& directory, const CameraIntrinsics& camera,
                  const std::vector<IntensityFrame>& frames, const EventStream& events);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string format_double(double value);  // shortest round-trip form

}  // namespace evrecon
