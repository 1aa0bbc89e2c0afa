#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "evrecon/camera.hpp"
#include "evrecon/events.hpp"
#include "evrecon/frame.hpp"
#include "evrecon/pose.hpp"

namespace evrecon {

enum class TextureKind { noise, checkerboard, step };

struct TextureSpec {
  TextureKind kind = TextureKind::noise;
  // Noise: correlation length (world units). Checkerboard: square size.
  double feature_size = 0.05;
  double mean = 0.5;
  // Noise: standard deviation. Checkerboard and step: half the jump.
  double contrast = 0.15;
  // Step texture: dark for x < edge_x, bright otherwise.
  double edge_x = 0.0;
  std::uint64_t seed = 1;
};

/// Fronto-parallel textured plane Z = depth in world coordinates, optionally
/// limited to a rectangle.
struct PlaneSpec {
  double depth = 2.0;
  double x_min = -std::numeric_limits<double>::infinity();
  double x_max = std::numeric_limits<double>::infinity();
  double y_min = -std::numeric_limits<double>::infinity();
  double y_max = std::numeric_limits<double>::infinity();
  TextureSpec texture{};
};

class SyntheticScene {
 public:
  // Throws ValidationError for non-positive depths or empty plane lists.
  explicit SyntheticScene(std::vector<PlaneSpec> planes);

  const std::vector<PlaneSpec>& planes() const noexcept { return planes_; }
  // Texture value of `plane` at world (x, y), in [0, 1].
  double texture_at(std::size_t plane, double x, double y) const;

  struct Hit {
    bool hit = false;
    double distance = 0.0;  // ray parameter; camera depth for rays with unit z
    double intensity = 0.0;
    std::size_t plane = 0;
  };
  Hit trace(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction) const;

 private:
  struct NoiseTexture;
  std::vector<PlaneSpec> planes_;
  std::vector<std::shared_ptr<const NoiseTexture>> noise_;
};

struct Keyframe {
  double t = 0.0;
  Vector6d twist = Vector6d::Zero();  // world_from_camera
};

/// Camera path, piecewise linear in twist coordinates between keyframes.
class Trajectory {
 public:
  // The first keyframe must be t = 0 with zero twist; times strictly increase.
  explicit Trajectory(std::vector<Keyframe> keyframes);

  // world_from_camera at time t, clamped to the keyframe span.
  Pose at(double t) const;
  // Maps points of the camera at t_from into the camera at t_to.
  Pose relative(double t_from, double t_to) const;
  double duration() const noexcept { return keyframes_.back().t; }
  const std::vector<Keyframe>& keyframes() const noexcept { return keyframes_; }

 private:
  std::vector<Keyframe> keyframes_;
};

struct View {
  IntensityFrame image;
  DepthMap depth;  // metric inverse depth, every hit pixel valid
};

// Ray-casts the scene from a camera with pose world_from_camera. Throws Error
// when no pixel sees a plane.
View render_view(const SyntheticScene& scene, const Pose& world_from_camera, const CameraIntrinsics& camera,
                 double timestamp = 0.0);

/// Contrast-threshold event model for one pixel.
struct PixelEventState {
  double reference = 0.0;  // log intensity at the last event
  double last_value = 0.0;
  double last_time = 0.0;
};

// Emits one event per threshold crossing between the previous sample and
// (t, log_value), with linearly interpolated timestamps.
void emit_crossings(PixelEventState& state, double t, double log_value, double threshold, int x, int y,
                    std::vector<Event>& out);

EventStream generate_events(const SyntheticScene& scene, const Trajectory& trajectory, const CameraIntrinsics& camera,
                            double contrast_threshold, double sample_rate, double t_begin, double t_end);

// Adds round(noise_rate * size) uniformly random events inside the stream's
// time span and re-sorts by time (stable).
EventStream corrupt_events(const EventStream& stream, double noise_rate, std::uint64_t seed);

std::vector<PlaneSpec> default_two_plane_scene();
std::vector<Keyframe> default_keyframes(double duration);

struct SimulatorConfig {
  CameraIntrinsics camera{128.0, 128.0, 63.5, 63.5, 128, 128};
  std::vector<PlaneSpec> planes = default_two_plane_scene();
  // Empty: constant-velocity default motion.
  std::vector<Keyframe> keyframes;
  int frame_count = 3;
  // Leaves room for the pseudo-intensity warm-up before the first frame.
  double first_frame_time = 0.2;
  double frame_interval = 0.1;
  double contrast_threshold = 0.1;
  double sample_rate = 1000.0;
  double noise_rate = 0.0;
  std::uint64_t seed = 7;

  void validate() const;
  // Time up to which events are generated: last frame plus first_frame_time.
  double end_time() const { return first_frame_time * 2.0 + frame_interval * (frame_count - 1); }
};

struct SimulatedSequence {
  CameraIntrinsics camera;
  SyntheticScene scene;
  Trajectory trajectory;
  std::vector<IntensityFrame> frames;
  std::vector<DepthMap> depths;  // metric inverse depth per frame
  EventStream events;
};

SimulatedSequence simulate(const SimulatorConfig& config);

// Deterministic helpers shared by the simulator and noise injection.
std::uint64_t splitmix64(std::uint64_t& state);
double uniform01(std::uint64_t& state);

}  // namespace evrecon
