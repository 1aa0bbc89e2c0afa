#include "evrecon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "evrecon/error.hpp"

namespace evrecon {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) { return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53; }

namespace {

constexpr int kNoiseTexels = 512;

double gaussian(std::uint64_t& state) {
  // Box-Muller; u1 is kept away from zero.
  const double u1 = (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = uniform01(state);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

// Periodic grid of blurred white noise, sampled bilinearly.
struct SyntheticScene::NoiseTexture {
  double texel = 1.0;
  std::vector<double> values;

  explicit NoiseTexture(const TextureSpec& spec) : texel(spec.feature_size / 2.0) {
    const int n = kNoiseTexels;
    std::uint64_t state = spec.seed;
    std::vector<double> white(static_cast<std::size_t>(n) * n);
    for (double& v : white) v = gaussian(state);

    const double sigma = 1.5;
    const int radius = 5;
    std::vector<double> kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));

    auto wrap = [n](int i) { return ((i % n) + n) % n; };
    std::vector<double> tmp(white.size(), 0.0);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * white[y * n + wrap(x + k)];
        tmp[y * n + x] = s;
      }
    values.assign(white.size(), 0.0);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * tmp[wrap(y + k) * n + x];
        values[y * n + x] = s;
      }

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(values.size()));
    for (double& v : values) v = std::clamp(spec.mean + spec.contrast * (v - mean) / sd, 0.0, 1.0);
  }

  double lookup(double wx, double wy) const {
    const int n = kNoiseTexels;
    const double u = wx / texel;
    const double v = wy / texel;
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double ax = u - fu;
    const double ay = v - fv;
    const long long iu = static_cast<long long>(fu);
    const long long iv = static_cast<long long>(fv);
    auto at = [&](long long x, long long y) {
      const long long xm = ((x % n) + n) % n;
      const long long ym = ((y % n) + n) % n;
      return values[static_cast<std::size_t>(ym * n + xm)];
    };
    return (1 - ax) * (1 - ay) * at(iu, iv) + ax * (1 - ay) * at(iu + 1, iv) + (1 - ax) * ay * at(iu, iv + 1) +
           ax * ay * at(iu + 1, iv + 1);
  }
};

SyntheticScene::SyntheticScene(std::vector<PlaneSpec> planes) : planes_(std::move(planes)) {
  if (planes_.empty()) throw ValidationError("planes", "scene needs at least one plane");
  for (std::size_t i = 0; i < planes_.size(); ++i) {
    const PlaneSpec& p = planes_[i];
    const std::string field = "planes[" + std::to_string(i) + "]";
    if (!(p.depth > 0.0) || !std::isfinite(p.depth)) throw ValidationError(field + ".depth", "must be positive");
    if (!(p.x_min < p.x_max) || !(p.y_min < p.y_max)) throw ValidationError(field, "empty extent");
    const TextureSpec& t = p.texture;
    if (!(t.feature_size > 0.0)) throw ValidationError(field + ".texture.feature_size", "must be positive");
    if (t.mean < 0.0 || t.mean > 1.0) throw ValidationError(field + ".texture.mean", "must lie in [0, 1]");
    if (!(t.contrast >= 0.0)) throw ValidationError(field + ".texture.contrast", "must be non-negative");
    noise_.push_back(t.kind == TextureKind::noise ? std::make_shared<const NoiseTexture>(t) : nullptr);
  }
}

double SyntheticScene::texture_at(std::size_t plane, double x, double y) const {
  const TextureSpec& t = planes_.at(plane).texture;
  switch (t.kind) {
    case TextureKind::noise:
      return std::clamp(noise_[plane]->lookup(x, y), 0.0, 1.0);
    case TextureKind::checkerboard: {
      const long long cx = static_cast<long long>(std::floor(x / t.feature_size));
      const long long cy = static_cast<long long>(std::floor(y / t.feature_size));
      const bool odd = ((cx + cy) % 2 + 2) % 2 == 1;
      return std::clamp(t.mean + (odd ? t.contrast : -t.contrast), 0.0, 1.0);
    }
    case TextureKind::step:
      return std::clamp(t.mean + (x < t.edge_x ? -t.contrast : t.contrast), 0.0, 1.0);
  }
  return t.mean;
}

SyntheticScene::Hit SyntheticScene::trace(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction) const {
  Hit best;
  if (direction.z() == 0.0) return best;
  for (std::size_t i = 0; i < planes_.size(); ++i) {
    const PlaneSpec& p = planes_[i];
    const double s = (p.depth - origin.z()) / direction.z();
    if (!(s > 0.0)) continue;
    const Eigen::Vector3d hit = origin + s * direction;
    if (hit.x() < p.x_min || hit.x() > p.x_max || hit.y() < p.y_min || hit.y() > p.y_max) continue;
    if (!best.hit || s < best.distance) {
      best.hit = true;
      best.distance = s;
      best.plane = i;
    }
  }
  if (best.hit) {
    const Eigen::Vector3d p = origin + best.distance * direction;
    best.intensity = texture_at(best.plane, p.x(), p.y());
  }
  return best;
}

Trajectory::Trajectory(std::vector<Keyframe> keyframes) : keyframes_(std::move(keyframes)) {
  if (keyframes_.empty()) throw ValidationError("keyframes", "trajectory needs at least one keyframe");
  if (keyframes_.front().t != 0.0 || !keyframes_.front().twist.isZero(0.0))
    throw ValidationError("keyframes", "first keyframe must be the identity at t = 0");
  for (std::size_t i = 1; i < keyframes_.size(); ++i) {
    if (!(keyframes_[i].t > keyframes_[i - 1].t)) throw ValidationError("keyframes", "times must strictly increase");
    if (!keyframes_[i].twist.allFinite()) throw ValidationError("keyframes", "non-finite twist");
  }
}

Pose Trajectory::at(double t) const {
  if (t <= 0.0 || keyframes_.size() == 1) return Pose();
  if (t >= keyframes_.back().t) return Pose::from_twist(keyframes_.back().twist);
  const auto upper = std::upper_bound(keyframes_.begin(), keyframes_.end(), t,
                                      [](double value, const Keyframe& k) { return value < k.t; });
  const Keyframe& b = *upper;
  const Keyframe& a = *(upper - 1);
  const double s = (t - a.t) / (b.t - a.t);
  return Pose::from_twist(((1.0 - s) * a.twist + s * b.twist).eval());
}

Pose Trajectory::relative(double t_from, double t_to) const { return se3_compose(se3_invert(at(t_to)), at(t_from)); }

View render_view(const SyntheticScene& scene, const Pose& world_from_camera, const CameraIntrinsics& camera,
                 double timestamp) {
  const int w = camera.width();
  const int h = camera.height();
  ImageGrid intensity(w, h, 0.0);
  ImageGrid inv_depth(w, h, 0.0);
  Mask valid(w, h, 0);
  std::size_t hits = 0;
  const Eigen::Matrix3d& r = world_from_camera.rotation();
  const Eigen::Vector3d& origin = world_from_camera.translation();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d ray((x - camera.cx()) / camera.fx(), (y - camera.cy()) / camera.fy(), 1.0);
      const auto hit = scene.trace(origin, r * ray);
      if (!hit.hit) continue;
      intensity(x, y) = hit.intensity;
      inv_depth(x, y) = 1.0 / hit.distance;
      valid(x, y) = 1;
      ++hits;
    }
  if (hits == 0) throw Error("render_view: no plane is visible from this pose");
  return View{IntensityFrame(std::move(intensity), timestamp), DepthMap(std::move(inv_depth), std::move(valid))};
}

void emit_crossings(PixelEventState& state, double t, double log_value, double threshold, int x, int y,
                    std::vector<Event>& out) {
  constexpr double kSlack = 1e-12;
  const double from = state.last_value;
  const double dt = t - state.last_time;
  auto crossing_time = [&](double level) {
    if (log_value == from) return t;
    const double s = std::clamp((level - from) / (log_value - from), 0.0, 1.0);
    return state.last_time + s * dt;
  };
  while (log_value - state.reference >= threshold - kSlack) {
    state.reference += threshold;
    out.push_back(Event{crossing_time(state.reference), x, y, 1});
  }
  while (state.reference - log_value >= threshold - kSlack) {
    state.reference -= threshold;
    out.push_back(Event{crossing_time(state.reference), x, y, -1});
  }
  state.last_value = log_value;
  state.last_time = t;
}

EventStream generate_events(const SyntheticScene& scene, const Trajectory& trajectory, const CameraIntrinsics& camera,
                            double contrast_threshold, double sample_rate, double t_begin, double t_end) {
  if (!(contrast_threshold > 0.0)) throw ValidationError("contrast_threshold", "must be positive");
  if (!(sample_rate > 0.0)) throw ValidationError("sample_rate", "must be positive");
  if (!(t_end >= t_begin)) throw InvalidArgument("generate_events: t_end precedes t_begin");
  const int w = camera.width();
  const int h = camera.height();

  auto log_image = [&](double t) {
    const View view = render_view(scene, trajectory.at(t), camera, t);
    ImageGrid out(w, h);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = safe_log(view.image.pixels()[i]);
    return out;
  };

  std::vector<PixelEventState> states(static_cast<std::size_t>(w) * h);
  {
    const ImageGrid first = log_image(t_begin);
    for (std::size_t i = 0; i < states.size(); ++i) states[i] = PixelEventState{first[i], first[i], t_begin};
  }

  const auto samples = static_cast<long long>(std::ceil((t_end - t_begin) * sample_rate - 1e-9));
  std::vector<Event> events;
  std::vector<Event> step;
  for (long long i = 1; i <= samples; ++i) {
    const double t = std::min(t_begin + static_cast<double>(i) / sample_rate, t_end);
    const ImageGrid current = log_image(t);
    step.clear();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t k = current.index(x, y);
        emit_crossings(states[k], t, current[k], contrast_threshold, x, y, step);
      }
    std::stable_sort(step.begin(), step.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    events.insert(events.end(), step.begin(), step.end());
  }
  return EventStream(w, h, std::move(events));
}

EventStream corrupt_events(const EventStream& stream, double noise_rate, std::uint64_t seed) {
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ValidationError("noise_rate", "must lie in [0, 1]");
  const auto extra = static_cast<std::size_t>(std::llround(noise_rate * static_cast<double>(stream.size())));
  if (extra == 0) return stream;
  const double t0 = stream.events().front().t;
  const double t1 = stream.events().back().t;
  std::uint64_t state = seed;
  std::vector<Event> events = stream.events();
  events.reserve(events.size() + extra);
  for (std::size_t i = 0; i < extra; ++i) {
    Event e;
    e.t = t0 + uniform01(state) * (t1 - t0);
    e.x = std::min(static_cast<int>(uniform01(state) * stream.width()), stream.width() - 1);
    e.y = std::min(static_cast<int>(uniform01(state) * stream.height()), stream.height() - 1);
    e.polarity = uniform01(state) < 0.5 ? -1 : 1;
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return EventStream(stream.width(), stream.height(), std::move(events));
}

std::vector<PlaneSpec> default_two_plane_scene() {
  PlaneSpec far;
  far.depth = 4.0;
  far.texture = TextureSpec{TextureKind::noise, 0.2, 0.5, 0.25, 0.0, 11};
  PlaneSpec near;
  near.depth = 2.0;
  near.x_max = 0.1;
  near.texture = TextureSpec{TextureKind::noise, 0.1, 0.5, 0.25, 0.0, 23};
  return {far, near};
}

std::vector<Keyframe> default_keyframes(double duration) {
  Vector6d rate;
  rate << 0.075, -0.15, 0.045, 0.9, 0.3, 0.45;
  return {Keyframe{0.0, Vector6d::Zero()}, Keyframe{duration, (rate * duration).eval()}};
}

void SimulatorConfig::validate() const {
  if (frame_count < 1) throw ValidationError("frame_count", "must be at least 1");
  if (!(first_frame_time >= 0.0)) throw ValidationError("first_frame_time", "must be non-negative");
  if (!(frame_interval > 0.0)) throw ValidationError("frame_interval", "must be positive");
  if (!(contrast_threshold > 0.0)) throw ValidationError("contrast_threshold", "must be positive");
  if (!(sample_rate >= 10.0 / frame_interval)) throw ValidationError("sample_rate", "must be at least 10x the frame rate");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ValidationError("noise_rate", "must lie in [0, 1]");
}

SimulatedSequence simulate(const SimulatorConfig& config) {
  config.validate();
  std::vector<PlaneSpec> planes = config.planes;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    std::uint64_t state = config.seed ^ (planes[i].texture.seed * 0x9E3779B97F4A7C15ULL) ^ (i + 1);
    planes[i].texture.seed = splitmix64(state);
  }
  SyntheticScene scene(std::move(planes));
  const double end = config.end_time();
  Trajectory trajectory(config.keyframes.empty() ? default_keyframes(end) : config.keyframes);

  std::vector<IntensityFrame> frames;
  std::vector<DepthMap> depths;
  for (int k = 0; k < config.frame_count; ++k) {
    const double t = config.first_frame_time + config.frame_interval * k;
    View view = render_view(scene, trajectory.at(t), config.camera, t);
    frames.push_back(std::move(view.image));
    depths.push_back(std::move(view.depth));
  }
  EventStream events =
      generate_events(scene, trajectory, config.camera, config.contrast_threshold, config.sample_rate, 0.0, end);
  if (config.noise_rate > 0.0) {
    std::uint64_t state = config.seed ^ 0xD1B54A32D192ED03ULL;
    events = corrupt_events(events, config.noise_rate, splitmix64(state));
  }
  return SimulatedSequence{config.camera, std::move(scene), std::move(trajectory), std::move(frames),
                           std::move(depths), std::move(events)};
}

}  // namespace evrecon
