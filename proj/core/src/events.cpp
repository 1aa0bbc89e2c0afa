#include "evrecon/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "evrecon/error.hpp"

namespace evrecon {
namespace {

// Curvature floor of the smoothed TV norm.
constexpr double kTvEpsilon = 0.05;
// Ranges below this are stretched to [0, 1].
constexpr double kCollapsedRange = 0.05;
constexpr double kLogFloor = 1e-3;

void total_variation_smooth(ImageGrid& s, double weight, int iterations) {
  if (weight <= 0.0 || iterations <= 0) return;
  const int w = s.width(), h = s.height();
  const ImageGrid data = s;
  ImageGrid px(w, h, 0.0), py(w, h, 0.0);
  const double step = 1.0 / (1.0 + 8.0 * weight / kTvEpsilon);
  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double gx = x + 1 < w ? s(x + 1, y) - s(x, y) : 0.0;
        const double gy = y + 1 < h ? s(x, y + 1) - s(x, y) : 0.0;
        const double norm = std::sqrt(gx * gx + gy * gy + kTvEpsilon * kTvEpsilon);
        px(x, y) = gx / norm;
        py(x, y) = gy / norm;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Divergence is the negative adjoint of the forward difference.
        const double div = (px(x, y) - (x > 0 ? px(x - 1, y) : 0.0)) + (py(x, y) - (y > 0 ? py(x, y - 1) : 0.0));
        const double grad = (s(x, y) - data(x, y)) - weight * div;
        s(x, y) = std::clamp(s(x, y) - step * grad, 0.0, 1.0);
      }
    }
  }
}

bool parse_double(std::string_view token, double& out) {
  const auto* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_int(std::string_view token, int& out) {
  const auto* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

EventStream::EventStream(int width, int height, std::vector<Event> events)
    : width_(width), height_(height), events_(std::move(events)) {
  if (width <= 0 || height <= 0) throw ValidationError("event stream", "sensor size must be positive");
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) {
      throw ValidationError("event stream", "event " + std::to_string(i) + " lies outside the sensor");
    }
    if (e.polarity != 1 && e.polarity != -1) {
      throw ValidationError("event stream", "event " + std::to_string(i) + " has polarity other than +-1");
    }
    if (!std::isfinite(e.t) || (i > 0 && e.t < events_[i - 1].t)) {
      throw ValidationError("event stream", "timestamps must be finite and non-decreasing (event " + std::to_string(i) + ")");
    }
  }
}

std::span<const Event> EventStream::between(double t_begin, double t_end) const {
  const auto lo = std::lower_bound(events_.begin(), events_.end(), t_begin, [](const Event& e, double t) { return e.t < t; });
  const auto hi = std::lower_bound(lo, events_.end(), t_end, [](const Event& e, double t) { return e.t < t; });
  return {lo, hi};
}

ParsedEvents parse_events(const std::string& text, int width, int height) {
  std::vector<Event> events;
  std::size_t dropped = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  double last_t = -INFINITY;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;

    std::string_view tokens[5];
    int count = 0;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (count < 5) tokens[count] = line.substr(i, j - i);
      ++count;
      i = j;
    }
    if (count == 0) continue;
    Event e;
    int p = 0;
    if (count != 4 || !parse_double(tokens[0], e.t) || !parse_int(tokens[1], e.x) || !parse_int(tokens[2], e.y) ||
        !parse_int(tokens[3], p) || (p != 0 && p != 1) || !std::isfinite(e.t)) {
      throw ParseError("malformed event, expected `t x y p` with p in {0,1}", line_no);
    }
    if (e.t < last_t) throw ParseError("timestamp decreases", line_no);
    last_t = e.t;
    e.polarity = p == 1 ? 1 : -1;
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) {
      ++dropped;
      continue;
    }
    events.push_back(e);
  }
  return {EventStream(width, height, std::move(events)), dropped};
}

ParsedEvents read_events(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_events(text, width, height);
}

std::string serialize_events(const EventStream& stream) {
  std::string out;
  out.reserve(stream.size() * 32);
  char buf[64];
  for (const Event& e : stream.events()) {
    auto res = std::to_chars(buf, buf + sizeof(buf), e.t);
    out.append(buf, res.ptr);
    out.push_back(' ');
    res = std::to_chars(buf, buf + sizeof(buf), e.x);
    out.append(buf, res.ptr);
    out.push_back(' ');
    res = std::to_chars(buf, buf + sizeof(buf), e.y);
    out.append(buf, res.ptr);
    out.push_back(' ');
    out.push_back(e.polarity > 0 ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

void write_events(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string text = serialize_events(stream);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

BlockPartition frame_events(const EventStream& stream, std::size_t block_size, double t_start, double t_end) {
  if (block_size < 1) throw InvalidArgument("frame_events: block_size must be >= 1");
  const std::span<const Event> window = stream.between(t_start, t_end);
  BlockPartition out;
  if (window.size() < block_size) {
    out.short_window = true;
    if (!window.empty()) out.blocks.push_back({window, window.front().t, window.back().t});
    return out;
  }
  std::vector<std::size_t> bounds;
  for (std::size_t b = 0; b + block_size <= window.size(); b += block_size) bounds.push_back(b);
  const std::size_t remainder = window.size() % block_size;
  if (remainder != 0 && 2 * remainder >= block_size) bounds.push_back(window.size() - remainder);
  bounds.push_back(window.size());
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    auto block = window.subspan(bounds[i], bounds[i + 1] - bounds[i]);
    out.blocks.push_back({block, block.front().t, block.back().t});
  }
  // A short remainder was not given its own bound, so it already sits in the last block.
  return out;
}

PseudoIntensityFrame pseudo_intensity(std::span<const Event> block, const PseudoIntensityFrame* prior, int width,
                                      int height, const PseudoIntensitySettings& settings, double t_mid,
                                      int block_index) {
  PseudoIntensityFrame out{ImageGrid(width, height, kNeutralIntensity), t_mid, block_index};
  if (prior != nullptr) {
    if (prior->pixels.width() != width || prior->pixels.height() != height) {
      throw InvalidArgument("pseudo_intensity: prior shape mismatch");
    }
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
      out.pixels[i] = kNeutralIntensity + settings.decay * (prior->pixels[i] - kNeutralIntensity);
    }
  }
  for (const Event& e : block) {
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) throw InvalidArgument("pseudo_intensity: event outside sensor");
    double& s = out.pixels(e.x, e.y);
    s = std::clamp(s + e.polarity * settings.contrast, 0.0, 1.0);
  }
  total_variation_smooth(out.pixels, settings.tv_weight, settings.tv_iterations);

  const auto [lo, hi] = std::minmax_element(out.pixels.values().begin(), out.pixels.values().end());
  const double range = *hi - *lo;
  if (range > 0.0 && range < kCollapsedRange) {
    const double lo_value = *lo;
    for (double& v : out.pixels.values()) v = (v - lo_value) / range;
  }
  return out;
}

double safe_log(double intensity) { return std::log(std::max(intensity, kLogFloor)); }

ComplementaryFilter::ComplementaryFilter(const IntensityFrame& first_frame, double cutoff, double contrast)
    : cutoff_(cutoff),
      contrast_(contrast),
      time_(first_frame.timestamp()),
      log_state_(first_frame.width(), first_frame.height()),
      log_target_(first_frame.width(), first_frame.height()),
      last_update_(first_frame.width(), first_frame.height(), first_frame.timestamp()) {
  if (!(cutoff > 0.0)) throw InvalidArgument("complementary filter: cutoff must be positive");
  for (std::size_t i = 0; i < log_state_.size(); ++i) {
    log_target_[i] = safe_log(first_frame.pixels()[i]);
    log_state_[i] = log_target_[i];
  }
}

void ComplementaryFilter::settle(int x, int y, double t) {
  const double dt = t - last_update_(x, y);
  if (dt <= 0.0) return;
  const double target = log_target_(x, y);
  log_state_(x, y) = target + (log_state_(x, y) - target) * std::exp(-cutoff_ * dt);
  last_update_(x, y) = t;
}

void ComplementaryFilter::advance_to(double t) {
  if (t < time_) throw InvalidArgument("complementary filter: time must not go backwards");
  for (int y = 0; y < log_state_.height(); ++y) {
    for (int x = 0; x < log_state_.width(); ++x) settle(x, y, t);
  }
  time_ = t;
}

void ComplementaryFilter::set_frame(const IntensityFrame& frame) {
  if (frame.width() != log_state_.width() || frame.height() != log_state_.height()) {
    throw InvalidArgument("complementary filter: frame shape mismatch");
  }
  advance_to(std::max(time_, frame.timestamp()));
  for (std::size_t i = 0; i < log_target_.size(); ++i) log_target_[i] = safe_log(frame.pixels()[i]);
}

void ComplementaryFilter::apply(const Event& event) {
  settle(event.x, event.y, event.t);
  log_state_(event.x, event.y) += event.polarity * contrast_;
  time_ = std::max(time_, event.t);
}

ImageGrid ComplementaryFilter::intensity() const {
  ImageGrid out(log_state_.width(), log_state_.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(std::exp(log_state_[i]), 0.0, 1.0);
  return out;
}

std::vector<IntensityFrame> complementary_filter(const EventStream& stream, std::span<const IntensityFrame> frames,
                                                 std::span<const double> sample_times, double cutoff,
                                                 double contrast) {
  if (frames.empty()) throw InvalidArgument("complementary_filter: needs at least one frame");
  ComplementaryFilter filter(frames.front(), cutoff, contrast);
  std::size_t next_frame = 1;
  const auto& events = stream.events();
  std::size_t next_event = 0;
  while (next_event < events.size() && events[next_event].t < frames.front().timestamp()) ++next_event;

  std::vector<IntensityFrame> out;
  out.reserve(sample_times.size());
  for (double sample : sample_times) {
    if (sample < filter.time()) throw InvalidArgument("complementary_filter: sample times must ascend");
    // Frames win ties against events.
    while (true) {
      const double tf = next_frame < frames.size() ? frames[next_frame].timestamp() : INFINITY;
      const double te = next_event < events.size() ? events[next_event].t : INFINITY;
      if (tf <= te && tf <= sample) {
        filter.set_frame(frames[next_frame++]);
      } else if (te < tf && te <= sample) {
        filter.apply(events[next_event++]);
      } else {
        break;
      }
    }
    filter.advance_to(sample);
    out.push_back(IntensityFrame(filter.intensity(), sample));
  }
  return out;
}

}  // namespace evrecon
