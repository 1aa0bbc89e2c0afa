#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evrecon/frame.hpp"
#include "evrecon/grid.hpp"

namespace evrecon {

struct Event {
  double t = 0.0;  // seconds
  int x = 0;
  int y = 0;
  int polarity = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered events from one sensor. Ties keep their original order.
class EventStream {
 public:
  EventStream(int width, int height) : width_(width), height_(height) {}
  // Throws ValidationError on out-of-bounds pixels, bad polarity or decreasing time.
  EventStream(int width, int height, std::vector<Event> events);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<Event>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  // Half-open [t_begin, t_end) slice of the stream.
  std::span<const Event> between(double t_begin, double t_end) const;

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  int width_;
  int height_;
  std::vector<Event> events_;
};

struct ParsedEvents {
  EventStream stream;
  std::size_t dropped_out_of_bounds = 0;
};

// Text format: one `t x y p` per line, p in {0, 1} (0 -> -1), sorted by t.
// Blank lines are skipped. Throws ParseError naming the offending line.
ParsedEvents parse_events(const std::string& text, int width, int height);
ParsedEvents read_events(const std::filesystem::path& path, int width, int height);
// Timestamps are written with round-trip precision.
std::string serialize_events(const EventStream& stream);
void write_events(const std::filesystem::path& path, const EventStream& stream);

struct EventBlock {
  std::span<const Event> events;
  double t_first = 0.0;
  double t_last = 0.0;
  double t_mid() const noexcept { return 0.5 * (t_first + t_last); }
};

struct BlockPartition {
  std::vector<EventBlock> blocks;
  // Set when the window held fewer than block_size events (including none).
  bool short_window = false;
};

inline constexpr std::size_t kDefaultBlockSize = 2000;

// Splits the events of [t_start, t_end) into consecutive blocks of block_size.
// A trailing remainder is kept as its own block when it has at least half a
// block of events, otherwise it joins the previous block.
BlockPartition frame_events(const EventStream& stream, std::size_t block_size, double t_start, double t_end);

struct PseudoIntensitySettings {
  double contrast = 0.1;  // intensity step per event
  double decay = 0.8;     // leak of the prior state toward neutral gray per block
  double tv_weight = 0.1;
  int tv_iterations = 20;
};

/// Edge-like intensity surrogate integrated from one event block.
struct PseudoIntensityFrame {
  ImageGrid pixels;
  double t_mid = 0.0;
  int block_index = 0;
};

inline constexpr double kNeutralIntensity = 0.5;

// Leaky event integration on top of `prior` (neutral gray when absent),
// followed by total-variation smoothing.
PseudoIntensityFrame pseudo_intensity(std::span<const Event> block, const PseudoIntensityFrame* prior, int width,
                                      int height, const PseudoIntensitySettings& settings, double t_mid = 0.0,
                                      int block_index = 0);

// Log of an intensity, floored to keep dark pixels finite.
double safe_log(double intensity);

/// Per-pixel continuous-time complementary filter fusing events with frames.
///
/// Between events the log state relaxes toward the log of the latest frame at
/// rate `cutoff` (rad/s); each event adds polarity * contrast.
class ComplementaryFilter {
 public:
  ComplementaryFilter(const IntensityFrame& first_frame, double cutoff, double contrast);

  void set_frame(const IntensityFrame& frame);
  // Decays every pixel to time t (must not go backwards).
  void advance_to(double t);
  void apply(const Event& event);

  double time() const noexcept { return time_; }
  const ImageGrid& log_state() const noexcept { return log_state_; }
  ImageGrid intensity() const;

 private:
  void settle(int x, int y, double t);

  double cutoff_;
  double contrast_;
  double time_;
  ImageGrid log_state_;
  ImageGrid log_target_;
  Grid<double> last_update_;
};

inline constexpr double kDefaultCfCutoff = 6.28;

// Runs the filter over `stream` with `frames` as low-frequency input and
// returns reconstructions at each requested sample time (ascending).
std::vector<IntensityFrame> complementary_filter(const EventStream& stream, std::span<const IntensityFrame> frames,
                                                 std::span<const double> sample_times, double cutoff,
                                                 double contrast);

}  // namespace evrecon
