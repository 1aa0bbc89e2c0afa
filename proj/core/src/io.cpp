#include "evrecon/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evrecon/error.hpp"

namespace evrecon {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::byte> read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_binary(const fs::path& path, const std::vector<std::byte>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

double parse_number(std::string_view token, std::size_t line, const char* what) {
  double value = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size() || !std::isfinite(value))
    throw ParseError(std::string("malformed ") + what + " '" + std::string(token) + "'", line);
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename F>
void for_each_line(const std::string& text, F&& f) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view line(text.data() + pos, (end == std::string::npos ? text.size() : end) - pos);
    ++line_no;
    const auto tokens = split_ws(line);
    if (!tokens.empty() && tokens.front().front() != '#') f(tokens, line_no);
    if (end == std::string::npos) break;
    pos = end + 1;
  }
}

}  // namespace

void write_png(const fs::path& path, const ImageGrid& image) {
  if (image.empty()) throw InvalidArgument("write_png: empty image");
  std::vector<std::uint8_t> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::isfinite(image[i]) ? std::clamp(image[i], 0.0, 1.0) : 0.0;
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes.data(), 0, nullptr))
    throw Error("cannot write PNG " + path.string() + ": " + png.message);
}

ImageGrid read_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw Error("cannot read PNG " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error("cannot decode PNG " + path.string() + ": " + png.message);
  }
  ImageGrid out(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bytes[i] / 255.0;
  return out;
}

std::vector<std::byte> encode_pfm(const ImageGrid& image) {
  const std::string header = "Pf\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n-1.0\n";
  std::vector<std::byte> out(header.size() + image.size() * 4);
  std::memcpy(out.data(), header.data(), header.size());
  std::size_t offset = header.size();
  for (int y = image.height() - 1; y >= 0; --y)
    for (int x = 0; x < image.width(); ++x) {
      const auto v = std::bit_cast<std::uint32_t>(static_cast<float>(image(x, y)));
      for (int b = 0; b < 4; ++b) out[offset++] = static_cast<std::byte>((v >> (8 * b)) & 0xFF);
    }
  return out;
}

ImageGrid decode_pfm(std::span<const std::byte> bytes) {
  std::size_t pos = 0;
  auto token = [&](const char* what) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) throw FormatError(std::string("truncated PFM header: missing ") + what, start);
    return std::pair{std::string(reinterpret_cast<const char*>(bytes.data()) + start, pos - start), start};
  };
  const auto [magic, magic_at] = token("magic");
  if (magic != "Pf") throw FormatError("not a single-channel PFM (magic '" + magic + "')", magic_at);
  auto integer = [&](const char* what) {
    const auto [text, at] = token(what);
    int value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || value <= 0)
      throw FormatError(std::string("bad PFM ") + what, at);
    return value;
  };
  const int width = integer("width");
  const int height = integer("height");
  const auto [scale_text, scale_at] = token("scale");
  double scale = 0.0;
  const auto res = std::from_chars(scale_text.data(), scale_text.data() + scale_text.size(), scale);
  if (res.ec != std::errc() || scale == 0.0) throw FormatError("bad PFM scale", scale_at);
  ++pos;  // single whitespace byte ends the header
  const bool little = scale < 0.0;
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 4;
  if (pos > bytes.size() || bytes.size() - pos < need) throw FormatError("truncated PFM data", bytes.size());
  if (bytes.size() - pos != need) throw FormatError("trailing bytes after PFM data", pos + need);
  ImageGrid out(width, height);
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < width; ++x) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) {
        const auto byte = static_cast<std::uint32_t>(bytes[pos + (little ? b : 3 - b)]);
        v |= byte << (8 * b);
      }
      pos += 4;
      out(x, y) = std::bit_cast<float>(v);
    }
  return out;
}

void write_pfm(const fs::path& path, const ImageGrid& image) { write_binary(path, encode_pfm(image)); }

ImageGrid read_pfm(const fs::path& path) {
  const auto bytes = read_binary(path);
  return decode_pfm(bytes);
}

void write_depth_pfm(const fs::path& path, const DepthMap& depth) {
  ImageGrid out(depth.width(), depth.height(), 0.0);
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.is_valid(x, y)) out(x, y) = 1.0 / depth.inv_depth()(x, y);
  write_pfm(path, out);
}

DepthMap read_depth_pfm(const fs::path& path) {
  const ImageGrid metric = read_pfm(path);
  ImageGrid inv(metric.width(), metric.height(), 0.0);
  Mask valid(metric.width(), metric.height(), 0);
  for (std::size_t i = 0; i < metric.size(); ++i)
    if (metric[i] > 0.0 && std::isfinite(metric[i])) {
      inv[i] = 1.0 / metric[i];
      valid[i] = 1;
    }
  return DepthMap(std::move(inv), std::move(valid));
}

std::string format_trajectory(const std::vector<TrajectoryEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += format_double(e.t_mid);
    for (int i : {3, 4, 5, 0, 1, 2}) out += ' ' + format_double(e.twist[i]);
    out += '\n';
  }
  return out;
}

std::vector<TrajectoryEntry> parse_trajectory(const std::string& text) {
  std::vector<TrajectoryEntry> out;
  for_each_line(text, [&](const std::vector<std::string_view>& tokens, std::size_t line) {
    if (tokens.size() != 7) throw ParseError("expected `t_mid tx ty tz wx wy wz`", line);
    TrajectoryEntry e;
    e.t_mid = parse_number(tokens[0], line, "timestamp");
    const int order[6] = {3, 4, 5, 0, 1, 2};
    for (int i = 0; i < 6; ++i) e.twist[order[i]] = parse_number(tokens[i + 1], line, "twist component");
    out.push_back(e);
  });
  return out;
}

void write_trajectory(const fs::path& path, const std::vector<TrajectoryEntry>& entries) {
  write_text_file(path, format_trajectory(entries));
}

std::vector<TrajectoryEntry> read_trajectory(const fs::path& path) { return parse_trajectory(read_text_file(path)); }

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += e.filename + ' ' + format_double(e.timestamp) + '\n';
  return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> out;
  for_each_line(text, [&](const std::vector<std::string_view>& tokens, std::size_t line) {
    if (tokens.size() != 2) throw ParseError("expected `filename timestamp`", line);
    out.push_back(ManifestEntry{std::string(tokens[0]), parse_number(tokens[1], line, "timestamp")});
  });
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  write_text_file(path, format_manifest(entries));
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) { return parse_manifest(read_text_file(path)); }

std::string frame_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%08zu.png", index);
  return buf;
}

Dataset load_dataset(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw Error("dataset directory not found: " + directory.string());
  const CameraIntrinsics camera = read_calibration(directory / "calib.txt");
  const auto manifest = read_manifest(directory / "frames.txt");
  if (manifest.empty()) throw Error("frames.txt lists no frames");
  std::vector<IntensityFrame> frames;
  for (const auto& entry : manifest) {
    ImageGrid pixels = read_png(directory / "frames" / entry.filename);
    IntensityFrame frame(std::move(pixels), entry.timestamp);
    if (!frame.matches(camera)) throw Error("frame " + entry.filename + " does not match calib.txt resolution");
    if (!frames.empty() && !(entry.timestamp > frames.back().timestamp()))
      throw Error("frames.txt timestamps must strictly increase");
    frames.push_back(std::move(frame));
  }
  ParsedEvents parsed = read_events(directory / "events.txt", camera.width(), camera.height());
  return Dataset{camera, std::move(frames), std::move(parsed.stream), parsed.dropped_out_of_bounds};
}

void save_dataset(const fs::path& directory, const CameraIntrinsics& camera, const std::vector<IntensityFrame>& frames,
                  const EventStream& events) {
  fs::create_directories(directory / "frames");
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string name = frame_filename(i);
    write_png(directory / "frames" / name, frames[i].pixels());
    manifest.push_back({name, frames[i].timestamp()});
  }
  write_manifest(directory / "frames.txt", manifest);
  write_events(directory / "events.txt", events);
  write_calibration(directory / "calib.txt", camera);
}

}  // namespace evrecon
