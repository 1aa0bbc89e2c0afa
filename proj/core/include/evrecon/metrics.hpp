#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evrecon/frame.hpp"

namespace evrecon {

inline constexpr double kPsnrCap = 99.0;

// Throws InvalidArgument on shape mismatch.
double psnr(const IntensityFrame& a, const IntensityFrame& b);
double psnr(const ImageGrid& a, const ImageGrid& b);

// Mean SSIM over every window x window patch (uniform weights, dynamic range 1).
double ssim(const ImageGrid& a, const ImageGrid& b, int window = 8, double k1 = 0.01, double k2 = 0.03);
double ssim(const IntensityFrame& a, const IntensityFrame& b, int window = 8, double k1 = 0.01, double k2 = 0.03);

struct MetricsRow {
  std::size_t frame_index = 0;
  double timestamp = 0.0;
  std::string method;
  double psnr = 0.0;
  double ssim = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

// CSV with header `frame_index,timestamp,method,psnr,ssim`.
std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

double mean_psnr(const std::vector<MetricsRow>& rows);

}  // namespace evrecon
