#include "evrecon/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evrecon/error.hpp"

namespace evrecon {

namespace {

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* who) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(who) + ": image shapes differ");
}

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

double psnr(const ImageGrid& a, const ImageGrid& b) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) throw InvalidArgument("psnr: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double psnr(const IntensityFrame& a, const IntensityFrame& b) { return psnr(a.pixels(), b.pixels()); }

double ssim(const ImageGrid& a, const ImageGrid& b, int window, double k1, double k2) {
  require_same_shape(a, b, "ssim");
  if (window < 1 || a.width() < window || a.height() < window)
    throw InvalidArgument("ssim: images smaller than the window");
  const double c1 = k1 * k1;
  const double c2 = k2 * k2;
  const double n = static_cast<double>(window) * window;
  double total = 0.0;
  std::size_t count = 0;
  for (int y0 = 0; y0 + window <= a.height(); ++y0)
    for (int x0 = 0; x0 + window <= a.width(); ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x) {
          const double va = a(x, y);
          const double vb = b(x, y);
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      const double ma = sa / n;
      const double mb = sb / n;
      const double va = std::max(0.0, saa / n - ma * ma);
      const double vb = std::max(0.0, sbb / n - mb * mb);
      const double cov = sab / n - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

double ssim(const IntensityFrame& a, const IntensityFrame& b, int window, double k1, double k2) {
  return ssim(a.pixels(), b.pixels(), window, k1, k2);
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "frame_index,timestamp,method,psnr,ssim\n";
  for (const auto& r : rows) {
    out += std::to_string(r.frame_index) + ',' + number(r.timestamp) + ',' + r.method + ',' + number(r.psnr) + ',' +
           number(r.ssim) + '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "frame_index,timestamp,method,psnr,ssim") throw ParseError("unexpected metrics header", line_no);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 5) throw ParseError("expected 5 columns", line_no);
    MetricsRow row;
    auto parse = [&](const std::string& cell, auto& value) {
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw ParseError("malformed number '" + cell + "'", line_no);
    };
    parse(cells[0], row.frame_index);
    parse(cells[1], row.timestamp);
    row.method = cells[2];
    parse(cells[3], row.psnr);
    parse(cells[4], row.ssim);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << format_metrics_csv(rows);
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_metrics_csv(ss.str());
}

double mean_psnr(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.psnr;
  return sum / static_cast<double>(rows.size());
}

}  // namespace evrecon
