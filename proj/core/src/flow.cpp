#include "evrecon/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "evrecon/error.hpp"
#include "evrecon/warp.hpp"

namespace evrecon {
namespace {

// Coarsest pyramid level kept, in pixels per side.
constexpr int kMinLevelSize = 16;

static_assert(std::endian::native == std::endian::little, "binary codecs assume a little-endian host");

// Bilinear resize of a flow component to (w, h), with values scaled by `gain`.
ImageGrid upsample(const ImageGrid& in, int w, int h, double gain) {
  ImageGrid out(w, h);
  const double sx = static_cast<double>(in.width()) / w, sy = static_cast<double>(in.height()) / h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.width() - 1.0);
      const double v = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.height() - 1.0);
      out(x, y) = gain * bilinear_sample(in, u, v).value;
    }
  }
  return out;
}

double clamped_at(const ImageGrid& g, int x, int y) {
  return g(std::clamp(x, 0, g.width() - 1), std::clamp(y, 0, g.height() - 1));
}

double sample_clamped(const ImageGrid& g, double u, double v) {
  u = std::clamp(u, 0.0, g.width() - 1.0);
  v = std::clamp(v, 0.0, g.height() - 1.0);
  return bilinear_sample(g, u, v).value;
}

void horn_schunck_level(const ImageGrid& first, const ImageGrid& second, double alpha2, int iterations,
                        ImageGrid& u, ImageGrid& v) {
  const int w = first.width(), h = first.height();
  ImageGrid warped(w, h), ix(w, h), iy(w, h), it(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) warped(x, y) = sample_clamped(second, x + u(x, y), y + v(x, y));
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      ix(x, y) = 0.25 * (clamped_at(first, x + 1, y) - clamped_at(first, x - 1, y) + clamped_at(warped, x + 1, y) -
                         clamped_at(warped, x - 1, y));
      iy(x, y) = 0.25 * (clamped_at(first, x, y + 1) - clamped_at(first, x, y - 1) + clamped_at(warped, x, y + 1) -
                         clamped_at(warped, x, y - 1));
      it(x, y) = warped(x, y) - first(x, y);
    }
  }
  const ImageGrid u0 = u, v0 = v;
  ImageGrid next_u(w, h), next_v(w, h);
  for (int k = 0; k < iterations; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double ub = 0.25 * (clamped_at(u, x - 1, y) + clamped_at(u, x + 1, y) + clamped_at(u, x, y - 1) +
                                  clamped_at(u, x, y + 1));
        const double vb = 0.25 * (clamped_at(v, x - 1, y) + clamped_at(v, x + 1, y) + clamped_at(v, x, y - 1) +
                                  clamped_at(v, x, y + 1));
        const double gx = ix(x, y), gy = iy(x, y);
        const double r = gx * (ub - u0(x, y)) + gy * (vb - v0(x, y)) + it(x, y);
        const double denom = alpha2 + gx * gx + gy * gy;
        next_u(x, y) = ub - gx * r / denom;
        next_v(x, y) = vb - gy * r / denom;
      }
    }
    std::swap(u, next_u);
    std::swap(v, next_v);
  }
}

template <typename T>
void append_le(std::vector<std::byte>& out, T value) {
  const auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
  out.insert(out.end(), bytes.begin(), bytes.end());
}

template <typename T>
T read_le(std::span<const std::byte> bytes, std::size_t offset, const char* what) {
  if (offset + sizeof(T) > bytes.size()) throw FormatError(std::string("truncated .flo file: missing ") + what, offset);
  std::array<std::byte, sizeof(T)> raw;
  std::memcpy(raw.data(), bytes.data() + offset, sizeof(T));
  return std::bit_cast<T>(raw);
}

}  // namespace

FlowField::FlowField(int width, int height)
    : du(width, height, 0.0), dv(width, height, 0.0), valid(width, height, 1) {}

FlowField estimate_flow(const ImageGrid& first, const ImageGrid& second, const FlowSettings& settings) {
  if (!first.same_shape(second)) throw InvalidArgument("estimate_flow: image shapes differ");
  if (settings.levels < 1) throw InvalidArgument("estimate_flow: levels must be >= 1");
  if (settings.iterations < 0) throw InvalidArgument("estimate_flow: iterations must be >= 0");
  if (settings.warps < 1) throw InvalidArgument("estimate_flow: warps must be >= 1");
  FlowField flow(first.width(), first.height());

  double lo = first[0], hi = first[0];
  for (std::size_t i = 0; i < first.size(); ++i) {
    lo = std::min({lo, first[i], second[i]});
    hi = std::max({hi, first[i], second[i]});
  }
  const double range = hi - lo;
  auto flat = [](const ImageGrid& g) {
    const auto [mn, mx] = std::minmax_element(g.values().begin(), g.values().end());
    return !(*mx - *mn > 1e-12);
  };
  if (!(range > 1e-12) || flat(first) || flat(second)) {
    flow.low_confidence = true;
    return flow;
  }

  // Work on range-normalized copies so the result is invariant to intensity gain.
  std::vector<ImageGrid> pyr1{first}, pyr2{second};
  for (auto* g : {&pyr1[0], &pyr2[0]}) {
    for (double& x : g->values()) x = (x - lo) / range;
  }
  for (int l = 1; l < settings.levels; ++l) {
    if (pyr1.back().width() < 2 * kMinLevelSize || pyr1.back().height() < 2 * kMinLevelSize) break;
    pyr1.push_back(downsample_image(pyr1.back()));
    pyr2.push_back(downsample_image(pyr2.back()));
  }

  const double alpha2 = settings.smoothness * settings.smoothness;
  ImageGrid u(pyr1.back().width(), pyr1.back().height(), 0.0), v = u;
  for (int l = static_cast<int>(pyr1.size()) - 1; l >= 0; --l) {
    const auto& a = pyr1[static_cast<std::size_t>(l)];
    if (u.width() != a.width() || u.height() != a.height()) {
      const double gain = static_cast<double>(a.width()) / u.width();
      u = upsample(u, a.width(), a.height(), gain);
      v = upsample(v, a.width(), a.height(), gain);
    }
    for (int k = 0; k < settings.warps; ++k) {
      horn_schunck_level(a, pyr2[static_cast<std::size_t>(l)], alpha2, settings.iterations, u, v);
    }
  }
  flow.du = std::move(u);
  flow.dv = std::move(v);
  return flow;
}

std::vector<std::byte> encode_flo(const FlowField& flow) {
  std::vector<std::byte> out;
  out.reserve(12 + flow.du.size() * 8);
  append_le(out, kFloMagic);
  append_le(out, static_cast<std::int32_t>(flow.width()));
  append_le(out, static_cast<std::int32_t>(flow.height()));
  for (std::size_t i = 0; i < flow.du.size(); ++i) {
    append_le(out, static_cast<float>(flow.du[i]));
    append_le(out, static_cast<float>(flow.dv[i]));
  }
  return out;
}

FlowField decode_flo(std::span<const std::byte> bytes) {
  const auto magic = read_le<float>(bytes, 0, "magic");
  if (magic != kFloMagic) throw FormatError("bad .flo magic", 0);
  const auto width = read_le<std::int32_t>(bytes, 4, "width");
  const auto height = read_le<std::int32_t>(bytes, 8, "height");
  if (width <= 0 || height <= 0 || width > (1 << 16) || height > (1 << 16)) {
    throw FormatError("implausible .flo dimensions", 4);
  }
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < 12 + n * 8) throw FormatError("truncated .flo payload", bytes.size());
  FlowField flow(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    const float du = read_le<float>(bytes, 12 + 8 * i, "du");
    const float dv = read_le<float>(bytes, 16 + 8 * i, "dv");
    flow.du[i] = du;
    flow.dv[i] = dv;
    // Middlebury marks unknown flow with huge magnitudes.
    flow.valid[i] = (std::isfinite(du) && std::isfinite(dv) && std::abs(du) < 1e9f && std::abs(dv) < 1e9f) ? 1 : 0;
  }
  return flow;
}

void export_flow(const std::filesystem::path& path, const FlowField& flow) {
  const auto bytes = encode_flo(flow);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FlowField import_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_flo(std::as_bytes(std::span<const char>(raw)));
}

DepthMap depth_from_flow(const FlowField& flow, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("depth_from_flow: epsilon must be positive");
  ImageGrid inv(flow.width(), flow.height(), 0.0);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    if (!flow.valid[i]) continue;
    inv[i] = std::max(std::hypot(flow.du[i], flow.dv[i]), epsilon);
    sum += inv[i];
    ++n;
  }
  if (n == 0) throw Error("depth_from_flow: no valid flow vectors; skip this frame pair");
  const double scale = static_cast<double>(n) / sum;
  for (double& v : inv.values()) v *= scale;
  return DepthMap(std::move(inv), flow.valid);
}

DepthMap edge_aware_refine(const DepthMap& depth, const ImageGrid& guide, const RefineSettings& settings) {
  if (!depth.inv_depth().same_shape(guide)) throw InvalidArgument("edge_aware_refine: shape mismatch");
  if (!(settings.spatial_sigma > 0.0 && settings.range_sigma > 0.0)) {
    throw InvalidArgument("edge_aware_refine: sigmas must be positive");
  }
  const int w = guide.width(), h = guide.height();
  const int radius = static_cast<int>(std::ceil(2.0 * settings.spatial_sigma));
  std::vector<double> spatial(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      spatial[static_cast<std::size_t>((dy + radius) * (2 * radius + 1) + dx + radius)] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * settings.spatial_sigma * settings.spatial_sigma));
    }
  }
  const double range_k = 1.0 / (2.0 * settings.range_sigma * settings.range_sigma);
  const Mask& valid = depth.valid();
  ImageGrid current = depth.inv_depth();
  ImageGrid next = current;
  for (int it = 0; it < settings.iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!valid(x, y)) continue;
        double sum = 0.0, wsum = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= w || !valid(xx, yy)) continue;
            const double dg = guide(xx, yy) - guide(x, y);
            const double wgt =
                spatial[static_cast<std::size_t>((dy + radius) * (2 * radius + 1) + dx + radius)] * std::exp(-dg * dg * range_k);
            sum += wgt * current(xx, yy);
            wsum += wgt;
          }
        }
        next(x, y) = sum / wsum;
      }
    }
    std::swap(current, next);
  }
  return DepthMap(std::move(current), valid);
}

}  // namespace evrecon
