#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmp {

/// Row-major 2D grayscale image with real-valued pixels.
struct Image2D {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image2D() = default;
  Image2D(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
    if (h < 1 || w < 1)
      throw std::invalid_argument("Image2D: dimensions must be >= 1");
  }

  double& at(int r, int c) {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  const double* row(int r) const {
    return data.data() + static_cast<std::size_t>(r) * width;
  }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * width; }
  std::size_t pixel_count() const { return data.size(); }
  bool same_shape(const Image2D& o) const {
    return height == o.height && width == o.width;
  }
};

/// Binary per-slice grid, values in {0, 1}.
struct MaskImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  MaskImage() = default;
  MaskImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int r, int c) {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  std::uint8_t at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  std::size_t foreground_count() const {
    std::size_t n = 0;
    for (auto v : data) n += v;
    return n;
  }
};

/// Ordered stack of equally sized slices; pixel values in [0, 1].
struct Volume {
  std::vector<Image2D> slices;
  std::string meta;

  int depth() const { return static_cast<int>(slices.size()); }
  int height() const { return slices.empty() ? 0 : slices.front().height; }
  int width() const { return slices.empty() ? 0 : slices.front().width; }
};

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
};

inline ValueRange image_range(const Image2D& img) {
  ValueRange r{std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity()};
  for (double v : img.data) {
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  return r;
}

inline double image_mean(const Image2D& img) {
  double s = 0.0;
  for (double v : img.data) s += v;
  return s / static_cast<double>(img.pixel_count());
}

inline void validate_image(const Image2D& img, const char* what = "image") {
  if (img.height < 1 || img.width < 1 ||
      img.data.size() != static_cast<std::size_t>(img.height) * img.width)
    throw std::invalid_argument(std::string(what) + ": inconsistent dimensions");
  for (double v : img.data)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": non-finite pixel");
}

/// Checks the Volume invariants: >= 1 slice, uniform dimensions, values in [0,1].
inline void validate_volume(const Volume& vol, const char* what = "volume") {
  if (vol.slices.empty())
    throw std::invalid_argument(std::string(what) + ": no slices");
  const int h = vol.height();
  const int w = vol.width();
  for (const auto& s : vol.slices) {
    if (s.height != h || s.width != w)
      throw std::invalid_argument(std::string(what) +
                                  ": slice dimension mismatch");
    for (double v : s.data)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument(std::string(what) +
                                    ": pixel outside [0,1]");
  }
}

/// Bilinear resize with corner-aligned sampling. Output stays inside the
/// input's value range (bilinear weights are convex).
inline Image2D resize_slice(const Image2D& img, int target_h, int target_w) {
  if (target_h < 2 || target_w < 2)
    throw std::invalid_argument("resize_slice: target dimensions must be >= 2");
  if (img.height == target_h && img.width == target_w) return img;

  Image2D out(target_h, target_w);
  const double sy = target_h > 1 ? double(img.height - 1) / (target_h - 1) : 0.0;
  const double sx = target_w > 1 ? double(img.width - 1) / (target_w - 1) : 0.0;

  std::vector<int> x0(target_w), x1(target_w);
  std::vector<double> wx(target_w);
  for (int x = 0; x < target_w; ++x) {
    double fx = x * sx;
    int ix = std::min(static_cast<int>(fx), img.width - 1);
    x0[x] = ix;
    x1[x] = std::min(ix + 1, img.width - 1);
    wx[x] = fx - ix;
  }
  for (int y = 0; y < target_h; ++y) {
    double fy = y * sy;
    int iy = std::min(static_cast<int>(fy), img.height - 1);
    int y1 = std::min(iy + 1, img.height - 1);
    double wy = fy - iy;
    const double* r0 = img.row(iy);
    const double* r1 = img.row(y1);
    double* dst = out.row(y);
    for (int x = 0; x < target_w; ++x) {
      double top = r0[x0[x]] + wx[x] * (r0[x1[x]] - r0[x0[x]]);
      double bot = r1[x0[x]] + wx[x] * (r1[x1[x]] - r1[x0[x]]);
      dst[x] = top + wy * (bot - top);
    }
  }
  return out;
}

inline Volume resize_volume(const Volume& vol, int target_h, int target_w) {
  Volume out;
  out.meta = vol.meta;
  out.slices.reserve(vol.slices.size());
  for (const auto& s : vol.slices) out.slices.push_back(resize_slice(s, target_h, target_w));
  return out;
}

/// Rescales the volume so min -> 0 and max -> 1. A constant volume maps to 0.
inline Volume minmax_normalize(const Volume& vol) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : vol.slices) {
    auto r = image_range(s);
    lo = std::min(lo, r.lo);
    hi = std::max(hi, r.hi);
  }
  Volume out = vol;
  const double span = hi - lo;
  for (auto& s : out.slices)
    for (auto& v : s.data) v = span > 0.0 ? (v - lo) / span : 0.0;
  return out;
}

}  // namespace gmp
