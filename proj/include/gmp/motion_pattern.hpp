#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmp/common.hpp"
#include "gmp/image.hpp"
#include "gmp/parallel.hpp"

namespace gmp {

/// Pixelwise reduction across an image stack.
enum class Coalescer { Min, Mean, Max };

inline const char* coalescer_name(Coalescer c) {
  switch (c) {
    case Coalescer::Min: return "min";
    case Coalescer::Mean: return "mean";
    case Coalescer::Max: return "max";
  }
  return "?";
}

inline Coalescer coalescer_from_name(const std::string& name) {
  if (name == "min") return Coalescer::Min;
  if (name == "mean") return Coalescer::Mean;
  if (name == "max") return Coalescer::Max;
  throw std::invalid_argument("unknown coalescer: " + name);
}

/// Motion-pattern synthesis parameters.
///
/// Translations run at each angle in steps of `delta` pixels out to `extent`
/// pixels each side, giving a per-angle stack of 2*extent/delta + 1 images
/// (the identity translation included). Angles live in [0, 180) degrees;
/// theta and theta+180 generate identical stacks, so the half-open range
/// avoids double counting. Borders replicate: zero fill would inject darkness
/// that min coalescing propagates inward as false fluid.
struct GmpConfig {
  double delta = 1.0;    // step size, pixels
  double extent = 5.0;   // translation extent D, pixels
  std::vector<double> angles_deg = default_angles();
  int k_neighbors = 1;   // slices gathered on each side
  Coalescer inner_f = Coalescer::Min;  // only min is supported
  Coalescer outer_psi = Coalescer::Min;

  static std::vector<double> default_angles() {
    return {0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5};
  }

  int steps_per_side() const {
    return static_cast<int>(std::lround(extent / delta));
  }
  int stack_size() const { return 2 * steps_per_side() + 1; }

  void validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("GmpConfig: delta must be > 0");
    if (extent < 0.0) throw std::invalid_argument("GmpConfig: extent must be >= 0");
    if (angles_deg.empty()) throw std::invalid_argument("GmpConfig: no angles");
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
      double a = angles_deg[i];
      if (!(a >= 0.0 && a < 180.0))
        throw std::invalid_argument("GmpConfig: angle outside [0, 180)");
      for (std::size_t j = i + 1; j < angles_deg.size(); ++j)
        if (angles_deg[j] == a)
          throw std::invalid_argument("GmpConfig: duplicate angle");
    }
    if (k_neighbors < 0) throw std::invalid_argument("GmpConfig: k must be >= 0");
    if (inner_f != Coalescer::Min)
      throw std::invalid_argument("GmpConfig: inner coalescer must be min");
  }

  std::string canonical_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "delta=" << delta << ";extent=" << extent << ";angles=";
    for (std::size_t i = 0; i < angles_deg.size(); ++i)
      os << (i ? "," : "") << angles_deg[i];
    os << ";k=" << k_neighbors << ";f=" << coalescer_name(inner_f)
       << ";psi=" << coalescer_name(outer_psi) << ";border=replicate";
    return os.str();
  }

  std::uint64_t digest() const { return fnv1a64(canonical_string()); }
};

/// Samples img at (x - dx, y - dy) with bilinear interpolation and replicate
/// border. Integer offsets reproduce exact pixel shifts.
inline Image2D translate_image(const Image2D& img, double dx, double dy) {
  if (!std::isfinite(dx) || !std::isfinite(dy))
    throw std::invalid_argument("translate_image: non-finite offset");
  Image2D out(img.height, img.width);
  const int h = img.height, w = img.width;

  std::vector<int> x0(w), x1(w);
  std::vector<double> wx(w);
  for (int x = 0; x < w; ++x) {
    double sx = std::clamp(static_cast<double>(x) - dx, 0.0, double(w - 1));
    int ix = std::min(static_cast<int>(sx), w - 1);
    x0[x] = ix;
    x1[x] = std::min(ix + 1, w - 1);
    wx[x] = sx - ix;
  }
  for (int y = 0; y < h; ++y) {
    double sy = std::clamp(static_cast<double>(y) - dy, 0.0, double(h - 1));
    int iy = std::min(static_cast<int>(sy), h - 1);
    int y1 = std::min(iy + 1, h - 1);
    double wy = sy - iy;
    const double* r0 = img.row(iy);
    const double* r1 = img.row(y1);
    double* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      double top = r0[x0[x]] + wx[x] * (r0[x1[x]] - r0[x0[x]]);
      double bot = r1[x0[x]] + wx[x] * (r1[x1[x]] - r1[x0[x]]);
      dst[x] = top + wy * (bot - top);
    }
  }
  return out;
}

namespace detail {

/// acc <- min(acc, translate(src, dx, dy)) without materializing the shift.
inline void min_translated(const Image2D& src, double dx, double dy,
                           Image2D& acc) {
  const int h = src.height, w = src.width;

  // Integer offsets collapse to clamped row/column shifts.
  double rdx = std::round(dx), rdy = std::round(dy);
  if (dx == rdx && dy == rdy) {
    const int idx = static_cast<int>(rdx), idy = static_cast<int>(rdy);
    const int lo = std::clamp(idx, 0, w);
    const int hi = std::clamp(w + idx, 0, w);
    for (int y = 0; y < h; ++y) {
      const double* srow = src.row(std::clamp(y - idy, 0, h - 1));
      double* arow = acc.row(y);
      for (int x = 0; x < lo; ++x) arow[x] = std::min(arow[x], srow[0]);
      for (int x = lo; x < hi; ++x) arow[x] = std::min(arow[x], srow[x - idx]);
      for (int x = hi; x < w; ++x) arow[x] = std::min(arow[x], srow[w - 1]);
    }
    return;
  }

  std::vector<int> x0(w), x1(w);
  std::vector<double> wx(w);
  for (int x = 0; x < w; ++x) {
    double sx = std::clamp(static_cast<double>(x) - dx, 0.0, double(w - 1));
    int ix = std::min(static_cast<int>(sx), w - 1);
    x0[x] = ix;
    x1[x] = std::min(ix + 1, w - 1);
    wx[x] = sx - ix;
  }
  for (int y = 0; y < h; ++y) {
    double sy = std::clamp(static_cast<double>(y) - dy, 0.0, double(h - 1));
    int iy = std::min(static_cast<int>(sy), h - 1);
    int y1 = std::min(iy + 1, h - 1);
    double wy = sy - iy;
    const double* r0 = src.row(iy);
    const double* r1 = src.row(y1);
    double* arow = acc.row(y);
    for (int x = 0; x < w; ++x) {
      double top = r0[x0[x]] + wx[x] * (r0[x1[x]] - r0[x0[x]]);
      double bot = r1[x0[x]] + wx[x] * (r1[x1[x]] - r1[x0[x]]);
      double v = top + wy * (bot - top);
      if (v < arow[x]) arow[x] = v;
    }
  }
}

}  // namespace detail

/// One-angle GMP map: min over all translated copies of every slice in the
/// gathered stack, the identity translation (j = 0) included.
inline Image2D gmp_single_angle(const std::vector<const Image2D*>& slices,
                                double theta_deg, const GmpConfig& config) {
  config.validate();
  if (slices.empty())
    throw std::invalid_argument("gmp_single_angle: empty slice stack");

  const double theta = theta_deg * std::numbers::pi / 180.0;
  const double ux = std::cos(theta), uy = std::sin(theta);
  const int steps = config.steps_per_side();

  Image2D acc(slices.front()->height, slices.front()->width,
              std::numeric_limits<double>::infinity());
  for (const Image2D* slice : slices) {
    if (!slice->same_shape(acc))
      throw std::invalid_argument("gmp_single_angle: slice shape mismatch");
    for (int j = -steps; j <= steps; ++j) {
      const double t = j * config.delta;
      detail::min_translated(*slice, t * ux, t * uy, acc);
    }
  }
  return acc;
}

/// The per-angle GMP images for one slice, plus provenance.
struct GmpEnsemble {
  std::vector<Image2D> per_angle;  // order matches config.angles_deg
  int slice_index = 0;
  std::uint64_t config_digest = 0;
};

/// Gathers slices [slice_index - k, slice_index + k] (indices clamped at the
/// volume ends so the stack size stays uniform) and synthesizes one GMP image
/// per configured angle.
inline GmpEnsemble build_ensemble(const Volume& volume, int slice_index,
                                  const GmpConfig& config) {
  config.validate();
  if (slice_index < 0 || slice_index >= volume.depth())
    throw std::invalid_argument("build_ensemble: invalid slice index");

  std::vector<const Image2D*> stack;
  stack.reserve(2 * config.k_neighbors + 1);
  for (int d = -config.k_neighbors; d <= config.k_neighbors; ++d) {
    int i = std::clamp(slice_index + d, 0, volume.depth() - 1);
    stack.push_back(&volume.slices[i]);
  }

  GmpEnsemble ens;
  ens.slice_index = slice_index;
  ens.config_digest = config.digest();
  ens.per_angle.reserve(config.angles_deg.size());
  for (double theta : config.angles_deg)
    ens.per_angle.push_back(gmp_single_angle(stack, theta, config));
  return ens;
}

/// Pixelwise psi across the K per-angle images (Mean sums in angle order).
inline Image2D coalesce_ensemble(const GmpEnsemble& ensemble, Coalescer psi) {
  if (ensemble.per_angle.empty())
    throw std::invalid_argument("coalesce_ensemble: empty ensemble");
  Image2D out = ensemble.per_angle.front();
  const std::size_t n = out.pixel_count();
  for (std::size_t k = 1; k < ensemble.per_angle.size(); ++k) {
    const auto& src = ensemble.per_angle[k].data;
    switch (psi) {
      case Coalescer::Min:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = std::min(out.data[i], src[i]);
        break;
      case Coalescer::Max:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = std::max(out.data[i], src[i]);
        break;
      case Coalescer::Mean:
        for (std::size_t i = 0; i < n; ++i) out.data[i] += src[i];
        break;
    }
  }
  if (psi == Coalescer::Mean) {
    const double inv = 1.0 / static_cast<double>(ensemble.per_angle.size());
    for (auto& v : out.data) v *= inv;
  }
  return out;
}

/// Applies build_ensemble + coalesce_ensemble to every slice. Each slice is an
/// independent task writing a disjoint output image, and per-pixel reduction
/// order is fixed by the config, so the result does not depend on the number
/// of worker threads.
inline Volume enhance_volume(const Volume& volume, const GmpConfig& config,
                             Coalescer psi, int threads = 0) {
  config.validate();
  validate_volume(volume, "enhance_volume input");

  Volume out;
  out.meta = volume.meta;
  out.slices.resize(volume.slices.size());
  parallel_for(0, volume.depth(), resolve_thread_count(threads), [&](int i) {
    out.slices[i] = coalesce_ensemble(build_ensemble(volume, i, config), psi);
  });
  return out;
}

inline Volume enhance_volume(const Volume& volume, const GmpConfig& config,
                             int threads = 0) {
  return enhance_volume(volume, config, config.outer_psi, threads);
}

}  // namespace gmp
