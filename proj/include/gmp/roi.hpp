#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmp/image.hpp"

namespace gmp {

/// Histogram over row indices of per-column brightest pixels, pooled across
/// the volume.
struct RowProfile {
  std::vector<double> counts;  // length = volume height
  long long total = 0;         // contributing columns (= depth * width)
};

enum class ProfileMode { Argmax, RowMean };

/// For every column of every slice, the row index of the maximum pixel value
/// increments counts. Ties go to the smallest row index.
inline RowProfile brightest_row_profile(const Volume& vol) {
  if (vol.slices.empty())
    throw std::invalid_argument("brightest_row_profile: empty volume");
  const int h = vol.height();
  const int w = vol.width();
  RowProfile profile;
  profile.counts.assign(h, 0.0);
  for (const auto& slice : vol.slices) {
    for (int c = 0; c < w; ++c) {
      int best_row = 0;
      double best = slice.at(0, c);
      for (int r = 1; r < h; ++r) {
        double v = slice.at(r, c);
        if (v > best) {
          best = v;
          best_row = r;
        }
      }
      profile.counts[best_row] += 1.0;
    }
    profile.total += w;
  }
  return profile;
}

/// Alternative profile: mean intensity per row, pooled across the volume.
/// Total is kept at depth*width so both modes feed the same fitter.
inline RowProfile row_mean_profile(const Volume& vol) {
  if (vol.slices.empty())
    throw std::invalid_argument("row_mean_profile: empty volume");
  const int h = vol.height();
  const int w = vol.width();
  RowProfile profile;
  profile.counts.assign(h, 0.0);
  for (const auto& slice : vol.slices)
    for (int r = 0; r < h; ++r) {
      double s = 0.0;
      const double* row = slice.row(r);
      for (int c = 0; c < w; ++c) s += row[c];
      profile.counts[r] += s;
    }
  profile.total = static_cast<long long>(vol.slices.size()) * w;
  return profile;
}

inline RowProfile make_profile(const Volume& vol, ProfileMode mode) {
  return mode == ProfileMode::Argmax ? brightest_row_profile(vol)
                                     : row_mean_profile(vol);
}

/// 1D Gaussian model A*exp(-(x-mean)^2 / (2 sigma^2)) fitted to a RowProfile.
struct GaussianFit {
  double mean = 0.0;
  double sigma = 1.0;
  double amplitude = 0.0;
  double residual = 0.0;    // sum of squared residuals
  bool used_fallback = false;  // true when refinement never improved on moments
};

namespace detail {

inline constexpr double kSigmaFloor = 0.5;

inline double gaussian_residual(const std::vector<double>& counts, double a,
                                double mu, double sigma) {
  double ss = 0.0;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double d = static_cast<double>(i) - mu;
    double r = a * std::exp(-d * d * inv2s2) - counts[i];
    ss += r * r;
  }
  return ss;
}

}  // namespace detail

/// Fits the Gaussian by moment initialization followed by damped Gauss-Newton
/// refinement (at most 50 iterations). If no refinement step improves the
/// residual the moment estimate is returned with used_fallback set, so the
/// final residual never exceeds the moment residual.
inline GaussianFit fit_gaussian_1d(const RowProfile& profile) {
  const auto& c = profile.counts;
  const int n = static_cast<int>(c.size());
  double mass = 0.0;
  for (double v : c) mass += v;
  if (n == 0 || mass <= 0.0)
    throw std::invalid_argument("fit_gaussian_1d: all-zero profile");

  double mu = 0.0;
  for (int i = 0; i < n; ++i) mu += i * c[i];
  mu /= mass;
  double var = 0.0;
  for (int i = 0; i < n; ++i) var += c[i] * (i - mu) * (i - mu);
  var /= mass;
  double sigma = std::max(std::sqrt(var), detail::kSigmaFloor);
  double amp = *std::max_element(c.begin(), c.end());

  GaussianFit fit;
  fit.mean = mu;
  fit.sigma = sigma;
  fit.amplitude = amp;
  fit.residual = detail::gaussian_residual(c, amp, mu, sigma);
  fit.used_fallback = true;

  double a = amp, m = mu, s = sigma;
  double best = fit.residual;
  for (int iter = 0; iter < 50; ++iter) {
    // Normal equations for the 3-parameter Gauss-Newton step.
    double jtj[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double jtr[3] = {0, 0, 0};
    const double inv2s2 = 1.0 / (2.0 * s * s);
    for (int i = 0; i < n; ++i) {
      double d = i - m;
      double e = std::exp(-d * d * inv2s2);
      double r = a * e - c[i];
      double j0 = e;
      double j1 = a * e * d / (s * s);
      double j2 = a * e * d * d / (s * s * s);
      double j[3] = {j0, j1, j2};
      for (int p = 0; p < 3; ++p) {
        jtr[p] += j[p] * r;
        for (int q = 0; q < 3; ++q) jtj[p][q] += j[p] * j[q];
      }
    }
    // Solve jtj * delta = -jtr by Cramer's rule; bail out when singular.
    double det = jtj[0][0] * (jtj[1][1] * jtj[2][2] - jtj[1][2] * jtj[2][1]) -
                 jtj[0][1] * (jtj[1][0] * jtj[2][2] - jtj[1][2] * jtj[2][0]) +
                 jtj[0][2] * (jtj[1][0] * jtj[2][1] - jtj[1][1] * jtj[2][0]);
    if (!(std::fabs(det) > 1e-30)) break;
    auto solve3 = [&](int col) {
      double m3[3][3];
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) m3[p][q] = jtj[p][q];
      for (int p = 0; p < 3; ++p) m3[p][col] = -jtr[p];
      return (m3[0][0] * (m3[1][1] * m3[2][2] - m3[1][2] * m3[2][1]) -
              m3[0][1] * (m3[1][0] * m3[2][2] - m3[1][2] * m3[2][0]) +
              m3[0][2] * (m3[1][0] * m3[2][1] - m3[1][1] * m3[2][0])) /
             det;
    };
    double da = solve3(0), dm = solve3(1), ds = solve3(2);

    // Backtracking keeps the residual monotone.
    double scale = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 10; ++bt, scale *= 0.5) {
      double na = a + scale * da;
      double nm = m + scale * dm;
      double ns = std::max(s + scale * ds, detail::kSigmaFloor);
      if (!(na > 0.0) || nm < 0.0 || nm > n - 1) continue;
      double res = detail::gaussian_residual(c, na, nm, ns);
      if (res < best) {
        a = na;
        m = nm;
        s = ns;
        best = res;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    fit.mean = m;
    fit.sigma = s;
    fit.amplitude = a;
    fit.residual = best;
    fit.used_fallback = false;
    if (best <= 1e-14 * mass) break;
  }
  return fit;
}

/// Crop bookkeeping for mapping ROI coordinates back to the source volume.
struct RoiRecord {
  int row_offset = 0;
  int roi_height = 0;
  int roi_width = 0;
  int source_height = 0;
  int source_width = 0;

  int col_offset() const { return (source_width - roi_width) / 2; }
};

/// Crops a roi_height band of rows centered at round(fit.mean), clamped so the
/// band lies fully inside the volume; columns are center-cropped.
inline std::pair<Volume, RoiRecord> extract_roi(const Volume& vol,
                                                const GaussianFit& fit,
                                                int roi_height, int roi_width) {
  const int h = vol.height();
  const int w = vol.width();
  if (roi_height > h || roi_width > w || roi_height < 1 || roi_width < 1)
    throw std::invalid_argument("extract_roi: ROI larger than volume");

  int r0 = static_cast<int>(std::lround(fit.mean)) - roi_height / 2;
  r0 = std::clamp(r0, 0, h - roi_height);
  const int c0 = (w - roi_width) / 2;

  RoiRecord rec;
  rec.row_offset = r0;
  rec.roi_height = roi_height;
  rec.roi_width = roi_width;
  rec.source_height = h;
  rec.source_width = w;

  Volume out;
  out.meta = vol.meta;
  out.slices.reserve(vol.slices.size());
  for (const auto& slice : vol.slices) {
    Image2D crop(roi_height, roi_width);
    for (int r = 0; r < roi_height; ++r) {
      const double* src = slice.row(r0 + r) + c0;
      std::copy(src, src + roi_width, crop.row(r));
    }
    out.slices.push_back(std::move(crop));
  }
  return {std::move(out), rec};
}

}  // namespace gmp
