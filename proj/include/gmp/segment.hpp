#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmp/image.hpp"
#include "gmp/roi.hpp"

namespace gmp {

/// Binary per-slice mask volume plus the ROI placement needed to map mask
/// coordinates back into the original volume.
struct SegmentationMask {
  std::vector<MaskImage> slices;
  RoiRecord roi;

  int depth() const { return static_cast<int>(slices.size()); }
  int height() const { return slices.empty() ? 0 : slices.front().height; }
  int width() const { return slices.empty() ? 0 : slices.front().width; }
  std::size_t foreground_count() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += s.foreground_count();
    return n;
  }
};

/// Per-region statistics consumed by the post-processing filters.
struct Component {
  int label = 0;
  long long pixel_count = 0;
  int slice_index = 0;
  double mean_source_intensity = 0.0;
  int bbox_row = 0, bbox_col = 0, bbox_h = 0, bbox_w = 0;
};

/// Dark fluid should score high: returns 1 - enhanced so classical maps and
/// network-produced probability maps feed the same thresholding path.
inline Volume fluid_score_map(const Volume& enhanced) {
  Volume out = enhanced;
  for (auto& s : out.slices)
    for (auto& v : s.data) v = 1.0 - v;
  return out;
}

/// Otsu threshold from a 256-bin histogram over the whole volume. Returns the
/// value separating the two classes (pixels strictly above are foreground).
inline double otsu_threshold(const Volume& score) {
  std::array<long long, 256> hist{};
  long long total = 0;
  for (const auto& s : score.slices)
    for (double v : s.data) {
      int b = std::clamp(static_cast<int>(v * 256.0), 0, 255);
      ++hist[b];
      ++total;
    }
  if (total == 0) throw std::invalid_argument("otsu_threshold: empty volume");

  double sum_all = 0.0;
  for (int b = 0; b < 256; ++b) sum_all += static_cast<double>(b) * hist[b];

  double best_var = -1.0;
  int best_bin = 0;
  long long w0 = 0;
  double sum0 = 0.0;
  for (int b = 0; b < 256; ++b) {
    w0 += hist[b];
    if (w0 == 0) continue;
    long long w1 = total - w0;
    if (w1 == 0) break;
    sum0 += static_cast<double>(b) * hist[b];
    double m0 = sum0 / w0;
    double m1 = (sum_all - sum0) / w1;
    double between = static_cast<double>(w0) * static_cast<double>(w1) * (m0 - m1) * (m0 - m1);
    if (between > best_var) {
      best_var = between;
      best_bin = b;
    }
  }
  return (best_bin + 1) / 256.0;
}

/// Pixel = 1 iff score > t (strict, so t = 1.0 yields an empty mask).
inline SegmentationMask threshold_map(const Volume& score, double t,
                                      const RoiRecord& roi = RoiRecord{}) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("threshold_map: t outside [0,1]");
  SegmentationMask mask;
  mask.roi = roi;
  mask.slices.reserve(score.slices.size());
  for (const auto& s : score.slices) {
    MaskImage m(s.height, s.width);
    for (std::size_t i = 0; i < s.data.size(); ++i)
      m.data[i] = s.data[i] > t ? 1 : 0;
    mask.slices.push_back(std::move(m));
  }
  return mask;
}

/// Connected-component labeling output: the components plus the per-pixel
/// label image (0 = background) used to rebuild masks after filtering.
struct ComponentAnalysis {
  std::vector<Component> components;
  std::vector<std::int32_t> labels;  // row-major, same shape as the mask slice
};

/// 8-connectivity labeling by breadth-first flood fill. Labels are assigned
/// in order of the first-encountered pixel in a row-major scan, starting at 1.
/// mean_source_intensity is measured on the supplied source slice.
inline ComponentAnalysis analyze_components(const MaskImage& mask,
                                            const Image2D& source,
                                            int slice_index = 0) {
  if (mask.height != source.height || mask.width != source.width)
    throw std::invalid_argument("analyze_components: source shape mismatch");
  const int h = mask.height, w = mask.width;
  ComponentAnalysis out;
  out.labels.assign(static_cast<std::size_t>(h) * w, 0);

  std::vector<std::pair<int, int>> queue;
  int next_label = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::size_t start = static_cast<std::size_t>(r) * w + c;
      if (!mask.data[start] || out.labels[start] != 0) continue;
      ++next_label;
      Component comp;
      comp.label = next_label;
      comp.slice_index = slice_index;
      int rmin = r, rmax = r, cmin = c, cmax = c;
      double intensity_sum = 0.0;

      queue.clear();
      queue.emplace_back(r, c);
      out.labels[start] = next_label;
      std::size_t head = 0;
      while (head < queue.size()) {
        auto [cr, cc] = queue[head++];
        ++comp.pixel_count;
        intensity_sum += source.at(cr, cc);
        rmin = std::min(rmin, cr); rmax = std::max(rmax, cr);
        cmin = std::min(cmin, cc); cmax = std::max(cmax, cc);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            int nr = cr + dr, nc = cc + dc;
            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
            std::size_t ni = static_cast<std::size_t>(nr) * w + nc;
            if (mask.data[ni] && out.labels[ni] == 0) {
              out.labels[ni] = next_label;
              queue.emplace_back(nr, nc);
            }
          }
      }
      comp.mean_source_intensity = intensity_sum / comp.pixel_count;
      comp.bbox_row = rmin;
      comp.bbox_col = cmin;
      comp.bbox_h = rmax - rmin + 1;
      comp.bbox_w = cmax - cmin + 1;
      out.components.push_back(comp);
    }
  return out;
}

inline std::vector<Component> connected_components(const MaskImage& mask,
                                                   const Image2D& source,
                                                   int slice_index = 0) {
  return analyze_components(mask, source, slice_index).components;
}

/// Keeps components with pixel_count >= min_area.
inline std::vector<Component> filter_small_components(
    const std::vector<Component>& components, long long min_area) {
  if (min_area < 0)
    throw std::invalid_argument("filter_small_components: negative min_area");
  std::vector<Component> kept;
  for (const auto& c : components)
    if (c.pixel_count >= min_area) kept.push_back(c);
  return kept;
}

/// Deterministic 1D 2-means: centers start at the min and max values, points
/// tie toward the lower center, at most 100 sweeps.
///
/// Returns per-value cluster assignment (0 = lower center). When fewer than
/// two distinct values exist the partition is degenerate and `split` is false.
struct TwoMeans {
  std::vector<int> assignment;
  double center_low = 0.0;
  double center_high = 0.0;
  bool split = false;
};

inline TwoMeans two_means_1d(const std::vector<double>& values) {
  TwoMeans result;
  result.assignment.assign(values.size(), 0);
  if (values.empty()) return result;
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    result.center_low = result.center_high = lo;
    return result;
  }
  result.split = true;
  double c0 = lo, c1 = hi;
  for (int iter = 0; iter < 100; ++iter) {
    double sum0 = 0.0, sum1 = 0.0;
    long long n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double d0 = std::fabs(values[i] - c0);
      double d1 = std::fabs(values[i] - c1);
      int a = d0 <= d1 ? 0 : 1;  // ties to the lower center
      result.assignment[i] = a;
      if (a == 0) { sum0 += values[i]; ++n0; } else { sum1 += values[i]; ++n1; }
    }
    double nc0 = n0 ? sum0 / n0 : c0;
    double nc1 = n1 ? sum1 / n1 : c1;
    if (nc0 == c0 && nc1 == c1) break;
    c0 = nc0;
    c1 = nc1;
  }
  result.center_low = c0;
  result.center_high = c1;
  return result;
}

/// Clusters components by mean source intensity and retains the darker
/// cluster. With fewer than two distinct intensities every component is kept.
inline std::vector<Component> intensity_cluster_filter(
    const std::vector<Component>& components) {
  if (components.empty())
    throw std::invalid_argument("intensity_cluster_filter: no components");
  std::vector<double> values;
  values.reserve(components.size());
  for (const auto& c : components) values.push_back(c.mean_source_intensity);
  TwoMeans km = two_means_1d(values);
  if (!km.split) return components;
  std::vector<Component> kept;
  for (std::size_t i = 0; i < components.size(); ++i)
    if (km.assignment[i] == 0) kept.push_back(components[i]);
  return kept;
}

struct SegmentParams {
  bool input_is_probability = false;  // skip the 1-x complement
  bool use_otsu = false;
  double threshold = 0.5;
  long long min_area = 10;
  bool cluster_filter = true;
};

/// One component with its post-processing verdict, for inspection output.
struct ComponentVerdict {
  Component component;
  bool kept_by_size = false;
  bool kept_by_cluster = false;
};

struct SegmentOutcome {
  SegmentationMask mask;
  std::vector<ComponentVerdict> components;
  double threshold_used = 0.0;
};

/// Full post-processing chain: score map (unless the input already is a
/// probability map) -> threshold -> per-slice components -> size filter ->
/// volume-wide intensity clustering -> mask reassembly. Every stage only
/// removes pixels from the thresholded mask.
inline SegmentOutcome segment_volume_detailed(const Volume& map,
                                              const Volume& source,
                                              const SegmentParams& params,
                                              const RoiRecord& roi = RoiRecord{}) {
  if (map.depth() != source.depth() || map.height() != source.height() ||
      map.width() != source.width())
    throw std::invalid_argument("segment_volume: map/source dimension mismatch");

  Volume score = params.input_is_probability ? map : fluid_score_map(map);
  const double t = params.use_otsu ? otsu_threshold(score) : params.threshold;
  SegmentationMask thresholded = threshold_map(score, t, roi);

  // Per-slice labeling; component identity is (slice, label).
  std::vector<ComponentAnalysis> per_slice;
  per_slice.reserve(thresholded.slices.size());
  std::vector<Component> all;
  for (int s = 0; s < thresholded.depth(); ++s) {
    per_slice.push_back(
        analyze_components(thresholded.slices[s], source.slices[s], s));
    for (const auto& c : per_slice.back().components) all.push_back(c);
  }

  std::vector<Component> sized = filter_small_components(all, params.min_area);
  std::vector<Component> final_set;
  if (!params.cluster_filter || sized.empty())
    final_set = sized;
  else
    final_set = intensity_cluster_filter(sized);

  auto key = [](const Component& c) {
    return (static_cast<long long>(c.slice_index) << 32) | static_cast<unsigned>(c.label);
  };
  std::vector<long long> sized_keys, final_keys;
  for (const auto& c : sized) sized_keys.push_back(key(c));
  for (const auto& c : final_set) final_keys.push_back(key(c));
  std::sort(sized_keys.begin(), sized_keys.end());
  std::sort(final_keys.begin(), final_keys.end());
  auto contains = [](const std::vector<long long>& v, long long k) {
    return std::binary_search(v.begin(), v.end(), k);
  };

  SegmentOutcome outcome;
  outcome.threshold_used = t;
  outcome.mask.roi = roi;
  outcome.mask.slices.assign(thresholded.depth(),
                             MaskImage(thresholded.height(), thresholded.width()));
  for (int s = 0; s < thresholded.depth(); ++s) {
    const auto& analysis = per_slice[s];
    std::vector<std::uint8_t> keep(analysis.components.size() + 1, 0);
    for (const auto& c : analysis.components)
      if (contains(final_keys, key(c))) keep[c.label] = 1;
    auto& dst = outcome.mask.slices[s].data;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      std::int32_t lab = analysis.labels[i];
      dst[i] = lab > 0 && keep[lab] ? 1 : 0;
    }
    for (const auto& c : analysis.components) {
      ComponentVerdict v;
      v.component = c;
      v.kept_by_size = contains(sized_keys, key(c));
      v.kept_by_cluster = contains(final_keys, key(c));
      outcome.components.push_back(v);
    }
  }
  return outcome;
}

inline SegmentationMask segment_volume(const Volume& map, const Volume& source,
                                       const SegmentParams& params,
                                       const RoiRecord& roi = RoiRecord{}) {
  return segment_volume_detailed(map, source, params, roi).mask;
}

/// Maps an ROI-space mask back onto the source grid the RoiRecord refers to.
/// Pixels outside the ROI band are background.
inline SegmentationMask mask_to_source_space(const SegmentationMask& mask) {
  const RoiRecord& roi = mask.roi;
  if (roi.source_height <= 0 || roi.source_width <= 0) return mask;
  SegmentationMask out;
  out.roi = RoiRecord{0, roi.source_height, roi.source_width,
                      roi.source_height, roi.source_width};
  out.slices.assign(mask.slices.size(),
                    MaskImage(roi.source_height, roi.source_width));
  const int c0 = roi.col_offset();
  for (std::size_t s = 0; s < mask.slices.size(); ++s)
    for (int r = 0; r < roi.roi_height; ++r)
      for (int c = 0; c < roi.roi_width; ++c)
        out.slices[s].at(roi.row_offset + r, c0 + c) = mask.slices[s].at(r, c);
  return out;
}

/// Nearest-neighbor resample of a mask between grid sizes (used to undo the
/// standardization resize before scoring against ground truth).
inline SegmentationMask resize_mask_nearest(const SegmentationMask& mask,
                                            int target_h, int target_w) {
  SegmentationMask out;
  out.roi = RoiRecord{0, target_h, target_w, target_h, target_w};
  out.slices.reserve(mask.slices.size());
  for (const auto& s : mask.slices) {
    MaskImage m(target_h, target_w);
    for (int r = 0; r < target_h; ++r) {
      int sr = target_h > 1
                   ? static_cast<int>(std::lround(double(r) * (s.height - 1) / (target_h - 1)))
                   : 0;
      for (int c = 0; c < target_w; ++c) {
        int sc = target_w > 1
                     ? static_cast<int>(std::lround(double(c) * (s.width - 1) / (target_w - 1)))
                     : 0;
        m.at(r, c) = s.at(sr, sc);
      }
    }
    out.slices.push_back(std::move(m));
  }
  return out;
}

}  // namespace gmp
