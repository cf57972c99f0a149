#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmp/common.hpp"
#include "gmp/image.hpp"

namespace gmp {

struct DetectParams {
  double threshold = 0.5;     // pixel threshold feeding slice_score
  int k = 1;                  // neighbor slices each side
  double score_floor = 0.02;  // slice score needed to raise a raw flag
  double grad_floor = 0.01;   // |gradient| needed to raise a raw flag
  int min_run = 2;            // consecutive flagged slices for volume presence

  void validate() const {
    if (k < 0) throw std::invalid_argument("DetectParams: k must be >= 0");
    if (min_run < 1) throw std::invalid_argument("DetectParams: min_run must be >= 1");
  }

  std::string canonical_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "threshold=" << threshold << ";k=" << k << ";score_floor=" << score_floor
       << ";grad_floor=" << grad_floor << ";min_run=" << min_run;
    return os.str();
  }
  std::uint64_t digest() const { return fnv1a64(canonical_string()); }
};

/// Fraction of pixels with value strictly above t.
inline double slice_score(const Image2D& map_slice, double t) {
  long long n = 0;
  for (double v : map_slice.data)
    if (v > t) ++n;
  return static_cast<double>(n) / static_cast<double>(map_slice.pixel_count());
}

/// Central differences in the interior, one-sided at the ends.
inline std::vector<double> score_gradient(const std::vector<double>& scores) {
  const int n = static_cast<int>(scores.size());
  if (n < 2) throw std::invalid_argument("score_gradient: fewer than 2 slices");
  std::vector<double> g(n);
  g[0] = scores[1] - scores[0];
  g[n - 1] = scores[n - 1] - scores[n - 2];
  for (int i = 1; i < n - 1; ++i) g[i] = (scores[i + 1] - scores[i - 1]) / 2.0;
  return g;
}

/// Volume-level verdict derived from per-slice scores.
struct DetectionReport {
  std::vector<double> slice_scores;
  std::vector<std::uint8_t> slice_flags;
  double volume_score = 0.0;
  bool volume_present = false;
  std::uint64_t params_digest = 0;
};

/// Flags a slice when its score exceeds score_floor or its score gradient
/// magnitude exceeds grad_floor, smooths flags by majority vote over a
/// (2k+1) window (slices beyond the ends count as unflagged, so appending
/// quiet slices never rewrites existing flags), and requires a run of at
/// least min_run flagged slices for volume presence. volume_score is the
/// maximum windowed mean score, a convex combination of slice scores.
inline DetectionReport detect_volume(const std::vector<double>& scores,
                                     const DetectParams& params) {
  params.validate();
  const int n = static_cast<int>(scores.size());
  DetectionReport report;
  report.params_digest = params.digest();
  report.slice_scores = scores;
  report.slice_flags.assign(n, 0);
  if (n == 0) return report;

  std::vector<double> grad;
  if (n >= 2) grad = score_gradient(scores);
  std::vector<std::uint8_t> raw(n, 0);
  for (int i = 0; i < n; ++i) {
    bool flag = scores[i] > params.score_floor;
    if (!flag && n >= 2 && std::fabs(grad[i]) > params.grad_floor) flag = true;
    raw[i] = flag ? 1 : 0;
  }

  const int window = 2 * params.k + 1;
  for (int i = 0; i < n; ++i) {
    int votes = 0;
    for (int d = -params.k; d <= params.k; ++d) {
      int j = i + d;
      if (j >= 0 && j < n) votes += raw[j];
    }
    report.slice_flags[i] = (2 * votes > window) ? 1 : 0;
  }

  int run = 0, best_run = 0;
  for (int i = 0; i < n; ++i) {
    run = report.slice_flags[i] ? run + 1 : 0;
    best_run = std::max(best_run, run);
  }
  report.volume_present = best_run >= params.min_run;

  double best_mean = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    int count = 0;
    for (int d = -params.k; d <= params.k; ++d) {
      int j = i + d;
      if (j >= 0 && j < n) {
        sum += scores[j];
        ++count;
      }
    }
    best_mean = std::max(best_mean, sum / count);
  }
  report.volume_score = best_mean;
  return report;
}

/// Scores every slice of a map volume and runs the volume-level rules.
inline DetectionReport detect_map_volume(const Volume& map,
                                         const DetectParams& params) {
  std::vector<double> scores;
  scores.reserve(map.slices.size());
  for (const auto& s : map.slices) scores.push_back(slice_score(s, params.threshold));
  return detect_volume(scores, params);
}

}  // namespace gmp
