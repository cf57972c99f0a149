#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmp/segment.hpp"

namespace gmp {

/// Dice coefficient 2|A∩B| / (|A|+|B|) over the whole volume.
/// Two empty masks are a perfect match (1.0).
inline double dice(const SegmentationMask& a, const SegmentationMask& b) {
  if (a.depth() != b.depth() || a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("dice: dimension mismatch");
  long long inter = 0, size_a = 0, size_b = 0;
  for (int s = 0; s < a.depth(); ++s) {
    const auto& da = a.slices[s].data;
    const auto& db = b.slices[s].data;
    for (std::size_t i = 0; i < da.size(); ++i) {
      size_a += da[i];
      size_b += db[i];
      inter += da[i] & db[i];
    }
  }
  if (size_a + size_b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(size_a + size_b);
}

/// ROC AUC by the rank-statistic (Mann-Whitney) formulation: tied scores get
/// average ranks, which credits 0.5 per tied positive-negative pair.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: size mismatch");
  long long n_pos = 0, n_neg = 0;
  for (auto l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc_auc: need at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  return (rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct VolumeResult {
  std::string id;
  std::string group;
  double dice = 0.0;
  bool label = false;          // ground-truth fluid presence
  double detection_score = 0.0;
};

struct GroupResult {
  std::string id;
  double mean_dice = 0.0;
  double auc = 0.0;
  bool auc_defined = false;  // false when the group has one-sided labels
  int volumes = 0;
};

/// Dataset-level report: per-volume rows, per-group rows, overall means.
struct EvalReport {
  std::vector<VolumeResult> per_volume;
  std::vector<GroupResult> per_group;
  double overall_mean_dice = 0.0;
  double overall_mean_auc = 0.0;
  bool overall_auc_defined = false;
};

/// Aggregates per-volume results into group rows and overall means. Group
/// order follows first appearance in the input.
inline EvalReport aggregate_eval(const std::vector<VolumeResult>& volumes) {
  EvalReport report;
  report.per_volume = volumes;
  std::vector<std::string> group_order;
  for (const auto& v : volumes)
    if (std::find(group_order.begin(), group_order.end(), v.group) == group_order.end())
      group_order.push_back(v.group);

  double auc_sum = 0.0;
  int auc_count = 0;
  for (const auto& g : group_order) {
    GroupResult row;
    row.id = g;
    double dice_sum = 0.0;
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (const auto& v : volumes)
      if (v.group == g) {
        ++row.volumes;
        dice_sum += v.dice;
        scores.push_back(v.detection_score);
        labels.push_back(v.label ? 1 : 0);
      }
    row.mean_dice = dice_sum / row.volumes;
    bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (has_pos && has_neg) {
      row.auc = roc_auc(scores, labels);
      row.auc_defined = true;
      auc_sum += row.auc;
      ++auc_count;
    }
    report.per_group.push_back(row);
  }

  double dice_sum = 0.0;
  for (const auto& v : volumes) dice_sum += v.dice;
  report.overall_mean_dice = volumes.empty() ? 0.0 : dice_sum / volumes.size();
  if (auc_count > 0) {
    report.overall_mean_auc = auc_sum / auc_count;
    report.overall_auc_defined = true;
  }
  return report;
}

}  // namespace gmp
