#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "reconpatch/error.hpp"

namespace reconpatch {

struct LabeledScores {
  std::vector<double> scores;
  std::vector<int> labels;  // 0 normal, 1 abnormal
};

namespace eval_detail {

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCode::LengthMismatch, "scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  require(pos > 0 && neg > 0, ErrorCode::SingleClass, "both normal and abnormal labels are required");
  return {pos, neg};
}

}  // namespace eval_detail

// Mann-Whitney AUROC with average ranks for ties: P(pos > neg) + P(tie)/2.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  const auto [pos, neg] = eval_detail::class_counts(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based ranks i+1..j share their average.
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] != 0) rank_sum += avg;
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * q);
}

inline double auroc(const LabeledScores& ls) { return auroc(ls.scores, ls.labels); }

// AUROC over every pixel of every sample. Masks are binary (non-zero = anomalous).
inline double pixel_auroc(std::span<const std::vector<double>> maps, std::span<const std::vector<int>> masks) {
  require(maps.size() == masks.size(), ErrorCode::ShapeMismatch, "number of maps and masks differ");
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    require(maps[i].size() == masks[i].size(), ErrorCode::ShapeMismatch, "map and mask sizes differ");
    scores.insert(scores.end(), maps[i].begin(), maps[i].end());
    for (int m : masks[i]) labels.push_back(m != 0 ? 1 : 0);
  }
  return auroc(scores, labels);
}

struct ThresholdResult {
  double threshold = 0.0;
  double f1 = 0.0;
};

// Threshold among the observed scores maximising F1 of (score >= threshold);
// ties go to the lower threshold.
inline ThresholdResult f1_optimal_threshold(std::span<const double> scores, std::span<const int> labels) {
  const auto [pos, neg] = eval_detail::class_counts(scores, labels);
  (void)neg;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  ThresholdResult best{scores[order.front()], -1.0};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] != 0 ? tp : fp) += 1;
      ++j;
    }
    const std::size_t fn = pos - tp;
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    // Sweeping downwards, so >= keeps the lowest threshold among equal F1.
    if (f1 >= best.f1) best = {scores[order[i]], f1};
    i = j;
  }
  return best;
}

inline ThresholdResult f1_optimal_threshold(const LabeledScores& ls) { return f1_optimal_threshold(ls.scores, ls.labels); }

}  // namespace reconpatch
