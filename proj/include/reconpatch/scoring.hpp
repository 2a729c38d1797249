#pragma once

// Nearest-neighbour anomaly scores against a memory bank, robust
// normalisation, ensemble fusion and the discriminability index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "reconpatch/error.hpp"
#include "reconpatch/feature_io.hpp"
#include "reconpatch/memory_bank.hpp"
#include "reconpatch/patch_features.hpp"
#include "reconpatch/tensor.hpp"

namespace reconpatch {

inline constexpr double kMadEps = 1e-12;

struct ScoreMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row = h*width + w

  std::size_t up_height = 0;
  std::size_t up_width = 0;
  std::vector<double> upsampled;  // empty until upsample_map
};

struct PatchScore {
  double raw = 0.0;       // distance to the nearest bank row
  double weighted = 0.0;  // after neighbourhood reweighting
};

// For every bank row, the indices of its b nearest bank rows (itself first,
// then by distance, ties by lower index).
inline std::vector<std::vector<std::size_t>> bank_neighbourhoods(const MemoryBank& bank, std::size_t b, unsigned workers = 1) {
  const std::size_t M = bank.size();
  require(b >= 2, ErrorCode::BankTooSmall, "b must be at least 2");
  require(b <= M, ErrorCode::BankTooSmall, "b=" + std::to_string(b) + " exceeds bank size " + std::to_string(M));
  std::vector<std::vector<std::size_t>> out(M);
  parallel_for(M, workers, [&](std::size_t r) {
    std::vector<std::pair<double, std::size_t>> d(M);
    for (std::size_t q = 0; q < M; ++q)
      d[q] = {q == r ? -1.0 : squared_distance(bank.coreset.row(r), bank.coreset.row(q)), q};
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(b), d.end());
    out[r].resize(b);
    for (std::size_t i = 0; i < b; ++i) out[r][i] = d[i].second;
  });
  return out;
}

// Reweighted score (1 - e^{s'} / sum_{r' in N_b(r*)} e^{D(x, r')}) * s',
// exponentials shifted by the largest neighbour distance.
inline double reweight(double nearest, std::span<const double> neighbour_dists) {
  const double shift = *std::max_element(neighbour_dists.begin(), neighbour_dists.end());
  double denom = 0.0;
  for (double d : neighbour_dists) denom += std::exp(d - shift);
  const double factor = 1.0 - std::exp(nearest - shift) / denom;
  return std::max(0.0, factor) * nearest;
}

inline std::vector<PatchScore> patch_scores_detailed(const MemoryBank& bank, const Matrix<float>& feats, std::size_t b,
                                                     unsigned workers = 1) {
  require(feats.cols == bank.dim(), ErrorCode::DimMismatch,
          "feature dim " + std::to_string(feats.cols) + " != bank dim " + std::to_string(bank.dim()));
  const auto hoods = bank_neighbourhoods(bank, b, workers);
  std::vector<PatchScore> out(feats.rows);
  parallel_for(feats.rows, workers, [&](std::size_t t) {
    auto x = feats.row(t);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < bank.size(); ++r) {
      const double d = squared_distance(x, bank.coreset.row(r));
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    const double nearest = std::sqrt(best_d);
    std::vector<double> dists;
    dists.reserve(b);
    for (std::size_t r : hoods[best])
      dists.push_back(r == best ? nearest : euclidean_distance(x, bank.coreset.row(r)));
    out[t] = {nearest, reweight(nearest, dists)};
  });
  return out;
}

inline std::vector<double> patch_scores(const MemoryBank& bank, const Matrix<float>& feats, std::size_t b, unsigned workers = 1) {
  const auto detailed = patch_scores_detailed(bank, feats, b, workers);
  std::vector<double> out(detailed.size());
  std::transform(detailed.begin(), detailed.end(), out.begin(), [](const PatchScore& s) { return s.weighted; });
  return out;
}

// Scores every patch of one sample, keeping its spatial grid.
inline ScoreMap score_sample(const MemoryBank& bank, const RepresentationModel& model, const PatchFeatureSet& patches,
                             std::size_t b, unsigned workers = 1) {
  const auto y = forward_f(model, patches.vectors);
  ScoreMap map;
  map.height = patches.height;
  map.width = patches.width;
  map.values = patch_scores(bank, y.cast<float>(), b, workers);
  return map;
}

inline double image_score(const ScoreMap& map) {
  require(!map.values.empty(), ErrorCode::EmptyMap, "score map is empty");
  return *std::max_element(map.values.begin(), map.values.end());
}

// Separable Gaussian blur, kernel truncated at 4 sigma, half-sample
// symmetric (reflect) borders.
inline std::vector<double> gaussian_blur(const std::vector<double>& img, std::size_t H, std::size_t W, double sigma) {
  if (sigma <= 0.0) return img;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  auto reflect = [](std::ptrdiff_t i, std::ptrdiff_t n) {
    const std::ptrdiff_t period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };

  std::vector<double> tmp(img.size()), out(img.size());
  const auto h = static_cast<std::ptrdiff_t>(H), w = static_cast<std::ptrdiff_t>(W);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * img[static_cast<std::size_t>(y * w + reflect(x + k, w))];
      tmp[static_cast<std::size_t>(y * w + x)] = acc;
    }
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(reflect(y + k, h) * w + x)];
      out[static_cast<std::size_t>(y * w + x)] = std::max(0.0, acc);
    }
  return out;
}

inline ScoreMap upsample_map(const ScoreMap& map, ImageSize target, double smooth_sigma) {
  require(!map.values.empty(), ErrorCode::EmptyMap, "score map is empty");
  require(target.height >= map.height && target.width >= map.width, ErrorCode::InvalidTarget,
          "target size must not be smaller than the score grid");
  require(smooth_sigma >= 0.0, ErrorCode::InvalidTarget, "smoothing sigma must be non-negative");
  ScoreMap out = map;
  out.up_height = target.height;
  out.up_width = target.width;
  out.upsampled = resize_bilinear(std::span<const double>(map.values), map.height, map.width, target.height, target.width);
  out.upsampled = gaussian_blur(out.upsampled, target.height, target.width, smooth_sigma);
  return out;
}

// Median of a copy; even lengths average the two middle order statistics.
inline double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::EmptyInput, "median of an empty list");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

inline NormStats fit_norm_stats(std::span<const double> train_scores) {
  require(!train_scores.empty(), ErrorCode::EmptyInput, "no training scores to fit normalisation");
  NormStats st;
  st.median = median(std::vector<double>(train_scores.begin(), train_scores.end()));
  std::vector<double> dev(train_scores.size());
  std::transform(train_scores.begin(), train_scores.end(), dev.begin(), [&](double s) { return std::abs(s - st.median); });
  st.mad = median(std::move(dev));
  return st;
}

inline double normalize(double score, const NormStats& st) {
  return (score - st.median) / (st.beta * std::max(st.mad, kMadEps));
}

inline std::vector<double> normalize(std::span<const double> scores, const NormStats& st) {
  std::vector<double> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(), [&](double s) { return normalize(s, st); });
  return out;
}

inline std::vector<double> fuse(std::span<const std::vector<double>> lists) {
  require(!lists.empty(), ErrorCode::LengthMismatch, "nothing to fuse");
  const std::size_t n = lists[0].size();
  for (const auto& l : lists) require(l.size() == n, ErrorCode::LengthMismatch, "score lists differ in length");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& l : lists) acc += l[i];
    out[i] = acc / static_cast<double>(lists.size());
  }
  return out;
}

inline double discriminability(std::span<const double> normal, std::span<const double> abnormal) {
  require(normal.size() >= 2 && abnormal.size() >= 2, ErrorCode::DegenerateVariance,
          "both score lists need at least two entries");
  auto moments = [](std::span<const double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair{mean, var / static_cast<double>(v.size())};
  };
  const auto [mn, vn] = moments(normal);
  const auto [ma, va] = moments(abnormal);
  const double pooled = (va + vn) / 2.0;
  require(pooled > 0.0, ErrorCode::DegenerateVariance, "pooled variance is zero");
  return std::abs(ma - mn) / std::sqrt(pooled);
}

}  // namespace reconpatch
