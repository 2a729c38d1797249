#pragma once

// Pseudo-label weights for a mini-batch of EMA-projected embeddings:
// Gaussian pairwise similarity, neighbourhood-overlap contextual similarity
// with reciprocal-neighbour query expansion, and their convex combination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "reconpatch/error.hpp"
#include "reconpatch/tensor.hpp"

namespace reconpatch {

// n x dim embeddings, one row per batch member.
using EmbeddingBatch = Matrix<double>;

// n x n weights in [0,1].
using SimilarityWeights = Matrix<double>;

struct SimilarityConfig {
  double sigma = 1.0;
  std::size_t k = 10;
  double alpha = 0.5;
};

// Squared Euclidean distances, accumulated coordinate by coordinate in index order.
inline Matrix<double> pairwise_sq_distances(const EmbeddingBatch& z) {
  Matrix<double> d(z.rows, z.rows, 0.0);
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = i + 1; j < z.rows; ++j) {
      const double v = squared_distance(z.row(i), z.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

inline SimilarityWeights pairwise_similarity(const EmbeddingBatch& z, double sigma) {
  require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive, got " + std::to_string(sigma));
  const auto d = pairwise_sq_distances(z);
  SimilarityWeights w(z.rows, z.rows, 1.0);
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j < z.rows; ++j)
      if (i != j) w(i, j) = std::exp(-d(i, j) / sigma);
  return w;
}

// Membership masks: sets[i][j] != 0 iff j is in N_k(i). A point belongs to
// its own neighbourhood, and every point tied with the k-th distance is kept.
using NeighborSets = std::vector<std::vector<char>>;

inline NeighborSets knn_masks(const Matrix<double>& sq_dist, std::size_t k) {
  const std::size_t n = sq_dist.rows;
  require(k >= 1 && k <= n, ErrorCode::KOutOfRange,
          "k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  NeighborSets sets(n, std::vector<char>(n, 0));
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = sq_dist.row(i);
    std::copy(src.begin(), src.end(), row.begin());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    const double kth = row[k - 1];
    for (std::size_t j = 0; j < n; ++j) sets[i][j] = src[j] <= kth ? 1 : 0;
    sets[i][i] = 1;
  }
  return sets;
}

inline std::vector<std::vector<std::size_t>> knn_sets(const EmbeddingBatch& z, std::size_t k) {
  const auto masks = knn_masks(pairwise_sq_distances(z), k);
  std::vector<std::vector<std::size_t>> out(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (std::size_t j = 0; j < masks.size(); ++j)
      if (masks[i][j]) out[i].push_back(j);
  return out;
}

inline SimilarityWeights contextual_similarity(const EmbeddingBatch& z, std::size_t k) {
  const std::size_t n = z.rows;
  require(k >= 2 && k <= n, ErrorCode::KOutOfRange,
          "contextual similarity needs 2 <= k <= n, got k=" + std::to_string(k) + ", n=" + std::to_string(n));
  const auto d = pairwise_sq_distances(z);
  const auto nk = knn_masks(d, k);
  const auto nh = knn_masks(d, k / 2);

  std::vector<std::size_t> nk_size(n, 0);
  for (std::size_t i = 0; i < n; ++i) nk_size[i] = static_cast<std::size_t>(std::count(nk[i].begin(), nk[i].end(), 1));

  // Neighbourhood overlap, zero outside N_k(i).
  Matrix<double> overlap(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!nk[i][j]) continue;
      std::size_t common = 0;
      for (std::size_t t = 0; t < n; ++t) common += (nk[i][t] && nk[j][t]) ? 1 : 0;
      overlap(i, j) = static_cast<double>(common) / static_cast<double>(nk_size[i]);
    }

  // Query expansion over reciprocal half-size neighbours, summed in index order.
  Matrix<double> expanded(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> reciprocal;
    for (std::size_t l = 0; l < n; ++l)
      if (nh[i][l] && nh[l][i]) reciprocal.push_back(l);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l : reciprocal) acc += overlap(l, j);
      expanded(i, j) = acc / static_cast<double>(reciprocal.size());
    }
  }

  SimilarityWeights w(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = (expanded(i, j) + expanded(j, i)) / 2.0;
  return w;
}

inline SimilarityWeights combine(const SimilarityWeights& pairwise, const SimilarityWeights& contextual, double alpha) {
  require(pairwise.rows == contextual.rows && pairwise.cols == contextual.cols, ErrorCode::ShapeMismatch,
          "pairwise and contextual weights differ in shape");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::AlphaOutOfRange, "alpha must lie in [0,1]");
  if (alpha == 1.0) return pairwise;
  if (alpha == 0.0) return contextual;
  SimilarityWeights w(pairwise.rows, pairwise.cols);
  for (std::size_t i = 0; i < w.data.size(); ++i)
    w.data[i] = alpha * pairwise.data[i] + (1.0 - alpha) * contextual.data[i];
  return w;
}

inline SimilarityWeights similarity_weights(const EmbeddingBatch& z, const SimilarityConfig& cfg) {
  return combine(pairwise_similarity(z, cfg.sigma), contextual_similarity(z, cfg.k), cfg.alpha);
}

}  // namespace reconpatch
