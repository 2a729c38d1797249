#pragma once

// Shared helpers for the unit and acceptance suites: scratch directories,
// random inputs, and brute-force reference implementations written without
// reusing library internals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "reconpatch/memory_bank.hpp"
#include "reconpatch/similarity.hpp"
#include "reconpatch/tensor.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using reconpatch::Matrix;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("reconpatch_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

template <typename T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix<T> m(rows, cols);
  for (auto& v : m.data) v = static_cast<T>(g(rng));
  return m;
}

// Small integer coordinates: plenty of exact distance ties.
inline Matrix<double> integer_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, int lo = -2, int hi = 2) {
  std::uniform_int_distribution<int> u(lo, hi);
  Matrix<double> m(rows, cols);
  for (auto& v : m.data) v = u(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Contextual similarity, written directly from the set definitions.

inline double sq_dist(const Matrix<double>& z, std::size_t i, std::size_t j) {
  double acc = 0.0;
  for (std::size_t c = 0; c < z.cols; ++c) {
    const double d = z(i, c) - z(j, c);
    acc += d * d;
  }
  return acc;
}

// N_k(i): i itself plus every j whose distance is at most the k-th smallest
// distance from i (distance to i itself counted as 0).
inline std::set<std::size_t> knn_set(const Matrix<double>& z, std::size_t i, std::size_t k) {
  std::vector<double> d;
  for (std::size_t j = 0; j < z.rows; ++j) d.push_back(j == i ? 0.0 : sq_dist(z, i, j));
  std::vector<double> sorted = d;
  std::sort(sorted.begin(), sorted.end());
  const double kth = sorted[k - 1];
  std::set<std::size_t> out{i};
  for (std::size_t j = 0; j < z.rows; ++j)
    if (d[j] <= kth) out.insert(j);
  return out;
}

inline Matrix<double> contextual_oracle(const Matrix<double>& z, std::size_t k) {
  const std::size_t n = z.rows;
  std::vector<std::set<std::size_t>> nk(n), nh(n);
  for (std::size_t i = 0; i < n; ++i) {
    nk[i] = knn_set(z, i, k);
    nh[i] = knn_set(z, i, k / 2);
  }
  auto w_tilde = [&](std::size_t i, std::size_t j) {
    if (!nk[i].count(j)) return 0.0;
    std::vector<std::size_t> common;
    std::set_intersection(nk[i].begin(), nk[i].end(), nk[j].begin(), nk[j].end(), std::back_inserter(common));
    return static_cast<double>(common.size()) / static_cast<double>(nk[i].size());
  };
  std::vector<std::set<std::size_t>> recip(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l : nh[i])
      if (nh[l].count(i)) recip[i].insert(l);

  Matrix<double> w_hat(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l : recip[i]) acc += w_tilde(l, j);  // std::set iterates ascending
      w_hat(i, j) = acc / static_cast<double>(recip[i].size());
    }
  Matrix<double> w(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = (w_hat(i, j) + w_hat(j, i)) / 2.0;
  return w;
}

// ---------------------------------------------------------------------------
// Exhaustive k-center: best radius over all k-subsets of the points.

inline double optimal_kcenter_radius(const Matrix<float>& pts, std::size_t k) {
  const std::size_t n = pts.rows;
  double best = std::numeric_limits<double>::infinity();
  std::vector<char> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), 1);
  std::sort(pick.begin(), pick.end());
  do {
    double radius = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double near = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n; ++c) {
        if (!pick[c]) continue;
        double acc = 0.0;
        for (std::size_t d = 0; d < pts.cols; ++d) {
          const double diff = static_cast<double>(pts(i, d)) - static_cast<double>(pts(c, d));
          acc += diff * diff;
        }
        near = std::min(near, std::sqrt(acc));
      }
      radius = std::max(radius, near);
    }
    best = std::min(best, radius);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// ---------------------------------------------------------------------------
// AUROC by explicit pair counting (ties count one half).

inline double auroc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

}  // namespace testing_support
