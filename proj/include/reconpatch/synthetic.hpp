#pragma once

// Synthetic patch-feature fixtures: normal patches drawn from two Gaussian
// clusters, anomalous images carrying a few patches that sit between the
// clusters. Used by the test suites and the make_fixture tool.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "reconpatch/feature_io.hpp"
#include "reconpatch/patch_features.hpp"
#include "reconpatch/tensor.hpp"

namespace reconpatch::synthetic {

struct FixtureParams {
  std::size_t dim = 8;
  std::size_t grid = 4;  // H = W
  std::size_t n_train = 24;
  std::size_t n_test_normal = 12;
  std::size_t n_test_abnormal = 12;
  std::size_t anomalous_patches = 2;
  double separation = 10.0;  // distance between the two cluster centres
  double noise = 1.0;       // isotropic standard deviation
  double anomaly_spread = 0.5;  // spread along the separation axis around the midpoint
  std::uint64_t seed = 7;
};

struct Sample {
  PatchFeatureSet patches;
  bool abnormal = false;
  std::vector<char> anomalous;  // per patch
};

struct Fixture {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// One point from a two-cluster mixture in R^dim: centres at +-separation/2 on axis 0.
inline std::vector<float> normal_point(const FixtureParams& p, std::mt19937_64& rng, int cluster) {
  std::normal_distribution<double> noise(0.0, p.noise);
  std::vector<float> v(p.dim);
  for (std::size_t c = 0; c < p.dim; ++c) v[c] = static_cast<float>(noise(rng));
  v[0] += static_cast<float>((cluster == 0 ? -0.5 : 0.5) * p.separation);
  return v;
}

inline std::vector<float> anomaly_point(const FixtureParams& p, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, p.noise);
  std::uniform_real_distribution<double> along(-p.anomaly_spread, p.anomaly_spread);
  std::vector<float> v(p.dim);
  for (std::size_t c = 0; c < p.dim; ++c) v[c] = static_cast<float>(noise(rng));
  v[0] = static_cast<float>(along(rng));
  return v;
}

inline Sample make_sample(const FixtureParams& p, std::mt19937_64& rng, bool abnormal) {
  Sample s;
  s.abnormal = abnormal;
  const std::size_t n = p.grid * p.grid;
  s.patches.height = p.grid;
  s.patches.width = p.grid;
  s.patches.vectors = Matrix<float>(n, p.dim);
  s.anomalous.assign(n, 0);
  if (abnormal) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < std::min(p.anomalous_patches, n); ++i) s.anomalous[idx[i]] = 1;
  }
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = s.anomalous[i] ? anomaly_point(p, rng) : normal_point(p, rng, coin(rng) ? 1 : 0);
    std::copy(v.begin(), v.end(), s.patches.vectors.row(i).begin());
  }
  return s;
}

inline Fixture make_fixture(const FixtureParams& p) {
  std::mt19937_64 rng(p.seed);
  Fixture f;
  for (std::size_t i = 0; i < p.n_train; ++i) f.train.push_back(make_sample(p, rng, false));
  for (std::size_t i = 0; i < p.n_test_normal; ++i) f.test.push_back(make_sample(p, rng, false));
  for (std::size_t i = 0; i < p.n_test_abnormal; ++i) f.test.push_back(make_sample(p, rng, true));
  return f;
}

// Plain two-Gaussian point cloud with cluster ids.
inline std::pair<PatchFeatureSet, std::vector<int>> two_clusters(std::size_t per_cluster, const FixtureParams& p) {
  std::mt19937_64 rng(p.seed);
  PatchFeatureSet s;
  s.height = 2 * per_cluster;
  s.width = 1;
  s.vectors = Matrix<float>(2 * per_cluster, p.dim);
  std::vector<int> ids(2 * per_cluster);
  for (std::size_t i = 0; i < 2 * per_cluster; ++i) {
    ids[i] = i < per_cluster ? 0 : 1;
    const auto v = normal_point(p, rng, ids[i]);
    std::copy(v.begin(), v.end(), s.vectors.row(i).begin());
  }
  return {s, ids};
}

// Level maps for one sample: level "2" is the patch grid itself as [dim,H,W];
// level "3" is a 2x2-average-pooled copy of the first two channels.
inline std::vector<TensorF32> level_maps(const PatchFeatureSet& s) {
  const std::size_t H = s.height, W = s.width, D = s.dim();
  TensorF32 l2 = TensorF32::zeros({D, H, W});
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t c = 0; c < D; ++c) l2.at(c, h, w) = s.vectors(s.index(h, w), c);
  const std::size_t h3 = std::max<std::size_t>(1, H / 2), w3 = std::max<std::size_t>(1, W / 2);
  const std::size_t c3 = std::min<std::size_t>(2, D);
  TensorF32 l3 = TensorF32::zeros({c3, h3, w3});
  for (std::size_t c = 0; c < c3; ++c)
    for (std::size_t y = 0; y < h3; ++y)
      for (std::size_t x = 0; x < w3; ++x) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t dy = 0; dy < 2 && 2 * y + dy < H; ++dy)
          for (std::size_t dx = 0; dx < 2 && 2 * x + dx < W; ++dx, ++cnt) acc += l2.at(c, 2 * y + dy, 2 * x + dx);
        l3.at(c, y, x) = static_cast<float>(acc / static_cast<double>(cnt));
      }
  return {l2, l3};
}

// Writes features, masks and manifest.json under `dir`. Each patch covers a
// `pixels_per_patch` square of the nominal image.
inline std::filesystem::path write_fixture(const std::filesystem::path& dir, const Fixture& f,
                                           std::size_t pixels_per_patch = 8, const std::string& category = "synthetic") {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "masks");
  nlohmann::json samples = nlohmann::json::array();

  auto emit = [&](const Sample& s, const std::string& id, bool train) {
    const auto maps = level_maps(s.patches);
    const std::string f2 = "features/" + id + "_l2.npy", f3 = "features/" + id + "_l3.npy";
    write_tensor(dir / f2, maps[0]);
    write_tensor(dir / f3, maps[1]);
    const std::size_t ih = s.patches.height * pixels_per_patch, iw = s.patches.width * pixels_per_patch;
    nlohmann::json e = {{"id", id},
                        {"split", train ? "train" : "test"},
                        {"label", s.abnormal ? "abnormal" : "normal"},
                        {"features", {{"2", f2}, {"3", f3}}},
                        {"image_size", {ih, iw}}};
    if (s.abnormal) {
      TensorF32 mask = TensorF32::zeros({ih, iw});
      for (std::size_t y = 0; y < ih; ++y)
        for (std::size_t x = 0; x < iw; ++x)
          if (s.anomalous[s.patches.index(y / pixels_per_patch, x / pixels_per_patch)]) mask.data[y * iw + x] = 1.0f;
      const std::string m = "masks/" + id + ".npy";
      write_tensor(dir / m, mask);
      e["mask"] = m;
    }
    samples.push_back(e);
  };

  for (std::size_t i = 0; i < f.train.size(); ++i) emit(f.train[i], "train_" + std::to_string(i), true);
  for (std::size_t i = 0; i < f.test.size(); ++i) emit(f.test[i], "test_" + std::to_string(i), false);

  const nlohmann::json manifest = {{"category", category}, {"levels", {"2", "3"}}, {"samples", samples}};
  const fs::path path = dir / "manifest.json";
  std::ofstream(path) << manifest.dump(2) << "\n";
  return path;
}

// Pipeline config matching write_fixture's layout (manifest.json next to it,
// artifacts under work/). Contextual weighting with k near half the batch is
// what separates the two clusters reliably here.
inline nlohmann::json fixture_config_json() {
  return {{"paths", {{"manifest", "manifest.json"}, {"workdir", "work"}}},
          {"patch", {{"levels", {"2", "3"}}, {"s", 1}}},
          {"similarity", {{"sigma", 16.0}, {"k", 32}, {"alpha", 0.0}}},
          {"train", {{"epochs", 20}, {"batch_size", 64}, {"lr", 1e-2}, {"d_f", 8}, {"seed", 1}}},
          {"bank", {{"fraction", 0.1}, {"seed", 0}}},
          {"scoring", {{"b", 3}, {"smooth_sigma", 2.0}}}};
}

}  // namespace reconpatch::synthetic
