#pragma once

// Locally aware patch features: mean-pool each level's feature map over an
// s x s neighbourhood, bring coarser levels onto the finest grid and stack
// channels so that every spatial position becomes one feature vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reconpatch/error.hpp"
#include "reconpatch/tensor.hpp"

namespace reconpatch {

struct PatchFeatureSet {
  std::size_t height = 0;
  std::size_t width = 0;
  Matrix<float> vectors;  // (height*width) x dim, row = h*width + w

  std::size_t dim() const { return vectors.cols; }
  std::size_t size() const { return vectors.rows; }
  std::size_t index(std::size_t h, std::size_t w) const { return h * width + w; }
};

inline void require_chw(const TensorF32& fm) {
  validate_tensor(fm);
  require(fm.rank() == 3, ErrorCode::InvalidShape, "feature map must have shape [C,H,W]");
}

// Mean over the s x s window centred on each cell. Windows are clipped at the
// borders and the mean is taken over in-bounds cells only.
inline TensorF32 aggregate_neighborhood(const TensorF32& fm, std::size_t s) {
  require_chw(fm);
  require(s % 2 == 1, ErrorCode::EvenPatchSize, "patch size must be odd, got " + std::to_string(s));
  const std::size_t C = fm.shape[0], H = fm.shape[1], W = fm.shape[2];
  require(s <= 2 * std::min(H, W) - 1, ErrorCode::PatchTooLarge,
          "patch size " + std::to_string(s) + " exceeds 2*min(H,W)-1 for a " + std::to_string(H) + "x" +
              std::to_string(W) + " map");
  if (s == 1) return fm;

  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(s / 2);
  TensorF32 out = TensorF32::zeros(fm.shape);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t h0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(h) - r));
      const std::size_t h1 = std::min(H - 1, h + static_cast<std::size_t>(r));
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t w0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(w) - r));
        const std::size_t w1 = std::min(W - 1, w + static_cast<std::size_t>(r));
        double acc = 0.0;
        for (std::size_t y = h0; y <= h1; ++y)
          for (std::size_t x = w0; x <= w1; ++x) acc += fm.at(c, y, x);
        const double count = static_cast<double>((h1 - h0 + 1) * (w1 - w0 + 1));
        out.at(c, h, w) = static_cast<float>(acc / count);
      }
    }
  }
  return out;
}

// Source coordinate and blend weight for half-pixel-centre (align_corners=false)
// bilinear resampling of one axis.
struct BilinearTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;  // weight of `hi`
};

inline std::vector<BilinearTap> bilinear_taps(std::size_t in_size, std::size_t out_size) {
  std::vector<BilinearTap> taps(out_size);
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  for (std::size_t o = 0; o < out_size; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    lo = std::min(lo, in_size - 1);
    const std::size_t hi = std::min(lo + 1, in_size - 1);
    taps[o] = {lo, hi, hi == lo ? 0.0 : src - static_cast<double>(lo)};
  }
  return taps;
}

// Bilinear resize of a single H x W plane (row-major) to out_h x out_w.
template <typename T>
std::vector<double> resize_bilinear(std::span<const T> plane, std::size_t H, std::size_t W, std::size_t out_h,
                                    std::size_t out_w) {
  const auto ty = bilinear_taps(H, out_h);
  const auto tx = bilinear_taps(W, out_w);
  std::vector<double> out(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto& a = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& b = tx[x];
      const double v00 = plane[a.lo * W + b.lo], v01 = plane[a.lo * W + b.hi];
      const double v10 = plane[a.hi * W + b.lo], v11 = plane[a.hi * W + b.hi];
      const double top = v00 + (v01 - v00) * b.frac;
      const double bottom = v10 + (v11 - v10) * b.frac;
      out[y * out_w + x] = top + (bottom - top) * a.frac;
    }
  }
  return out;
}

inline PatchFeatureSet merge_hierarchies(std::span<const TensorF32> maps) {
  require(!maps.empty(), ErrorCode::EmptyList, "no feature maps to merge");
  for (const auto& m : maps) require_chw(m);
  const std::size_t H = maps[0].shape[1], W = maps[0].shape[2];
  std::size_t dim = 0;
  for (const auto& m : maps) {
    require(m.shape[1] <= H && m.shape[2] <= W, ErrorCode::NonDecreasingResolution,
            "later hierarchy levels must not be larger than the first");
    dim += m.shape[0];
  }

  PatchFeatureSet out;
  out.height = H;
  out.width = W;
  out.vectors = Matrix<float>(H * W, dim);
  std::size_t offset = 0;
  for (const auto& m : maps) {
    const std::size_t C = m.shape[0], h = m.shape[1], w = m.shape[2];
    for (std::size_t c = 0; c < C; ++c) {
      std::span<const float> plane(m.data.data() + c * h * w, h * w);
      if (h == H && w == W) {
        for (std::size_t i = 0; i < H * W; ++i) out.vectors(i, offset + c) = plane[i];
      } else {
        const auto up = resize_bilinear(plane, h, w, H, W);
        for (std::size_t i = 0; i < H * W; ++i) out.vectors(i, offset + c) = static_cast<float>(up[i]);
      }
    }
    offset += C;
  }
  return out;
}

// Aggregate every level with patch size s, then merge.
inline PatchFeatureSet build_patch_features(std::span<const TensorF32> maps, std::size_t s) {
  std::vector<TensorF32> pooled;
  pooled.reserve(maps.size());
  for (const auto& m : maps) pooled.push_back(aggregate_neighborhood(m, s));
  return merge_hierarchies(pooled);
}

}  // namespace reconpatch
